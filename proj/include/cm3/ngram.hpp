#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cm3/decode.hpp"
#include "cm3/types.hpp"

namespace cm3 {

// Back-off n-gram model with add-delta smoothing. Scoring uses the longest
// context of length <= order-1 with nonzero count mass; every level counts
// transitions across <break>, so caption statistics inform image-token
// statistics. Immutable after training, safe to score concurrently.
class NGramModel final : public LogitSource {
  public:
    NGramModel(std::int32_t order, float delta, std::size_t vocab_size);

    std::int32_t order() const { return order_; }
    float delta() const { return delta_; }
    std::size_t vocab_size() const override { return vocab_; }

    // Counts every transition in the stream; <pad> targets are skipped.
    void observe(const TokenStream& stream);

    // ln P(token | prefix) for the whole id space.
    std::vector<double> logits(std::span<const TokenId> prefix) const override;

    bool operator==(const NGramModel& other) const;

    friend void save_ngram(const NGramModel& model, const std::string& path);
    friend NGramModel load_ngram(const std::string& path);

  private:
    struct Bucket {
        std::uint64_t total = 0;
        std::unordered_map<TokenId, std::uint32_t> counts;
    };

    static std::string context_key(std::span<const TokenId> ctx);

    std::int32_t order_;
    float delta_;
    std::size_t vocab_;
    std::vector<std::unordered_map<std::string, Bucket>> tables_; // tables_[L]: contexts of length L
};

NGramModel train_ngram(const std::vector<TokenStream>& corpus, std::int32_t order, float delta,
                       std::size_t vocab_size);

void save_ngram(const NGramModel& model, const std::string& path);
NGramModel load_ngram(const std::string& path);

} // namespace cm3
