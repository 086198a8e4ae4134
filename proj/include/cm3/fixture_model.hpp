#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "cm3/decode.hpp"
#include "cm3/error.hpp"
#include "cm3/types.hpp"

namespace cm3 {

// Deterministic LogitSource for tests: explicit logit vectors keyed by prefix
// suffix, longest match wins, with a default vector for everything else.
class FixtureModel final : public LogitSource {
  public:
    explicit FixtureModel(std::size_t vocab_size, std::vector<double> default_logits = {})
        : vocab_(vocab_size), default_logits_(std::move(default_logits)) {
        if (vocab_ == 0)
            throw ConfigError("vocabulary size must be positive");
        if (default_logits_.empty())
            default_logits_.assign(vocab_, 0.0);
        if (default_logits_.size() != vocab_)
            throw ShapeError("default logit vector length does not match the vocabulary");
    }

    void set(TokenStream suffix, std::vector<double> logits) {
        if (logits.size() != vocab_)
            throw ShapeError("logit vector length does not match the vocabulary");
        rules_[std::move(suffix)] = std::move(logits);
    }

    std::size_t vocab_size() const override { return vocab_; }

    std::vector<double> logits(std::span<const TokenId> prefix) const override {
        const std::vector<double>* best = &default_logits_;
        std::size_t best_len = 0;
        bool matched = false;
        for (const auto& [suffix, vec] : rules_) {
            if (suffix.size() > prefix.size() || (matched && suffix.size() < best_len))
                continue;
            if (std::equal(suffix.begin(), suffix.end(), prefix.end() - static_cast<std::ptrdiff_t>(suffix.size()))) {
                best = &vec;
                best_len = suffix.size();
                matched = true;
            }
        }
        return *best;
    }

  private:
    std::size_t vocab_;
    std::vector<double> default_logits_;
    std::map<TokenStream, std::vector<double>> rules_;
};

} // namespace cm3
