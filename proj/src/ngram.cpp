#include "cm3/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cm3/error.hpp"
#include "cm3/io.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

namespace {

constexpr std::string_view kNGramMagic = "CM3NG1";

} // namespace

NGramModel::NGramModel(std::int32_t order, float delta, std::size_t vocab_size)
    : order_(order), delta_(delta), vocab_(vocab_size) {
    if (order < 1)
        throw ConfigError("n-gram order must be at least 1");
    if (!(delta > 0.0f))
        throw ConfigError("smoothing delta must be positive");
    if (vocab_size == 0)
        throw ConfigError("vocabulary size must be positive");
    tables_.resize(static_cast<std::size_t>(order));
}

std::string NGramModel::context_key(std::span<const TokenId> ctx) {
    std::string key(ctx.size() * sizeof(TokenId), '\0');
    if (!ctx.empty())
        std::memcpy(key.data(), ctx.data(), key.size());
    return key;
}

void NGramModel::observe(const TokenStream& stream) {
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const TokenId target = stream[i];
        if (target == VocabLayout::kPad)
            continue;
        if (target < 0 || static_cast<std::size_t>(target) >= vocab_)
            throw DataError("token " + std::to_string(target) + " outside the model vocabulary");
        const auto max_len = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), i);
        for (std::size_t len = 0; len <= max_len; ++len) {
            Bucket& bucket =
                tables_[len][context_key({stream.data() + i - len, len})];
            ++bucket.counts[target];
            ++bucket.total;
        }
    }
}

std::vector<double> NGramModel::logits(std::span<const TokenId> prefix) const {
    const Bucket* bucket = nullptr;
    const auto max_len = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), prefix.size());
    for (std::size_t len = max_len + 1; len-- > 0;) {
        const auto& table = tables_[len];
        const auto it = table.find(context_key(prefix.subspan(prefix.size() - len, len)));
        if (it != table.end() && it->second.total > 0) {
            bucket = &it->second;
            break;
        }
    }
    const double delta = static_cast<double>(delta_);
    const double total = bucket ? static_cast<double>(bucket->total) : 0.0;
    const double denom = total + delta * static_cast<double>(vocab_);
    std::vector<double> out(vocab_, std::log(delta / denom));
    if (bucket)
        for (const auto& [token, count] : bucket->counts)
            out[static_cast<std::size_t>(token)] = std::log((static_cast<double>(count) + delta) / denom);
    return out;
}

bool NGramModel::operator==(const NGramModel& other) const {
    if (order_ != other.order_ || delta_ != other.delta_ || vocab_ != other.vocab_)
        return false;
    for (std::size_t len = 0; len < tables_.size(); ++len) {
        if (tables_[len].size() != other.tables_[len].size())
            return false;
        for (const auto& [key, bucket] : tables_[len]) {
            const auto it = other.tables_[len].find(key);
            if (it == other.tables_[len].end() || it->second.total != bucket.total ||
                it->second.counts.size() != bucket.counts.size())
                return false;
            for (const auto& [token, count] : bucket.counts) {
                const auto jt = it->second.counts.find(token);
                if (jt == it->second.counts.end() || jt->second != count)
                    return false;
            }
        }
    }
    return true;
}

NGramModel train_ngram(const std::vector<TokenStream>& corpus, std::int32_t order, float delta,
                       std::size_t vocab_size) {
    if (corpus.empty())
        throw DataError("training corpus is empty");
    NGramModel model(order, delta, vocab_size);
    for (const TokenStream& stream : corpus)
        model.observe(stream);
    return model;
}

void save_ngram(const NGramModel& model, const std::string& path) {
    auto out = open_output(path);
    write_magic(out, kNGramMagic);
    write_u32(out, static_cast<std::uint32_t>(model.order_));
    write_u32(out, static_cast<std::uint32_t>(model.vocab_));
    std::uint32_t delta_bits;
    std::memcpy(&delta_bits, &model.delta_, 4);
    write_u32(out, delta_bits);
    for (std::size_t len = 0; len < model.tables_.size(); ++len) {
        // (context..., token, count) records sorted lexicographically so the
        // bytes never depend on map iteration order.
        std::vector<std::vector<std::uint32_t>> records;
        for (const auto& [key, bucket] : model.tables_[len]) {
            for (const auto& [token, count] : bucket.counts) {
                std::vector<std::uint32_t> rec(len + 2);
                for (std::size_t i = 0; i < len; ++i) {
                    TokenId t;
                    std::memcpy(&t, key.data() + i * sizeof(TokenId), sizeof(TokenId));
                    rec[i] = static_cast<std::uint32_t>(t);
                }
                rec[len] = static_cast<std::uint32_t>(token);
                rec[len + 1] = count;
                records.push_back(std::move(rec));
            }
        }
        std::sort(records.begin(), records.end());
        write_u32(out, static_cast<std::uint32_t>(records.size()));
        for (const auto& rec : records)
            for (std::uint32_t v : rec)
                write_u32(out, v);
    }
    if (!out)
        throw IoError("failed writing " + path);
}

NGramModel load_ngram(const std::string& path) {
    auto in = open_input(path);
    expect_magic(in, kNGramMagic, path);
    const auto order = static_cast<std::int32_t>(read_u32(in, path + " (order)"));
    const auto vocab = static_cast<std::size_t>(read_u32(in, path + " (vocab)"));
    const std::uint32_t delta_bits = read_u32(in, path + " (delta)");
    float delta;
    std::memcpy(&delta, &delta_bits, 4);
    NGramModel model(order, delta, vocab);
    for (std::int32_t len = 0; len < order; ++len) {
        const std::uint32_t n_records = read_u32(in, path + " (record count)");
        auto& table = model.tables_[static_cast<std::size_t>(len)];
        std::vector<TokenId> ctx(static_cast<std::size_t>(len));
        for (std::uint32_t r = 0; r < n_records; ++r) {
            for (std::int32_t i = 0; i < len; ++i)
                ctx[static_cast<std::size_t>(i)] =
                    static_cast<TokenId>(read_u32(in, path + " (context)"));
            const auto token = static_cast<TokenId>(read_u32(in, path + " (token)"));
            const std::uint32_t count = read_u32(in, path + " (count)");
            auto& bucket = table[NGramModel::context_key(ctx)];
            bucket.counts[token] += count;
            bucket.total += count;
        }
    }
    return model;
}

} // namespace cm3
