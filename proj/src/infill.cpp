#include "cm3/infill.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "cm3/error.hpp"

namespace cm3 {

namespace {

struct Span {
    std::size_t start;
    std::size_t len;
};

bool overlaps(const Span& a, const Span& b) {
    return a.start < b.start + b.len && b.start < a.start + a.len;
}

// Maximal runs of plain tokens: no specials, one modality per run.
std::vector<Span> maskable_runs(const TokenStream& stream, const VocabLayout& vocab) {
    std::vector<Span> runs;
    std::size_t i = 0;
    while (i < stream.size()) {
        if (vocab.is_special(stream[i]) || stream[i] < 0 || stream[i] >= vocab.total_size()) {
            ++i;
            continue;
        }
        const bool image = vocab.is_image(stream[i]);
        std::size_t j = i + 1;
        while (j < stream.size() && !vocab.is_special(stream[j]) && stream[j] < vocab.total_size() &&
               stream[j] >= 0 && vocab.is_image(stream[j]) == image)
            ++j;
        runs.push_back({i, j - i});
        i = j;
    }
    return runs;
}

void check_config(const InfillConfig& config, const VocabLayout& vocab) {
    if (config.span_len_min < 1 || config.span_len_min > config.span_len_max)
        throw ConfigError("span length range must satisfy 1 <= min <= max");
    if (config.max_spans < 1)
        throw ConfigError("max_spans must be at least 1");
    if (config.max_spans > vocab.n_masks)
        throw ConfigError("max_spans " + std::to_string(config.max_spans) + " exceeds the " +
                          std::to_string(vocab.n_masks) + " mask sentinels in the vocabulary");
    if (!(config.mask_prob >= 0.0 && config.mask_prob <= 1.0))
        throw ConfigError("mask_prob must lie in [0, 1]");
}

} // namespace

InfillInstance infill_transform(const TokenStream& stream, Rng& rng, const InfillConfig& config,
                                const VocabLayout& vocab) {
    check_config(config, vocab);
    if (uniform01(rng) >= config.mask_prob)
        return {stream, {}};

    const auto runs = maskable_runs(stream, vocab);
    const auto n_spans = static_cast<std::size_t>(
        1 + bounded(rng, static_cast<std::uint64_t>(config.max_spans)));

    // Span length drawn uniformly over the lengths that still have a valid
    // placement, then a start drawn uniformly over that length's placements.
    std::vector<Span> chosen;
    auto starts_for = [&](std::size_t len) {
        std::vector<std::size_t> starts;
        for (const Span& run : runs)
            for (std::size_t start = run.start; start + len <= run.start + run.len; ++start) {
                const Span cand{start, len};
                if (std::none_of(chosen.begin(), chosen.end(),
                                 [&](const Span& c) { return overlaps(cand, c); }))
                    starts.push_back(start);
            }
        return starts;
    };
    for (std::size_t s = 0; s < n_spans; ++s) {
        std::vector<std::size_t> feasible;
        for (auto len = static_cast<std::size_t>(config.span_len_min);
             len <= static_cast<std::size_t>(config.span_len_max); ++len)
            if (!starts_for(len).empty())
                feasible.push_back(len);
        if (feasible.empty())
            break;
        const std::size_t len = feasible[bounded(rng, feasible.size())];
        const auto starts = starts_for(len);
        chosen.push_back({starts[bounded(rng, starts.size())], len});
    }
    if (chosen.empty())
        return {stream, {}};
    std::sort(chosen.begin(), chosen.end(), [](const Span& a, const Span& b) { return a.start < b.start; });

    InfillInstance out;
    out.tokens.reserve(stream.size() + 1 + chosen.size());
    std::size_t pos = 0;
    for (std::size_t s = 0; s < chosen.size(); ++s) {
        const TokenId sentinel = vocab.mask(static_cast<std::int32_t>(s));
        out.tokens.insert(out.tokens.end(), stream.begin() + static_cast<std::ptrdiff_t>(pos),
                          stream.begin() + static_cast<std::ptrdiff_t>(chosen[s].start));
        out.tokens.push_back(sentinel);
        out.mask_records.push_back({sentinel, chosen[s].start, chosen[s].len});
        pos = chosen[s].start + chosen[s].len;
    }
    out.tokens.insert(out.tokens.end(), stream.begin() + static_cast<std::ptrdiff_t>(pos), stream.end());
    out.tokens.push_back(VocabLayout::kInfill);
    for (const MaskRecord& rec : out.mask_records) {
        out.tokens.push_back(rec.sentinel);
        out.tokens.insert(out.tokens.end(), stream.begin() + static_cast<std::ptrdiff_t>(rec.pos),
                          stream.begin() + static_cast<std::ptrdiff_t>(rec.pos + rec.len));
    }
    return out;
}

TokenStream invert_infill(const InfillInstance& instance, const VocabLayout& vocab) {
    const TokenStream& tokens = instance.tokens;
    const auto infill_it = std::find(tokens.begin(), tokens.end(), VocabLayout::kInfill);
    const auto body_len = static_cast<std::size_t>(infill_it - tokens.begin());

    std::map<TokenId, Span> spans; // sentinel -> span within `tokens`
    if (infill_it != tokens.end()) {
        std::size_t i = body_len + 1;
        if (i >= tokens.size() || !vocab.is_mask(tokens[i]))
            throw DataError("malformed infill: suffix does not start with a mask sentinel");
        while (i < tokens.size()) {
            const TokenId sentinel = tokens[i];
            std::size_t j = i + 1;
            while (j < tokens.size() && !vocab.is_special(tokens[j]))
                ++j;
            if (j < tokens.size() && !vocab.is_mask(tokens[j]))
                throw DataError("malformed infill: unexpected special token in the suffix");
            if (j == i + 1)
                throw DataError("malformed infill: empty span in the suffix");
            if (!spans.emplace(sentinel, Span{i + 1, j - i - 1}).second)
                throw DataError("malformed infill: sentinel repeated in the suffix");
            i = j;
        }
    }

    TokenStream out;
    out.reserve(tokens.size());
    std::vector<TokenId> used;
    for (std::size_t i = 0; i < body_len; ++i) {
        const TokenId t = tokens[i];
        if (!vocab.is_mask(t)) {
            out.push_back(t);
            continue;
        }
        if (std::find(used.begin(), used.end(), t) != used.end())
            throw DataError("malformed infill: sentinel appears twice in the body");
        const auto it = spans.find(t);
        if (it == spans.end())
            throw DataError("malformed infill: body sentinel missing from the suffix");
        used.push_back(t);
        out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(it->second.start),
                   tokens.begin() + static_cast<std::ptrdiff_t>(it->second.start + it->second.len));
    }
    if (used.size() != spans.size())
        throw DataError("malformed infill: suffix sentinel missing from the body");
    return out;
}

TokenStream caption_to_image_prompt(std::span<const TokenId> caption, const VocabLayout& vocab) {
    for (TokenId t : caption)
        if (!vocab.is_text(t))
            throw DataError("caption token " + std::to_string(t) + " outside the text block");
    TokenStream out;
    out.reserve(caption.size() + 2);
    out.push_back(VocabLayout::kEos);
    out.insert(out.end(), caption.begin(), caption.end());
    out.push_back(VocabLayout::kBreak);
    return out;
}

TokenStream image_to_caption_prompt(std::span<const TokenId> image_tokens, const VocabLayout& vocab) {
    if (image_tokens.empty())
        throw ShapeError("image token sequence is empty");
    for (TokenId t : image_tokens)
        if (!vocab.is_image(t))
            throw DataError("image token " + std::to_string(t) + " outside the image block");
    TokenStream out;
    out.reserve(image_tokens.size() + 4);
    out.push_back(VocabLayout::kEos);
    out.push_back(vocab.mask(0));
    out.push_back(VocabLayout::kBreak);
    out.insert(out.end(), image_tokens.begin(), image_tokens.end());
    out.push_back(VocabLayout::kInfill);
    out.push_back(vocab.mask(0));
    return out;
}

std::vector<float> loss_weights(const TokenStream& stream, const VocabLayout& vocab) {
    (void)vocab;
    std::vector<float> w(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i)
        w[i] = stream[i] == VocabLayout::kPad ? 0.0f : 1.0f;
    return w;
}

} // namespace cm3
