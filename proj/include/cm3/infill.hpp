#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cm3/rng.hpp"
#include "cm3/types.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

struct InfillConfig {
    std::int32_t max_spans = 1;
    std::int32_t span_len_min = 1;
    std::int32_t span_len_max = 4;
    double mask_prob = 0.5;
};

// Worst-case token growth of the transform: the <infill> marker plus one
// body sentinel and one suffix sentinel per span. Context builders subtract
// this from the sequence budget so transformed streams still pack.
inline std::size_t max_infill_growth(const InfillConfig& config) {
    return 1 + 2 * static_cast<std::size_t>(config.max_spans);
}

struct MaskRecord {
    TokenId sentinel;
    std::size_t pos; // span start in the original stream
    std::size_t len;
};

struct InfillInstance {
    TokenStream tokens;
    std::vector<MaskRecord> mask_records;
};

// Masked-span transform: with probability mask_prob, replaces up to max_spans
// non-overlapping spans with <mask_i> sentinels (numbered left to right) and
// appends <infill> followed by each sentinel and its span. Spans never cross
// a special token or a modality boundary. Otherwise returns the stream
// unchanged with no records.
InfillInstance infill_transform(const TokenStream& stream, Rng& rng, const InfillConfig& config,
                                const VocabLayout& vocab);

// Reconstructs the original stream by splicing suffix spans back over their
// sentinels. Self-describing: only instance.tokens is consulted.
TokenStream invert_infill(const InfillInstance& instance, const VocabLayout& vocab);

// [<eos>, caption..., <break>]; the continuation is the image.
TokenStream caption_to_image_prompt(std::span<const TokenId> caption, const VocabLayout& vocab);

// [<eos>, <mask_0>, <break>, image..., <infill>, <mask_0>]; the continuation
// fills in the caption.
TokenStream image_to_caption_prompt(std::span<const TokenId> image_tokens, const VocabLayout& vocab);

// 1.0 for each non-<pad> position, 0.0 for padding. Query and retrieved
// context positions carry the same weight.
std::vector<float> loss_weights(const TokenStream& stream, const VocabLayout& vocab);

} // namespace cm3
