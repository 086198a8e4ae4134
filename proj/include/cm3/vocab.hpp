#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "cm3/types.hpp"

namespace cm3 {

// Text-block ids reserved at the top of the block for spatial coordinate
// tokens (grounding in SFT templates).
inline constexpr std::int32_t kCoordBuckets = 100;

// Unified id space: special tokens at the bottom, then the text block, then
// the image block.
//
//   <pad>=0  <eos>=1  <break>=2  <infill>=3  <mask_i>=4+i
//   text  [4+n_masks, 4+n_masks+n_text)
//   image [4+n_masks+n_text, 4+n_masks+n_text+n_image)
struct VocabLayout {
    std::int32_t n_text = 0;
    std::int32_t n_image = 0;
    std::int32_t n_masks = 0;

    static constexpr TokenId kPad = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kBreak = 2;
    static constexpr TokenId kInfill = 3;
    static constexpr TokenId kFirstMask = 4;

    TokenId mask(std::int32_t i) const;

    std::int32_t n_specials() const { return kFirstMask + n_masks; }
    TokenId text_start() const { return n_specials(); }
    TokenId image_start() const { return text_start() + n_text; }
    TokenId total_size() const { return image_start() + n_image; }

    bool is_mask(TokenId t) const { return t >= kFirstMask && t < n_specials(); }
    bool is_special(TokenId t) const { return t >= 0 && t < n_specials(); }
    bool is_text(TokenId t) const { return t >= text_start() && t < image_start(); }
    bool is_image(TokenId t) const { return t >= image_start() && t < total_size(); }
};

// Validates the block sizes (all positive, n_masks >= 1) and lays out the id
// space.
VocabLayout build_vocab(std::int32_t n_text, std::int32_t n_image, std::int32_t n_masks);

// Deterministic word -> text-token map. The top `reserved` ids of the text
// block are kept out of the hash range for coordinate tokens.
TokenId word_token(const VocabLayout& vocab, std::string_view word, std::int32_t reserved = kCoordBuckets);

// Whitespace-split words mapped through word_token.
TokenStream tokenize_words(const VocabLayout& vocab, std::string_view text, std::int32_t reserved = kCoordBuckets);

// Coordinate token for a bucket index in [0, n_buckets).
TokenId coord_token(const VocabLayout& vocab, std::int32_t bucket, std::int32_t n_buckets = kCoordBuckets);

} // namespace cm3
