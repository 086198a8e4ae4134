#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cm3/types.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

struct StreamViolation {
    std::size_t pos;
    std::string message;
};

// [<eos>, caption..., <break>, image...]. The next document's <eos> acts as
// the terminator when streams are concatenated.
TokenStream serialize_document(const Document& doc, const VocabLayout& vocab);

// Throws if a caption token falls outside the text block, an image token
// falls outside the image block, or the image length differs from
// tokens_per_image.
void validate_document(const Document& doc, const VocabLayout& vocab, std::size_t tokens_per_image);

// Greedy in-order packing: streams are appended to the open sequence while
// they fit, otherwise a new sequence starts; every output is padded with
// <pad> to exactly seq_len. Concatenating the outputs and dropping pads
// recovers the inputs in order.
std::vector<TokenStream> pack_sequences(const std::vector<TokenStream>& streams, std::size_t seq_len,
                                        const VocabLayout& vocab);

// Structural checks on a serialized stream: ids in range, <break> alternates
// text and image segments, <eos> resets to text, <infill> follows a sentinel
// and opens the suffix (at most one per document, no <break> inside it), and
// <pad> only as trailing filler. Returns all violations, empty when clean.
std::vector<StreamViolation> validate_stream(const TokenStream& stream, const VocabLayout& vocab);

} // namespace cm3
