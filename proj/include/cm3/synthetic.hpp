#pragma once

#include <cstdint>
#include <vector>

#include "cm3/rng.hpp"
#include "cm3/types.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

// Caption-classed corpus: each class has a fixed caption and a canonical
// image-token pattern; documents are noisy copies of their class pattern.
struct SyntheticSpec {
    std::uint32_t seed = 7;
    std::int32_t n_patterns = 16;
    double noise_rate = 0.1;
    std::int32_t n_docs = 2000;
    std::int32_t caption_len = 3;
    std::int32_t tokens_per_image = 16;
};

void validate_spec(const SyntheticSpec& spec);

struct PatternBook {
    std::vector<TokenStream> captions; // one per class, pairwise distinct
    std::vector<TokenStream> patterns; // canonical image tokens, pairwise distinct
};

PatternBook make_pattern_book(const SyntheticSpec& spec, const VocabLayout& vocab);

// Document d draws a class, copies its caption, and copies its pattern with
// each token independently replaced by a random image token at noise_rate.
// classes (when given) receives the class of each document.
std::vector<Document> generate_synthetic_corpus(const SyntheticSpec& spec, const VocabLayout& vocab,
                                                std::vector<std::int32_t>* classes = nullptr);

} // namespace cm3
