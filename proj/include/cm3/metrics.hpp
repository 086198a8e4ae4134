#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cm3/decode.hpp"
#include "cm3/embedder.hpp"
#include "cm3/types.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

// exp of the mean negative ln-probability over all scored positions; <pad>
// targets carry zero weight. Logits are normalized per position, so any
// LogitSource scores comparably.
double perplexity(const LogitSource& model, const std::vector<TokenStream>& heldout,
                  const VocabLayout& vocab);

// Pattern accuracy stands in for FID and similarity for the CLIP re-ranking
// score; neither is comparable to the published numbers.
struct FidelityReport {
    double mean_accuracy = 0.0; // positional match rate against the canonical pattern
    double best_accuracy = 0.0; // best candidate in the pool
    double mean_similarity = 0.0; // caption-candidate embedding cosine
    double best_similarity = 0.0;
    std::size_t n_candidates = 0;
};

// Candidates must match the gold pattern's length.
FidelityReport conditional_fidelity(const std::vector<TokenStream>& candidates,
                                    std::span<const TokenId> gold_pattern,
                                    std::span<const TokenId> caption, const Embedder& embedder);

} // namespace cm3
