#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cm3/embedder.hpp"
#include "cm3/memory_bank.hpp"
#include "cm3/rng.hpp"
#include "cm3/types.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

enum class QueryModality { Text, Image };

struct RetrievalHit {
    std::size_t index = 0; // row in the bank
    std::string id;
    float score = 0.0f; // inner product with the query
    QueryModality modality = QueryModality::Text;
};

// Exact max-inner-product scan over the bank, top k by score with ties broken
// by ascending document id. k is clamped to the bank size.
std::vector<RetrievalHit> mips_search(const MemoryBank& bank, std::span<const float> query, std::size_t k,
                                      int threads = 0);

// Drops hits that are too close to the query (score > max_relevance), then
// walks the rest in order and drops any hit whose embedding similarity to an
// already-kept hit exceeds dedup_threshold.
std::vector<RetrievalHit> filter_candidates(std::vector<RetrievalHit> hits, const MemoryBank& bank,
                                            float max_relevance = 0.9f, float dedup_threshold = 0.9f);

// Removes exactly floor(rate * size) tokens, chosen uniformly without
// replacement; the survivors keep their order. rate must lie in [0, 1).
TokenStream query_dropout(const TokenStream& tokens, double rate, Rng& rng);

struct RetrieveOptions {
    std::size_t k_per_modality = 8;
    bool query_dropout = true; // training only; inference retrieves verbatim
    double dropout_rate = 0.2;
    float max_relevance = 0.9f;
    float dedup_threshold = 0.9f;
};

// Filtered candidates for both queries of a document: one from the caption,
// one from the image tokens. The document's own id never appears.
struct ModalHits {
    std::vector<RetrievalHit> text;
    std::vector<RetrievalHit> image;
};

ModalHits retrieve_for_query(const MemoryBank& bank, const Document& query, const Embedder& embedder,
                             const RetrieveOptions& opts, Rng& rng, int threads = 0);

// Union of the two hit lists, deduplicated by document id (the higher score
// wins), ordered by descending score with ties broken by ascending id.
std::vector<RetrievalHit> merge_hits(std::span<const RetrievalHit> text, std::span<const RetrievalHit> image);

// Up to `count` hits drawn uniformly without replacement, returned in pool
// order. Training contexts use three.
std::vector<RetrievalHit> sample_training_retrievals(std::span<const RetrievalHit> pool, Rng& rng,
                                                     std::size_t count = 3);

// Top hit of each modality after filtering, merged. Inference contexts use
// these, at most two documents.
std::vector<RetrievalHit> inference_retrievals(const ModalHits& hits);

// Serialized retrieved documents in pool order followed by the serialized
// query. Retrieved documents are dropped from the front until the context
// fits seq_len; the query alone must fit.
TokenStream build_training_context(const std::vector<Document>& retrieved, const Document& query,
                                   std::size_t seq_len, const VocabLayout& vocab);

} // namespace cm3
