#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cm3/embedder.hpp"
#include "cm3/types.hpp"

namespace cm3 {

// Dense multimodal document embedding: the average of the caption and image
// embeddings, renormalized. A document with an empty caption embeds as its
// image alone.
std::vector<float> embed_document(const Document& doc, const Embedder& embedder);

struct MemoryBank {
    std::vector<Document> docs;
    std::vector<float> embeddings; // docs.size() rows of `dim` floats
    std::size_t dim = 0;
    std::uint32_t embedder_seed = 0;

    std::span<const float> row(std::size_t i) const {
        return {embeddings.data() + i * dim, dim};
    }
};

MemoryBank build_memory_bank(const std::vector<Document>& docs, const HashedEmbedder& embedder,
                             int threads = 0);

void save_memory_bank(const MemoryBank& bank, const std::string& path);
MemoryBank load_memory_bank(const std::string& path);

} // namespace cm3
