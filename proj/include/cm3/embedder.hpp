#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cm3/types.hpp"

namespace cm3 {

// Maps token sequences to fixed-dimension vectors for retrieval and
// re-ranking. Implementations are stateless and thread-safe.
class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    // Unit vector for a non-empty sequence, the zero vector for an empty one.
    virtual std::vector<float> embed_tokens(std::span<const TokenId> tokens) const = 0;
};

// Deterministic hash-based embedder: each token id gets a fixed random unit
// vector derived from (seed, id), and a sequence embeds as the normalized sum
// of its token vectors.
class HashedEmbedder final : public Embedder {
  public:
    HashedEmbedder(std::size_t dim, std::uint32_t seed);
    std::size_t dim() const override { return dim_; }
    std::uint32_t seed() const { return seed_; }
    std::vector<float> embed_tokens(std::span<const TokenId> tokens) const override;
    std::vector<float> token_vector(TokenId token) const;

  private:
    std::size_t dim_;
    std::uint32_t seed_;
};

// Zero when either vector has no mass.
double cosine(std::span<const float> a, std::span<const float> b);

} // namespace cm3
