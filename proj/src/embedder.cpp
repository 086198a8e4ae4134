#include "cm3/embedder.hpp"

#include <cmath>

#include "cm3/error.hpp"
#include "cm3/rng.hpp"

namespace cm3 {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void normalize(std::vector<float>& v) {
    double norm_sq = 0.0;
    for (float x : v)
        norm_sq += static_cast<double>(x) * x;
    if (norm_sq < 1e-24) {
        for (float& x : v)
            x = 0.0f;
        return;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (float& x : v)
        x = static_cast<float>(x * inv);
}

} // namespace

HashedEmbedder::HashedEmbedder(std::size_t dim, std::uint32_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0)
        throw ConfigError("embedding dimension must be positive");
}

std::vector<float> HashedEmbedder::token_vector(TokenId token) const {
    std::uint64_t state = derive_seed(seed_, static_cast<std::uint64_t>(static_cast<std::int64_t>(token)));
    std::vector<float> v(dim_);
    for (std::size_t i = 0; i < dim_; i += 2) {
        const double u1 = 1.0 - static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        const double u2 = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        v[i] = static_cast<float>(r * std::cos(kTwoPi * u2));
        if (i + 1 < dim_)
            v[i + 1] = static_cast<float>(r * std::sin(kTwoPi * u2));
    }
    normalize(v);
    return v;
}

std::vector<float> HashedEmbedder::embed_tokens(std::span<const TokenId> tokens) const {
    std::vector<float> acc(dim_, 0.0f);
    if (tokens.empty())
        return acc;
    std::vector<double> sum(dim_, 0.0);
    for (TokenId t : tokens) {
        const auto v = token_vector(t);
        for (std::size_t i = 0; i < dim_; ++i)
            sum[i] += v[i];
    }
    for (std::size_t i = 0; i < dim_; ++i)
        acc[i] = static_cast<float>(sum[i]);
    normalize(acc);
    return acc;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw ShapeError("cosine: vector lengths differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na < 1e-24 || nb < 1e-24)
        return 0.0;
    return dot / std::sqrt(na * nb);
}

} // namespace cm3
