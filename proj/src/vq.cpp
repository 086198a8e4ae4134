#include "cm3/vq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cm3/error.hpp"
#include "cm3/io.hpp"
#include "cm3/kernels.hpp"
#include "cm3/rng.hpp"

namespace cm3 {

namespace {

constexpr std::string_view kCodebookMagic = "CM3VQ1";

double sq_dist(const float* a, const float* b, std::size_t dim) {
    double d = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        d += diff * diff;
    }
    return d;
}

struct PatchSet {
    std::vector<float> data;
    std::size_t count = 0;
    std::size_t dim = 0;
};

PatchSet pool_patches(const std::vector<GrayImage>& images, std::int32_t patch_size) {
    PatchSet set;
    set.dim = static_cast<std::size_t>(patch_size) * patch_size;
    for (const GrayImage& img : images) {
        auto patches = extract_patches(img, patch_size);
        set.count += patches.size() / set.dim;
        set.data.insert(set.data.end(), patches.begin(), patches.end());
    }
    return set;
}

// Squared distance from every patch to its nearest chosen centroid; the
// sampling distribution for k-means++.
void seed_plus_plus(const PatchSet& set, std::int32_t k, Rng& rng, std::vector<float>& centroids) {
    const std::size_t dim = set.dim;
    centroids.assign(static_cast<std::size_t>(k) * dim, 0.0f);
    const std::size_t first = bounded(rng, set.count);
    std::copy_n(set.data.data() + first * dim, dim, centroids.data());
    std::vector<double> d2(set.count);
    for (std::size_t i = 0; i < set.count; ++i)
        d2[i] = sq_dist(set.data.data() + i * dim, centroids.data(), dim);
    for (std::int32_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2)
            total += v;
        const std::size_t pick = total > 0.0 ? sample_weights(d2, rng) : bounded(rng, set.count);
        float* row = centroids.data() + static_cast<std::size_t>(c) * dim;
        std::copy_n(set.data.data() + pick * dim, dim, row);
        for (std::size_t i = 0; i < set.count; ++i)
            d2[i] = std::min(d2[i], sq_dist(set.data.data() + i * dim, row, dim));
    }
}

} // namespace

std::vector<float> extract_patches(const GrayImage& img, std::int32_t patch_size) {
    if (patch_size <= 0)
        throw ConfigError("patch size must be positive");
    const auto p = static_cast<std::size_t>(patch_size);
    if (img.width == 0 || img.height == 0 || img.width % p != 0 || img.height % p != 0)
        throw ShapeError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         " is not divisible into " + std::to_string(patch_size) + "x" +
                         std::to_string(patch_size) + " patches");
    const std::size_t grid_w = img.width / p;
    const std::size_t grid_h = img.height / p;
    std::vector<float> out;
    out.reserve(grid_w * grid_h * p * p);
    for (std::size_t gy = 0; gy < grid_h; ++gy)
        for (std::size_t gx = 0; gx < grid_w; ++gx)
            for (std::size_t y = 0; y < p; ++y)
                for (std::size_t x = 0; x < p; ++x)
                    out.push_back(static_cast<float>(img.pixels[(gy * p + y) * img.width + gx * p + x]) / 255.0f);
    return out;
}

Codebook fit_codebook(const std::vector<GrayImage>& images, std::int32_t k, std::int32_t patch_size,
                      std::int32_t iters, std::uint32_t seed, FitStats* stats, int threads) {
    if (k <= 0)
        throw ConfigError("codebook size must be positive");
    if (iters <= 0)
        throw ConfigError("iteration count must be positive");
    const PatchSet set = pool_patches(images, patch_size);
    if (set.count < static_cast<std::size_t>(k))
        throw DataError("only " + std::to_string(set.count) + " patches available for " +
                        std::to_string(k) + " clusters");
    const std::size_t dim = set.dim;

    Codebook cb;
    cb.k = k;
    cb.patch_size = patch_size;
    cb.seed = seed;
    Rng rng(seed);
    seed_plus_plus(set, k, rng, cb.centroids);
    if (stats) {
        stats->iteration_mse.clear();
        stats->reseeded = 0;
    }

    std::vector<std::uint32_t> assign(set.count);
    std::vector<double> sums(static_cast<std::size_t>(k) * dim);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k));
    for (std::int32_t it = 0; it < iters; ++it) {
        nearest_centroids(set.data, set.count, cb.centroids, static_cast<std::size_t>(k), dim, assign,
                          threads);
        if (stats) {
            double total = 0.0;
            for (std::size_t i = 0; i < set.count; ++i)
                total += sq_dist(set.data.data() + i * dim,
                                 cb.centroids.data() + static_cast<std::size_t>(assign[i]) * dim, dim);
            stats->iteration_mse.push_back(total / static_cast<double>(set.count));
        }

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < set.count; ++i) {
            double* row = sums.data() + static_cast<std::size_t>(assign[i]) * dim;
            const float* patch = set.data.data() + i * dim;
            for (std::size_t d = 0; d < dim; ++d)
                row[d] += patch[d];
            ++counts[assign[i]];
        }

        // Reseed empty clusters to the patches farthest from their assigned
        // centroids, one distinct patch per empty cluster.
        std::vector<std::size_t> empties;
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
            if (counts[c] == 0)
                empties.push_back(c);
        std::vector<std::size_t> taken;
        for (std::size_t e = 0; e < empties.size(); ++e) {
            double farthest = -1.0;
            std::size_t far_idx = 0;
            for (std::size_t i = 0; i < set.count; ++i) {
                if (std::find(taken.begin(), taken.end(), i) != taken.end())
                    continue;
                const double d = sq_dist(set.data.data() + i * dim,
                                         cb.centroids.data() + static_cast<std::size_t>(assign[i]) * dim, dim);
                if (d > farthest) {
                    farthest = d;
                    far_idx = i;
                }
            }
            taken.push_back(far_idx);
            std::copy_n(set.data.data() + far_idx * dim, dim,
                        cb.centroids.data() + empties[e] * dim);
            if (stats)
                ++stats->reseeded;
        }

        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
            if (counts[c] == 0)
                continue; // reseeded above
            float* row = cb.centroids.data() + c * dim;
            for (std::size_t d = 0; d < dim; ++d)
                row[d] = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
        }
    }
    return cb;
}

std::vector<TokenId> encode_image(const GrayImage& img, const Codebook& cb, int threads) {
    const auto patches = extract_patches(img, cb.patch_size);
    const std::size_t dim = cb.patch_dim();
    const std::size_t n = patches.size() / dim;
    std::vector<std::uint32_t> assign(n);
    nearest_centroids(patches, n, cb.centroids, static_cast<std::size_t>(cb.k), dim, assign, threads);
    std::vector<TokenId> tokens(n);
    for (std::size_t i = 0; i < n; ++i)
        tokens[i] = static_cast<TokenId>(assign[i]);
    return tokens;
}

GrayImage decode_tokens(const std::vector<TokenId>& tokens, const Codebook& cb, std::size_t grid_rows,
                        std::size_t grid_cols) {
    if (tokens.size() != grid_rows * grid_cols || grid_rows == 0 || grid_cols == 0)
        throw ShapeError("token count " + std::to_string(tokens.size()) + " does not match a " +
                         std::to_string(grid_rows) + "x" + std::to_string(grid_cols) + " grid");
    const auto p = static_cast<std::size_t>(cb.patch_size);
    GrayImage img;
    img.width = grid_cols * p;
    img.height = grid_rows * p;
    img.pixels.assign(img.width * img.height, 0);
    for (std::size_t gy = 0; gy < grid_rows; ++gy) {
        for (std::size_t gx = 0; gx < grid_cols; ++gx) {
            const TokenId t = tokens[gy * grid_cols + gx];
            if (t < 0 || t >= cb.k)
                throw DataError("token " + std::to_string(t) + " outside the codebook range");
            const float* patch = cb.centroids.data() + static_cast<std::size_t>(t) * cb.patch_dim();
            for (std::size_t y = 0; y < p; ++y)
                for (std::size_t x = 0; x < p; ++x) {
                    const float v = std::clamp(patch[y * p + x], 0.0f, 1.0f);
                    img.pixels[(gy * p + y) * img.width + gx * p + x] =
                        static_cast<std::uint8_t>(std::lround(v * 255.0f));
                }
        }
    }
    return img;
}

double quantization_error(const std::vector<GrayImage>& images, const Codebook& cb, int threads) {
    const PatchSet set = pool_patches(images, cb.patch_size);
    if (set.count == 0)
        throw DataError("no patches to score");
    std::vector<std::uint32_t> assign(set.count);
    nearest_centroids(set.data, set.count, cb.centroids, static_cast<std::size_t>(cb.k), set.dim, assign,
                      threads);
    double total = 0.0;
    for (std::size_t i = 0; i < set.count; ++i)
        total += sq_dist(set.data.data() + i * set.dim,
                         cb.centroids.data() + static_cast<std::size_t>(assign[i]) * set.dim, set.dim);
    return total / static_cast<double>(set.count);
}

void save_codebook(const Codebook& cb, const std::string& path) {
    auto out = open_output(path);
    write_magic(out, kCodebookMagic);
    write_u32(out, static_cast<std::uint32_t>(cb.k));
    write_u32(out, static_cast<std::uint32_t>(cb.patch_size));
    write_u32(out, cb.seed);
    for (float v : cb.centroids)
        write_f32(out, v);
    if (!out)
        throw IoError("failed writing " + path);
}

Codebook load_codebook(const std::string& path) {
    auto in = open_input(path);
    expect_magic(in, kCodebookMagic, path);
    Codebook cb;
    cb.k = static_cast<std::int32_t>(read_u32(in, path + " (k)"));
    cb.patch_size = static_cast<std::int32_t>(read_u32(in, path + " (patch_size)"));
    cb.seed = read_u32(in, path + " (seed)");
    if (cb.k <= 0 || cb.patch_size <= 0)
        throw IoError("corrupt codebook header in " + path);
    cb.centroids.resize(static_cast<std::size_t>(cb.k) * cb.patch_dim());
    for (float& v : cb.centroids)
        v = read_f32(in, path + " (centroids)");
    return cb;
}

} // namespace cm3
