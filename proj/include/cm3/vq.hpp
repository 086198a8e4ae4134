#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cm3/pgm.hpp"
#include "cm3/types.hpp"

namespace cm3 {

// K-means codebook over flattened patch_size x patch_size patches with
// values in [0, 1].
struct Codebook {
    std::int32_t k = 0;
    std::int32_t patch_size = 0;
    std::uint32_t seed = 0;
    std::vector<float> centroids; // k rows of patch_size^2 floats

    std::size_t patch_dim() const { return static_cast<std::size_t>(patch_size) * patch_size; }
};

struct FitStats {
    std::vector<double> iteration_mse; // nearest-centroid MSE at each assignment step
    std::int32_t reseeded = 0;         // empty clusters replaced during fitting
};

// Non-overlapping patches in row-major grid order, each flattened row-major
// and scaled to [0, 1]. Image sides must be divisible by patch_size.
std::vector<float> extract_patches(const GrayImage& img, std::int32_t patch_size);

// Lloyd iterations over the pooled patches of all images, seeded with
// k-means++. An empty cluster is reseeded to the patch farthest from its
// assigned centroid. The per-iteration MSE sequence is non-increasing.
Codebook fit_codebook(const std::vector<GrayImage>& images, std::int32_t k, std::int32_t patch_size,
                      std::int32_t iters, std::uint32_t seed, FitStats* stats = nullptr,
                      int threads = 0);

// Row-major grid of nearest-centroid indices in [0, k).
std::vector<TokenId> encode_image(const GrayImage& img, const Codebook& cb, int threads = 0);

// Inverse of encode_image for a grid_rows x grid_cols token grid.
GrayImage decode_tokens(const std::vector<TokenId>& tokens, const Codebook& cb, std::size_t grid_rows,
                        std::size_t grid_cols);

// Mean squared distance from each patch of each image to its nearest
// centroid.
double quantization_error(const std::vector<GrayImage>& images, const Codebook& cb, int threads = 0);

void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

} // namespace cm3
