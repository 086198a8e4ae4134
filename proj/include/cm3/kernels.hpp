#pragma once

#include <cstdint>
#include <span>

namespace cm3 {

// Worker count: `requested` when positive, else the CM3_PIPELINE_THREADS
// environment variable, else the OpenMP default (1 in serial builds).
int resolve_threads(int requested);

// out[i] = <rows[i], query> for n rows of length dim. The parallel version
// splits across rows only; each dot product accumulates in the same order as
// the serial reference, so results match bit for bit at any thread count.
void inner_products(std::span<const float> rows, std::size_t n, std::size_t dim,
                    std::span<const float> query, std::span<float> out, int threads = 0);
void inner_products_serial(std::span<const float> rows, std::size_t n, std::size_t dim,
                           std::span<const float> query, std::span<float> out);

// assignments[i] = index of the centroid nearest to points[i] under squared
// euclidean distance, ties to the lowest index. Parallel across points.
void nearest_centroids(std::span<const float> points, std::size_t n_points,
                       std::span<const float> centroids, std::size_t n_centroids, std::size_t dim,
                       std::span<std::uint32_t> assignments, int threads = 0);
void nearest_centroids_serial(std::span<const float> points, std::size_t n_points,
                              std::span<const float> centroids, std::size_t n_centroids, std::size_t dim,
                              std::span<std::uint32_t> assignments);

} // namespace cm3
