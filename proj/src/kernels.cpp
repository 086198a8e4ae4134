#include "cm3/kernels.hpp"

#include <cstdlib>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cm3/error.hpp"

namespace cm3 {

int resolve_threads(int requested) {
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("CM3_PIPELINE_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace {

float dot(const float* a, const float* b, std::size_t dim) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < dim; ++i)
        acc += a[i] * b[i];
    return acc;
}

std::uint32_t nearest(const float* p, const float* centroids, std::size_t n_centroids, std::size_t dim) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_idx = 0;
    for (std::size_t c = 0; c < n_centroids; ++c) {
        const float* cent = centroids + c * dim;
        double d = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double diff = static_cast<double>(p[i]) - static_cast<double>(cent[i]);
            d += diff * diff;
        }
        if (d < best) {
            best = d;
            best_idx = static_cast<std::uint32_t>(c);
        }
    }
    return best_idx;
}

void check_product_shapes(std::size_t rows_size, std::size_t n, std::size_t dim, std::size_t query_size,
                          std::size_t out_size) {
    if (dim == 0)
        throw ShapeError("embedding dimension must be positive");
    if (rows_size != n * dim)
        throw ShapeError("row matrix size does not match n*dim");
    if (query_size != dim)
        throw ShapeError("query length does not match dim");
    if (out_size != n)
        throw ShapeError("output length does not match row count");
}

void check_assign_shapes(std::size_t points_size, std::size_t n_points, std::size_t centroids_size,
                         std::size_t n_centroids, std::size_t dim, std::size_t out_size) {
    if (dim == 0)
        throw ShapeError("patch dimension must be positive");
    if (points_size != n_points * dim)
        throw ShapeError("point matrix size does not match n*dim");
    if (n_centroids == 0 || centroids_size != n_centroids * dim)
        throw ShapeError("centroid matrix size does not match k*dim");
    if (out_size != n_points)
        throw ShapeError("assignment length does not match point count");
}

} // namespace

void inner_products_serial(std::span<const float> rows, std::size_t n, std::size_t dim,
                           std::span<const float> query, std::span<float> out) {
    check_product_shapes(rows.size(), n, dim, query.size(), out.size());
    for (std::size_t i = 0; i < n; ++i)
        out[i] = dot(rows.data() + i * dim, query.data(), dim);
}

void inner_products(std::span<const float> rows, std::size_t n, std::size_t dim,
                    std::span<const float> query, std::span<float> out, int threads) {
    check_product_shapes(rows.size(), n, dim, query.size(), out.size());
    const int nt = resolve_threads(threads);
    (void)nt;
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(static)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
        out[static_cast<std::size_t>(i)] = dot(rows.data() + static_cast<std::size_t>(i) * dim, query.data(), dim);
}

void nearest_centroids_serial(std::span<const float> points, std::size_t n_points,
                              std::span<const float> centroids, std::size_t n_centroids, std::size_t dim,
                              std::span<std::uint32_t> assignments) {
    check_assign_shapes(points.size(), n_points, centroids.size(), n_centroids, dim, assignments.size());
    for (std::size_t i = 0; i < n_points; ++i)
        assignments[i] = nearest(points.data() + i * dim, centroids.data(), n_centroids, dim);
}

void nearest_centroids(std::span<const float> points, std::size_t n_points,
                       std::span<const float> centroids, std::size_t n_centroids, std::size_t dim,
                       std::span<std::uint32_t> assignments, int threads) {
    check_assign_shapes(points.size(), n_points, centroids.size(), n_centroids, dim, assignments.size());
    const int nt = resolve_threads(threads);
    (void)nt;
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(static)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n_points); ++i)
        assignments[static_cast<std::size_t>(i)] =
            nearest(points.data() + static_cast<std::size_t>(i) * dim, centroids.data(), n_centroids, dim);
}

} // namespace cm3
