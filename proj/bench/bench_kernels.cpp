// Compares the OpenMP kernels against their serial reference implementations
// and verifies that both produce identical bytes while timing them.
//
//   bench_kernels [n_rows] [dim] [repeats]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "cm3/kernels.hpp"
#include "cm3/rng.hpp"

using namespace cm3;

namespace {

double seconds_per_run(int repeats, const auto& fn) {
    fn(); // warm up
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r)
        fn();
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
    return elapsed.count() / repeats;
}

} // namespace

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
    const std::size_t dim = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 256;
    const int repeats = argc > 3 ? std::atoi(argv[3]) : 5;
    const int threads = resolve_threads(0);

    Rng rng(1);
    std::vector<float> rows(n * dim), query(dim);
    for (auto& x : rows)
        x = static_cast<float>(uniform01(rng) * 2.0 - 1.0);
    for (auto& x : query)
        x = static_cast<float>(uniform01(rng) * 2.0 - 1.0);

    std::printf("%zu rows x %zu dims, %d repeats, %d threads\n", n, dim, repeats, threads);

    std::vector<float> serial_out(n), parallel_out(n);
    const double ip_serial =
        seconds_per_run(repeats, [&] { inner_products_serial(rows, n, dim, query, serial_out); });
    const double ip_parallel =
        seconds_per_run(repeats, [&] { inner_products(rows, n, dim, query, parallel_out, threads); });
    if (serial_out != parallel_out) {
        std::printf("inner products: OUTPUT MISMATCH\n");
        return 1;
    }
    std::printf("inner products:    serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
                ip_serial * 1e3, ip_parallel * 1e3, ip_serial / ip_parallel);

    const std::size_t n_centroids = 64;
    std::vector<float> centroids(n_centroids * dim);
    for (auto& x : centroids)
        x = static_cast<float>(uniform01(rng) * 2.0 - 1.0);
    std::vector<std::uint32_t> serial_assign(n), parallel_assign(n);
    const double nc_serial = seconds_per_run(repeats, [&] {
        nearest_centroids_serial(rows, n, centroids, n_centroids, dim, serial_assign);
    });
    const double nc_parallel = seconds_per_run(repeats, [&] {
        nearest_centroids(rows, n, centroids, n_centroids, dim, parallel_assign, threads);
    });
    if (serial_assign != parallel_assign) {
        std::printf("nearest centroids: OUTPUT MISMATCH\n");
        return 1;
    }
    std::printf("nearest centroids: serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
                nc_serial * 1e3, nc_parallel * 1e3, nc_serial / nc_parallel);
    return 0;
}
