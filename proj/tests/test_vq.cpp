#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cm3/error.hpp"
#include "cm3/pgm.hpp"
#include "cm3/rng.hpp"
#include "cm3/vq.hpp"

using namespace cm3;

namespace {

GrayImage make_image(std::size_t w, std::size_t h, const std::vector<std::uint8_t>& px) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels = px;
    return img;
}

GrayImage random_image(Rng& rng, std::size_t w, std::size_t h) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(w * h);
    for (auto& p : img.pixels)
        p = static_cast<std::uint8_t>(bounded(rng, 256));
    return img;
}

// Optimal 2-cluster MSE by scanning every assignment of patches to two
// means. Only feasible for a handful of patches.
double brute_force_two_cluster_mse(const std::vector<float>& patches, std::size_t n, std::size_t dim) {
    double best = 1e300;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<double> mean0(dim), mean1(dim);
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool in1 = (mask >> i) & 1u;
            (in1 ? n1 : n0)++;
            for (std::size_t d = 0; d < dim; ++d)
                (in1 ? mean1 : mean0)[d] += patches[i * dim + d];
        }
        if (n0 == 0 || n1 == 0)
            continue;
        for (std::size_t d = 0; d < dim; ++d) {
            mean0[d] /= double(n0);
            mean1[d] /= double(n1);
        }
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& mean = ((mask >> i) & 1u) ? mean1 : mean0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = double(patches[i * dim + d]) - mean[d];
                sse += diff * diff;
            }
        }
        best = std::min(best, sse / double(n * dim));
    }
    return best;
}

std::string temp_path(const char* name) {
    return std::string("/tmp/cm3_vq_test_") + name;
}

} // namespace

TEST_CASE("patches come out in row-major grid order, scaled to the unit interval") {
    // 4x2 image, patch size 2: two patches side by side.
    const GrayImage img = make_image(4, 2, {0, 51, 102, 153, 204, 255, 10, 20});
    const auto patches = extract_patches(img, 2);
    REQUIRE(patches.size() == 8);
    // First patch is the left 2x2 block, flattened row-major.
    CHECK(patches[0] == doctest::Approx(0.0f));
    CHECK(patches[1] == doctest::Approx(51.0f / 255.0f));
    CHECK(patches[2] == doctest::Approx(204.0f / 255.0f));
    CHECK(patches[3] == doctest::Approx(255.0f / 255.0f));
    CHECK(patches[4] == doctest::Approx(102.0f / 255.0f));
    CHECK(patches[7] == doctest::Approx(20.0f / 255.0f));

    CHECK_THROWS_AS(extract_patches(make_image(3, 2, std::vector<std::uint8_t>(6)), 2), ShapeError);
    CHECK_THROWS_AS(extract_patches(img, 0), ConfigError);
}

TEST_CASE("a single cluster over identical patches is an exact fixed point") {
    const GrayImage img = make_image(2, 2, {80, 80, 80, 80});
    FitStats stats;
    const Codebook cb = fit_codebook({img, img}, 1, 1, 5, 3, &stats);
    REQUIRE(cb.centroids.size() == 1);
    CHECK(cb.centroids[0] == doctest::Approx(80.0f / 255.0f));
    for (const double mse : stats.iteration_mse)
        CHECK(mse == doctest::Approx(0.0));
}

TEST_CASE("two well-separated values recover the brute-force optimum") {
    // Patch values {0, 0, 10, 10}: the optimal 2-clustering is {0,0} | {10,10}
    // with zero error, confirmed by exhaustive scan rather than by assumption.
    const GrayImage img = make_image(2, 2, {0, 0, 10, 10});
    const auto patches = extract_patches(img, 1);
    const double oracle = brute_force_two_cluster_mse(patches, 4, 1);
    CHECK(oracle == doctest::Approx(0.0));

    FitStats stats;
    const Codebook cb = fit_codebook({img}, 2, 1, 8, 5, &stats);
    REQUIRE(!stats.iteration_mse.empty());
    CHECK(stats.iteration_mse.back() == doctest::Approx(oracle).epsilon(1e-9));
    std::vector<float> c = cb.centroids;
    std::sort(c.begin(), c.end());
    CHECK(c[0] == doctest::Approx(0.0f));
    CHECK(c[1] == doctest::Approx(10.0f / 255.0f));
}

TEST_CASE("duplicate-only data forces a reseed instead of an error") {
    const GrayImage img = make_image(2, 2, {5, 5, 5, 5});
    FitStats stats;
    const Codebook cb = fit_codebook({img}, 2, 1, 4, 9, &stats);
    CHECK(stats.reseeded >= 1);
    CHECK(cb.centroids.size() == 2);
    CHECK(stats.iteration_mse.back() == doctest::Approx(0.0));
}

TEST_CASE("asking for more clusters than patches is rejected") {
    const GrayImage img = make_image(2, 2, {1, 2, 3, 4});
    CHECK_THROWS_AS(fit_codebook({img}, 5, 1, 3, 1), DataError);
    CHECK_THROWS_AS(fit_codebook({img}, 0, 1, 3, 1), ConfigError);
    CHECK_THROWS_AS(fit_codebook({img}, 2, 1, 0, 1), ConfigError);
}

TEST_CASE("per-iteration quantization error never increases") {
    Rng rng(21);
    for (int round = 0; round < 20; ++round) {
        std::vector<GrayImage> images;
        const std::size_t n_images = 1 + bounded(rng, 3);
        for (std::size_t i = 0; i < n_images; ++i)
            images.push_back(random_image(rng, 16, 16));
        const std::int32_t k = static_cast<std::int32_t>(1 + bounded(rng, 12));
        FitStats stats;
        fit_codebook(images, k, 4, 6, static_cast<std::uint32_t>(rng()), &stats);
        REQUIRE(stats.iteration_mse.size() == 6);
        for (std::size_t i = 1; i < stats.iteration_mse.size(); ++i)
            CHECK(stats.iteration_mse[i] <= stats.iteration_mse[i - 1] + 1e-12);
    }
}

TEST_CASE("encoding matches a brute-force nearest-centroid scan") {
    Rng rng(22);
    const GrayImage img = random_image(rng, 24, 16);
    const Codebook cb = fit_codebook({img}, 7, 4, 5, 13);
    const auto tokens = encode_image(img, cb);
    REQUIRE(tokens.size() == (24 / 4) * (16 / 4));

    const auto patches = extract_patches(img, 4);
    const std::size_t dim = cb.patch_dim();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        double best = 1e300;
        TokenId best_idx = 0;
        for (std::int32_t c = 0; c < cb.k; ++c) {
            double d2 = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff =
                    double(patches[i * dim + d]) - double(cb.centroids[std::size_t(c) * dim + d]);
                d2 += diff * diff;
            }
            if (d2 < best) {
                best = d2;
                best_idx = static_cast<TokenId>(c);
            }
        }
        CHECK(tokens[i] == best_idx);
    }
}

TEST_CASE("token grid sizes follow the image and patch geometry") {
    Rng rng(23);
    const GrayImage small = random_image(rng, 32, 32);
    const Codebook cb = fit_codebook({small}, 8, 8, 4, 17);
    CHECK(encode_image(small, cb).size() == 16);

    const GrayImage big = random_image(rng, 256, 256);
    CHECK(encode_image(big, cb).size() == 1024);
}

TEST_CASE("decoding paints each patch with its centroid") {
    Rng rng(24);
    const GrayImage img = random_image(rng, 16, 8);
    const Codebook cb = fit_codebook({img}, 4, 4, 5, 19);
    const auto tokens = encode_image(img, cb);
    const GrayImage back = decode_tokens(tokens, cb, 2, 4);
    REQUIRE(back.width == 16);
    REQUIRE(back.height == 8);

    // Re-encoding the reconstruction reproduces the token grid: every patch
    // now sits exactly on a centroid.
    CHECK(encode_image(back, cb) == tokens);

    CHECK_THROWS_AS(decode_tokens(tokens, cb, 3, 4), ShapeError);
    auto bad = tokens;
    bad[0] = static_cast<TokenId>(cb.k);
    CHECK_THROWS_AS(decode_tokens(bad, cb, 2, 4), DataError);
}

TEST_CASE("fitting is deterministic for a fixed seed") {
    Rng rng(25);
    const GrayImage img = random_image(rng, 32, 32);
    const Codebook a = fit_codebook({img}, 6, 8, 6, 42);
    const Codebook b = fit_codebook({img}, 6, 8, 6, 42, nullptr, 2);
    CHECK(a.centroids == b.centroids);
    const Codebook c = fit_codebook({img}, 6, 8, 6, 43);
    CHECK(a.centroids != c.centroids);
}

TEST_CASE("codebooks round-trip through their binary file format") {
    Rng rng(26);
    const GrayImage img = random_image(rng, 16, 16);
    const Codebook cb = fit_codebook({img}, 5, 4, 4, 31);
    const std::string path = temp_path("codebook.bin");
    save_codebook(cb, path);
    const Codebook back = load_codebook(path);
    CHECK(back.k == cb.k);
    CHECK(back.patch_size == cb.patch_size);
    CHECK(back.seed == cb.seed);
    CHECK(back.centroids == cb.centroids);

    std::ofstream bad(temp_path("codebook_bad.bin"), std::ios::binary);
    bad << "NOTCB0";
    bad.close();
    CHECK_THROWS_AS(load_codebook(temp_path("codebook_bad.bin")), IoError);
    CHECK_THROWS_AS(load_codebook(temp_path("codebook_missing.bin")), IoError);
    std::remove(path.c_str());
    std::remove(temp_path("codebook_bad.bin").c_str());
}

TEST_CASE("quantization error averages patch distances and rejects empty input") {
    const GrayImage img = make_image(2, 2, {0, 0, 10, 10});
    const Codebook cb = fit_codebook({img}, 2, 1, 8, 5);
    CHECK(quantization_error({img}, cb) == doctest::Approx(0.0));
    CHECK_THROWS_AS(quantization_error({}, cb), DataError);
}

TEST_CASE("binary PGM files round-trip and malformed headers are rejected") {
    Rng rng(27);
    const GrayImage img = random_image(rng, 9, 7);
    const std::string path = temp_path("img.pgm");
    write_pgm(img, path);
    const GrayImage back = read_pgm(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pixels == img.pixels);

    // Comments between header fields are part of the format.
    {
        std::ofstream f(temp_path("comment.pgm"), std::ios::binary);
        f << "P5\n# a comment\n2 1\n# another\n255\n";
        f.put(7);
        f.put(9);
    }
    const GrayImage commented = read_pgm(temp_path("comment.pgm"));
    CHECK(commented.width == 2);
    CHECK(commented.height == 1);
    CHECK(commented.pixels == std::vector<std::uint8_t>{7, 9});

    {
        std::ofstream f(temp_path("ascii.pgm"), std::ios::binary);
        f << "P2\n2 1\n255\n7 9\n";
    }
    CHECK_THROWS_AS(read_pgm(temp_path("ascii.pgm")), IoError);

    {
        std::ofstream f(temp_path("deep.pgm"), std::ios::binary);
        f << "P5\n2 1\n65535\n";
        f.write("\0\7\0\11", 4);
    }
    CHECK_THROWS_AS(read_pgm(temp_path("deep.pgm")), IoError);

    {
        std::ofstream f(temp_path("short.pgm"), std::ios::binary);
        f << "P5\n4 4\n255\n";
        f.put(1);
    }
    CHECK_THROWS_AS(read_pgm(temp_path("short.pgm")), IoError);

    for (const char* name : {"img.pgm", "comment.pgm", "ascii.pgm", "deep.pgm", "short.pgm"})
        std::remove(temp_path(name).c_str());
}
