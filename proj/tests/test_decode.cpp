#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cm3/decode.hpp"
#include "cm3/embedder.hpp"
#include "cm3/error.hpp"
#include "cm3/fixture_model.hpp"
#include "cm3/rng.hpp"
#include "cm3/vocab.hpp"

using namespace cm3;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// specials 0..4, text [5,13), image [13,17)
const VocabLayout kVocab = build_vocab(8, 4, 1);

std::vector<double> favor(std::size_t vocab, std::size_t index, double value = 10.0) {
    std::vector<double> logits(vocab, 0.0);
    logits[index] = value;
    return logits;
}

} // namespace

TEST_CASE("guidance blends logits along the conditional direction") {
    const std::vector<double> cond{2.0, 0.0};
    const std::vector<double> uncond{1.0, 1.0};
    const auto blended = cfg_blend(cond, uncond, 3.0);
    REQUIRE(blended.size() == 2);
    CHECK(blended[0] == 4.0);  // 1 + 3*(2-1)
    CHECK(blended[1] == -2.0); // 1 + 3*(0-1)

    CHECK(cfg_blend(cond, uncond, 0.0) == uncond);
    CHECK(cfg_blend(cond, uncond, 1.0) == cond);

    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> c(5), u(5);
        for (int j = 0; j < 5; ++j) {
            c[j] = uniform01(rng) * 10 - 5;
            u[j] = uniform01(rng) * 10 - 5;
        }
        const double alpha = uniform01(rng) * 8;
        const auto out = cfg_blend(c, u, alpha);
        for (int j = 0; j < 5; ++j)
            CHECK(out[j] == doctest::Approx(u[j] + alpha * (c[j] - u[j])).epsilon(1e-12));
    }

    CHECK_THROWS_AS(cfg_blend(cond, std::vector<double>{1.0}, 2.0), ShapeError);
}

TEST_CASE("temperature scaling reshapes the softmax") {
    const std::vector<double> logits{std::log(2.0), 0.0};
    const auto p1 = temperature_probs(logits, 1.0);
    CHECK(p1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(p1[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    const auto p2 = temperature_probs(logits, 2.0);
    const double r = std::sqrt(2.0);
    CHECK(p2[0] == doctest::Approx(r / (1.0 + r)).epsilon(1e-14));
    CHECK(p2[1] == doctest::Approx(1.0 / (1.0 + r)).epsilon(1e-14));

    // Shift invariance and normalization.
    std::vector<double> shifted{logits[0] + 100.0, logits[1] + 100.0};
    const auto ps = temperature_probs(shifted, 1.0);
    CHECK(ps[0] == doctest::Approx(p1[0]).epsilon(1e-14));
    CHECK(ps[0] + ps[1] == doctest::Approx(1.0).epsilon(1e-14));

    const auto masked = temperature_probs(std::vector<double>{0.0, -kInf, 0.0}, 1.0);
    CHECK(masked[1] == 0.0);
    CHECK(masked[0] == doctest::Approx(0.5));

    CHECK_THROWS_AS(temperature_probs(logits, 0.0), ConfigError);
    CHECK_THROWS_AS(temperature_probs(std::vector<double>{-kInf, -kInf}, 1.0), DataError);
    CHECK_THROWS_AS(temperature_probs(std::vector<double>{}, 1.0), ShapeError);
}

TEST_CASE("nucleus filtering keeps the smallest prefix reaching the mass") {
    const std::vector<double> probs{0.5, 0.3, 0.15, 0.05};
    const auto p8 = top_p_filter(probs, 0.8);
    CHECK(p8[0] == doctest::Approx(0.625).epsilon(1e-14));
    CHECK(p8[1] == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(p8[2] == 0.0);
    CHECK(p8[3] == 0.0);

    const auto p1 = top_p_filter(probs, 0.1);
    CHECK(p1[0] == doctest::Approx(1.0));
    CHECK(p1[1] == 0.0);

    CHECK(top_p_filter(probs, 1.0) == probs);

    // Equal probabilities keep the lower id.
    const auto tie = top_p_filter(std::vector<double>{0.4, 0.3, 0.3}, 0.7);
    CHECK(tie[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
    CHECK(tie[1] == doctest::Approx(3.0 / 7.0).epsilon(1e-14));
    CHECK(tie[2] == 0.0);

    CHECK_THROWS_AS(top_p_filter(probs, 0.0), ConfigError);
    CHECK_THROWS_AS(top_p_filter(probs, 1.2), ConfigError);
}

TEST_CASE("contrastive scores follow the worked plausibility cutoffs") {
    const std::vector<double> p_exp{0.5, 0.3, 0.2};
    const std::vector<double> p_ama{0.25, 0.5, 0.25};

    const auto k1 = cd_scores(p_exp, p_ama, 0.5, 1); // tau = 0.5 * 0.5 = 0.25
    CHECK(k1[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(k1[1] == doctest::Approx(std::log(0.6)).epsilon(1e-12));
    CHECK(k1[2] == -kInf);

    const auto k2 = cd_scores(p_exp, p_ama, 0.5, 2); // tau = 0.5 * 0.3 = 0.15
    CHECK(k2[2] == doctest::Approx(std::log(0.8)).epsilon(1e-12));

    // The amateur is floored, never divided by zero.
    const auto floored = cd_scores(std::vector<double>{1.0}, std::vector<double>{0.0}, 1.0, 1);
    CHECK(floored[0] == doctest::Approx(std::log(1.0 / 1e-12)).epsilon(1e-12));

    CHECK_THROWS_AS(cd_scores(p_exp, std::vector<double>{0.1}, 0.5, 1), ShapeError);
    CHECK_THROWS_AS(cd_scores(p_exp, p_ama, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(cd_scores(p_exp, p_ama, 1.5, 1), ConfigError);
    CHECK_THROWS_AS(cd_scores(p_exp, p_ama, 0.5, 0), ConfigError);
    CHECK_THROWS_AS(cd_scores(p_exp, p_ama, 0.5, 4), ConfigError);
}

TEST_CASE("cutoffs match a full-sort oracle across random distributions") {
    Rng rng(13);
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = 2 + bounded(rng, 10);
        std::vector<double> p_exp(n), p_ama(n);
        double s1 = 0, s2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            p_exp[i] = uniform01(rng) + 1e-6;
            p_ama[i] = uniform01(rng) + 1e-6;
            s1 += p_exp[i];
            s2 += p_ama[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            p_exp[i] /= s1;
            p_ama[i] /= s2;
        }
        const double alpha = 0.05 + uniform01(rng) * 0.9;
        const auto k = static_cast<std::int32_t>(1 + bounded(rng, n));

        std::vector<double> sorted = p_exp;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        const double tau = alpha * sorted[static_cast<std::size_t>(k - 1)];

        const auto scores = cd_scores(p_exp, p_ama, alpha, k);
        for (std::size_t i = 0; i < n; ++i) {
            if (p_exp[i] >= tau)
                CHECK(scores[i] == doctest::Approx(std::log(p_exp[i] / p_ama[i])).epsilon(1e-12));
            else
                CHECK(scores[i] == -kInf);
        }
    }
}

TEST_CASE("the unconditional prompt collapses the caption to one sentinel") {
    const TokenId c1 = kVocab.text_start(), c2 = c1 + 1;
    const TokenId i1 = kVocab.image_start();
    const TokenStream prompt{VocabLayout::kEos, c1, c2, VocabLayout::kBreak, i1};
    CHECK(unconditional_prompt(prompt, kVocab) ==
          TokenStream{VocabLayout::kEos, kVocab.mask(0), VocabLayout::kBreak, i1});

    CHECK_THROWS_AS(unconditional_prompt({c1, VocabLayout::kBreak}, kVocab), DataError);
    CHECK_THROWS_AS(unconditional_prompt({VocabLayout::kEos, c1}, kVocab), DataError);
    CHECK_THROWS_AS(unconditional_prompt({}, kVocab), DataError);
}

TEST_CASE("decoding follows forced transitions and stops on eos") {
    FixtureModel model(17);
    const TokenId t = kVocab.text_start(); // 5
    const TokenId a = kVocab.image_start(), b = a + 1;
    model.set({VocabLayout::kBreak}, favor(17, std::size_t(a)));
    model.set({a}, favor(17, std::size_t(b)));
    model.set({b}, favor(17, VocabLayout::kEos));

    DecodeConfig config;
    config.strategy = Strategy::TopP;
    config.greedy = true;
    Rng rng(1);
    const TokenStream out = decode_sequence(model, {VocabLayout::kEos, t, VocabLayout::kBreak},
                                            config, kVocab, rng);
    CHECK(out == TokenStream{a, b}); // the terminal <eos> is not part of the continuation
}

TEST_CASE("the continuation never leaves its modality block") {
    // The default logits scream for a text token; after <break> only image
    // ids and <eos> are admissible, so the best image id wins instead.
    std::vector<double> defaults(17, 0.0);
    defaults[5] = 100.0;                                 // text id, must be masked out
    defaults[std::size_t(kVocab.image_start()) + 3] = 5; // best admissible id
    FixtureModel model(17, defaults);

    DecodeConfig config;
    config.greedy = true;
    config.max_tokens = 4;
    Rng rng(2);
    const TokenStream out = decode_sequence(model, {VocabLayout::kEos, 5, VocabLayout::kBreak},
                                            config, kVocab, rng);
    REQUIRE(out.size() == 4); // hit max_tokens without an <eos>
    for (TokenId tok : out)
        CHECK(kVocab.is_image(tok));
}

TEST_CASE("an infill suffix continues in the open span's modality") {
    std::vector<double> defaults(17, 0.0);
    defaults[6] = 7.0;  // text id
    defaults[14] = 3.0; // image id
    FixtureModel model(17, defaults);
    DecodeConfig config;
    config.greedy = true;
    config.max_tokens = 2;

    // mask in the text segment of the body -> text continuation
    Rng rng(3);
    const TokenStream prompt{VocabLayout::kEos,    kVocab.mask(0),       VocabLayout::kBreak,
                             kVocab.image_start(), VocabLayout::kInfill, kVocab.mask(0)};
    const TokenStream out = decode_sequence(model, prompt, config, kVocab, rng);
    REQUIRE(!out.empty());
    for (TokenId tok : out)
        CHECK(kVocab.is_text(tok));

    // a suffix sentinel with no body occurrence is malformed
    const TokenStream bad{VocabLayout::kEos, 5, VocabLayout::kBreak, VocabLayout::kInfill,
                          kVocab.mask(0)};
    Rng rng2(4);
    CHECK_THROWS_AS(decode_sequence(model, bad, config, kVocab, rng2), DataError);
}

TEST_CASE("guided strategies really consult the mask-replaced stream") {
    // Conditional context prefers image id 13; unconditional prefers 14.
    FixtureModel model(17);
    const TokenId t = 5;
    model.set({t, VocabLayout::kBreak}, favor(17, 13));              // cond branch
    model.set({kVocab.mask(0), VocabLayout::kBreak}, favor(17, 14)); // uncond branch
    model.set({13}, favor(17, VocabLayout::kEos));
    model.set({14}, favor(17, VocabLayout::kEos));

    DecodeConfig config;
    config.strategy = Strategy::Cfg;
    config.greedy = true;
    const TokenStream prompt{VocabLayout::kEos, t, VocabLayout::kBreak};

    config.cfg_alpha = 1.0; // pure conditional
    Rng r1(5);
    CHECK(decode_sequence(model, prompt, config, kVocab, r1) == TokenStream{13});

    config.cfg_alpha = 0.0; // pure unconditional
    Rng r2(6);
    CHECK(decode_sequence(model, prompt, config, kVocab, r2) == TokenStream{14});
}

TEST_CASE("sampling is reproducible for a fixed generator seed") {
    FixtureModel model(17);
    DecodeConfig config;
    config.strategy = Strategy::Temperature;
    config.max_tokens = 8;
    const TokenStream prompt{VocabLayout::kEos, 5, VocabLayout::kBreak};
    Rng r1(9), r2(9);
    const auto a = decode_sequence(model, prompt, config, kVocab, r1);
    const auto b = decode_sequence(model, prompt, config, kVocab, r2);
    CHECK(a == b);
}

TEST_CASE("decode validation rejects bad configs and mismatched models") {
    FixtureModel model(17);
    const TokenStream prompt{VocabLayout::kEos, 5, VocabLayout::kBreak};
    Rng rng(10);
    DecodeConfig config;
    config.temperature = 0.0;
    CHECK_THROWS_AS(decode_sequence(model, prompt, config, kVocab, rng), ConfigError);
    config = DecodeConfig{};
    config.max_tokens = 0;
    CHECK_THROWS_AS(decode_sequence(model, prompt, config, kVocab, rng), ConfigError);
    config = DecodeConfig{};
    CHECK_THROWS_AS(decode_sequence(model, {}, config, kVocab, rng), DataError);
    FixtureModel small(10);
    CHECK_THROWS_AS(decode_sequence(small, prompt, config, kVocab, rng), ShapeError);
}

TEST_CASE("pools are ordered by the mix and reproducible as unions") {
    FixtureModel model(17);
    DecodeConfig base;
    base.max_tokens = 6;
    const TokenStream prompt{VocabLayout::kEos, 5, VocabLayout::kBreak};
    const StrategyMix mix{{Strategy::TopP, 3}, {Strategy::Cd, 2}};

    const CandidatePool pool = generate_pool(model, prompt, mix, base, kVocab, 99);
    REQUIRE(pool.size() == 5);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(pool[i].strategy == Strategy::TopP);
    for (std::size_t i = 3; i < 5; ++i)
        CHECK(pool[i].strategy == Strategy::Cd);

    // One call equals the concatenation of per-strategy calls with the same
    // master seed, and thread count never changes the outcome.
    const CandidatePool top = generate_pool(model, prompt, {{Strategy::TopP, 3}}, base, kVocab, 99);
    const CandidatePool cd = generate_pool(model, prompt, {{Strategy::Cd, 2}}, base, kVocab, 99);
    REQUIRE(top.size() + cd.size() == pool.size());
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(pool[i].tokens == top[i].tokens);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(pool[3 + i].tokens == cd[i].tokens);

    const CandidatePool threaded = generate_pool(model, prompt, mix, base, kVocab, 99, 4);
    REQUIRE(threaded.size() == pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        CHECK(threaded[i].tokens == pool[i].tokens);

    const CandidatePool other = generate_pool(model, prompt, mix, base, kVocab, 100);
    bool any_differ = false;
    for (std::size_t i = 0; i < pool.size(); ++i)
        any_differ = any_differ || other[i].tokens != pool[i].tokens;
    CHECK(any_differ);
}

namespace {

// First token decides the embedding; enough to pin down the cosine ranking.
class DirectionEmbedder final : public Embedder {
  public:
    std::size_t dim() const override { return 2; }
    std::vector<float> embed_tokens(std::span<const TokenId> tokens) const override {
        if (tokens.empty())
            return {0.0f, 0.0f};
        const float inv = 1.0f / std::sqrt(2.0f);
        switch (tokens[0]) {
        case 100: return {1.0f, 0.0f};
        case 200: return {0.0f, 1.0f};
        case 300: return {inv, inv};
        default: return {0.0f, 0.0f};
        }
    }
};

} // namespace

TEST_CASE("re-ranking scores candidates by caption similarity") {
    const DirectionEmbedder emb;
    CandidatePool pool;
    pool.push_back({{200, 1, 1}, Strategy::TopP, 0.0});
    pool.push_back({{300, 2, 2}, Strategy::Cfg, 0.0});
    pool.push_back({{100, 3}, Strategy::Cd, 0.0});
    const TokenStream caption{100};

    const std::size_t best = rerank_pool(pool, caption, emb);
    CHECK(best == 2);
    CHECK(pool[0].score == doctest::Approx(0.0));
    CHECK(pool[1].score == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(pool[2].score == doctest::Approx(1.0));

    // Equal scores resolve to the earliest candidate.
    CandidatePool tied;
    tied.push_back({{300, 9}, Strategy::TopP, 0.0});
    tied.push_back({{300, 7}, Strategy::TopP, 0.0});
    CHECK(rerank_pool(tied, caption, emb) == 0);

    // An empty caption has no direction; everything scores zero.
    CandidatePool blank;
    blank.push_back({{200}, Strategy::TopP, 0.0});
    CHECK(rerank_pool(blank, {}, emb) == 0);
    CHECK(blank[0].score == 0.0);
}
