#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <vector>

#include "cm3/error.hpp"
#include "cm3/infill.hpp"
#include "cm3/rng.hpp"
#include "cm3/stream.hpp"
#include "cm3/vocab.hpp"

using namespace cm3;

namespace {

const VocabLayout kVocab = build_vocab(32, 16, 4);

TokenStream random_document_stream(Rng& rng) {
    Document doc;
    const std::size_t cap_len = 1 + bounded(rng, 6);
    for (std::size_t i = 0; i < cap_len; ++i)
        doc.caption.push_back(kVocab.text_start() + static_cast<TokenId>(bounded(rng, kVocab.n_text)));
    const std::size_t img_len = 1 + bounded(rng, 8);
    for (std::size_t i = 0; i < img_len; ++i)
        doc.image.push_back(kVocab.image_start() + static_cast<TokenId>(bounded(rng, kVocab.n_image)));
    return serialize_document(doc, kVocab);
}

InfillConfig always_mask(std::int32_t max_spans, std::int32_t len_min, std::int32_t len_max) {
    InfillConfig config;
    config.mask_prob = 1.0;
    config.max_spans = max_spans;
    config.span_len_min = len_min;
    config.span_len_max = len_max;
    return config;
}

} // namespace

TEST_CASE("a masked span moves to the suffix behind its sentinel") {
    // [eos c1 c2 c3 break i1 i2] with the span (c2 c3) masked must become
    // [eos c1 <mask0> break i1 i2 <infill> <mask0> c2 c3]. The draw that
    // selects that particular span is found by scanning seeds.
    const TokenId c1 = kVocab.text_start(), c2 = c1 + 1, c3 = c1 + 2;
    const TokenId i1 = kVocab.image_start(), i2 = i1 + 1;
    const TokenStream stream{VocabLayout::kEos, c1, c2, c3, VocabLayout::kBreak, i1, i2};
    const TokenStream expected{VocabLayout::kEos, c1,          kVocab.mask(0), VocabLayout::kBreak,
                               i1,                i2,          VocabLayout::kInfill,
                               kVocab.mask(0),    c2,          c3};

    const InfillConfig config = always_mask(1, 2, 2);
    bool found = false;
    for (std::uint64_t seed = 0; seed < 256 && !found; ++seed) {
        Rng rng(seed);
        const InfillInstance inst = infill_transform(stream, rng, config, kVocab);
        if (inst.tokens == expected) {
            found = true;
            REQUIRE(inst.mask_records.size() == 1);
            CHECK(inst.mask_records[0].sentinel == kVocab.mask(0));
            CHECK(inst.mask_records[0].pos == 2);
            CHECK(inst.mask_records[0].len == 2);
            CHECK(invert_infill(inst, kVocab) == stream);
        }
    }
    CHECK(found);
}

TEST_CASE("zero mask probability always takes the identity branch") {
    Rng rng(5);
    InfillConfig config;
    config.mask_prob = 0.0;
    for (int i = 0; i < 50; ++i) {
        const TokenStream stream = random_document_stream(rng);
        const InfillInstance inst = infill_transform(stream, rng, config, kVocab);
        CHECK(inst.tokens == stream);
        CHECK(inst.mask_records.empty());
    }
}

TEST_CASE("a stream with no maskable run passes through unchanged") {
    Rng rng(6);
    const TokenStream bare{VocabLayout::kEos, VocabLayout::kBreak};
    const InfillInstance inst = infill_transform(bare, rng, always_mask(1, 1, 4), kVocab);
    CHECK(inst.tokens == bare);
    CHECK(inst.mask_records.empty());
}

TEST_CASE("config validation rejects impossible settings") {
    Rng rng(7);
    const TokenStream stream{VocabLayout::kEos, kVocab.text_start(), VocabLayout::kBreak,
                             kVocab.image_start()};
    CHECK_THROWS_AS(infill_transform(stream, rng, always_mask(5, 1, 2), kVocab), ConfigError);
    CHECK_THROWS_AS(infill_transform(stream, rng, always_mask(0, 1, 2), kVocab), ConfigError);
    CHECK_THROWS_AS(infill_transform(stream, rng, always_mask(1, 3, 2), kVocab), ConfigError);
    CHECK_THROWS_AS(infill_transform(stream, rng, always_mask(1, 0, 2), kVocab), ConfigError);
    InfillConfig bad = always_mask(1, 1, 2);
    bad.mask_prob = 1.5;
    CHECK_THROWS_AS(infill_transform(stream, rng, bad, kVocab), ConfigError);
}

TEST_CASE("inversion restores the original stream across random configs") {
    Rng rng(8);
    int masked = 0;
    for (int i = 0; i < 2000; ++i) {
        const TokenStream stream = random_document_stream(rng);
        InfillConfig config;
        config.mask_prob = 0.8;
        config.max_spans = static_cast<std::int32_t>(1 + bounded(rng, 4));
        config.span_len_min = static_cast<std::int32_t>(1 + bounded(rng, 2));
        config.span_len_max = config.span_len_min + static_cast<std::int32_t>(bounded(rng, 3));
        const InfillInstance inst = infill_transform(stream, rng, config, kVocab);
        REQUIRE(invert_infill(inst, kVocab) == stream);
        if (!inst.mask_records.empty())
            ++masked;

        // Growth stays within the budget the packers rely on.
        CHECK(inst.tokens.size() <= stream.size() + static_cast<std::size_t>(max_infill_growth(config)));

        for (const MaskRecord& rec : inst.mask_records)
            for (std::size_t p = rec.pos; p < rec.pos + rec.len; ++p)
                CHECK_FALSE(kVocab.is_special(stream[p]));
    }
    CHECK(masked > 1200); // the masking branch actually exercised
}

TEST_CASE("sentinels are assigned left to right and echoed in suffix order") {
    Rng rng(9);
    int multi = 0;
    for (int i = 0; i < 400; ++i) {
        const TokenStream stream = random_document_stream(rng);
        const InfillInstance inst = infill_transform(stream, rng, always_mask(3, 1, 2), kVocab);
        if (inst.mask_records.size() < 2)
            continue;
        ++multi;
        for (std::size_t s = 0; s < inst.mask_records.size(); ++s)
            CHECK(inst.mask_records[s].sentinel == kVocab.mask(static_cast<std::int32_t>(s)));
        for (std::size_t s = 1; s < inst.mask_records.size(); ++s)
            CHECK(inst.mask_records[s - 1].pos + inst.mask_records[s - 1].len <= inst.mask_records[s].pos);

        // In the transformed stream the suffix lists sentinels in the same
        // ascending order.
        const auto infill_it = std::find(inst.tokens.begin(), inst.tokens.end(), VocabLayout::kInfill);
        REQUIRE(infill_it != inst.tokens.end());
        std::vector<TokenId> suffix_sentinels;
        for (auto it = infill_it + 1; it != inst.tokens.end(); ++it)
            if (kVocab.is_mask(*it))
                suffix_sentinels.push_back(*it);
        CHECK(std::is_sorted(suffix_sentinels.begin(), suffix_sentinels.end()));
        CHECK(suffix_sentinels.size() == inst.mask_records.size());
    }
    CHECK(multi > 50);
}

TEST_CASE("span lengths are drawn uniformly over the feasible range") {
    Rng rng(10);
    // One span over a long single-modality run; lengths 1..3 all feasible.
    Document doc;
    for (int i = 0; i < 20; ++i)
        doc.caption.push_back(kVocab.text_start() + static_cast<TokenId>(i % kVocab.n_text));
    doc.image.push_back(kVocab.image_start());
    const TokenStream stream = serialize_document(doc, kVocab);

    std::array<int, 4> counts{};
    const int draws = 3000;
    for (int i = 0; i < draws; ++i) {
        const InfillInstance inst = infill_transform(stream, rng, always_mask(1, 1, 3), kVocab);
        REQUIRE(inst.mask_records.size() == 1);
        REQUIRE(inst.mask_records[0].len <= 3);
        counts[inst.mask_records[0].len]++;
    }
    // ~1000 each; 150 is about 5.8 standard deviations of slack.
    for (std::size_t len = 1; len <= 3; ++len)
        CHECK(std::abs(counts[len] - draws / 3) < 150);
}

TEST_CASE("malformed infill encodings are rejected") {
    const TokenId c = kVocab.text_start(), m0 = kVocab.mask(0), m1 = kVocab.mask(1);
    const TokenId inf = VocabLayout::kInfill, eos = VocabLayout::kEos;
    auto invert = [&](TokenStream tokens) {
        InfillInstance inst;
        inst.tokens = std::move(tokens);
        return invert_infill(inst, kVocab);
    };
    // suffix must open with a sentinel
    CHECK_THROWS_AS(invert({eos, m0, inf, c, m0, c}), DataError);
    // empty span body
    CHECK_THROWS_AS(invert({eos, m0, inf, m0}), DataError);
    // sentinel repeated in the suffix
    CHECK_THROWS_AS(invert({eos, m0, inf, m0, c, m0, c}), DataError);
    // body sentinel never defined
    CHECK_THROWS_AS(invert({eos, m0, m1, inf, m0, c}), DataError);
    // suffix sentinel never used
    CHECK_THROWS_AS(invert({eos, m0, inf, m0, c, m1, c}), DataError);
    // body reuses one sentinel twice
    CHECK_THROWS_AS(invert({eos, m0, c, m0, inf, m0, c}), DataError);
    // no infill marker at all: body passes through, sentinels intact
    CHECK(invert({eos, c, c}) == TokenStream{eos, c, c});
}

TEST_CASE("prompt builders wrap captions and images for generation") {
    const TokenId c = kVocab.text_start() + 3;
    const TokenId i = kVocab.image_start() + 5;

    const TokenStream cap_prompt = caption_to_image_prompt(std::vector<TokenId>{c, c}, kVocab);
    CHECK(cap_prompt == TokenStream{VocabLayout::kEos, c, c, VocabLayout::kBreak});
    CHECK(caption_to_image_prompt(std::vector<TokenId>{}, kVocab) ==
          TokenStream{VocabLayout::kEos, VocabLayout::kBreak});
    CHECK_THROWS_AS(caption_to_image_prompt(std::vector<TokenId>{i}, kVocab), DataError);

    const TokenStream img_prompt = image_to_caption_prompt(std::vector<TokenId>{i}, kVocab);
    CHECK(img_prompt == TokenStream{VocabLayout::kEos, kVocab.mask(0), VocabLayout::kBreak, i,
                                    VocabLayout::kInfill, kVocab.mask(0)});
    CHECK_THROWS_AS(image_to_caption_prompt(std::vector<TokenId>{}, kVocab), ShapeError);
    CHECK_THROWS_AS(image_to_caption_prompt(std::vector<TokenId>{c}, kVocab), DataError);
}

TEST_CASE("loss weights zero out padding and nothing else") {
    const TokenStream stream{VocabLayout::kEos, kVocab.text_start(), VocabLayout::kBreak,
                             kVocab.image_start(), VocabLayout::kPad, VocabLayout::kPad};
    const std::vector<float> w = loss_weights(stream, kVocab);
    CHECK(w == std::vector<float>{1, 1, 1, 1, 0, 0});
}
