#include "cm3/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <string>

#include "cm3/error.hpp"

namespace cm3 {

namespace {

constexpr std::uint64_t kBookStream = 1;
constexpr std::uint64_t kDocStream = 2;

} // namespace

void validate_spec(const SyntheticSpec& spec) {
    if (spec.n_patterns < 2)
        throw ConfigError("at least two caption classes are required");
    if (!(spec.noise_rate >= 0.0 && spec.noise_rate < 1.0))
        throw ConfigError("noise rate must lie in [0, 1)");
    if (spec.n_docs < 1)
        throw ConfigError("document count must be positive");
    if (spec.caption_len < 1 || spec.tokens_per_image < 1)
        throw ConfigError("caption and image lengths must be positive");
}

PatternBook make_pattern_book(const SyntheticSpec& spec, const VocabLayout& vocab) {
    validate_spec(spec);
    Rng rng(derive_seed(spec.seed, kBookStream));
    PatternBook book;
    std::set<TokenStream> seen_captions, seen_patterns;
    for (std::int32_t c = 0; c < spec.n_patterns; ++c) {
        TokenStream caption;
        do {
            caption.clear();
            for (std::int32_t i = 0; i < spec.caption_len; ++i)
                caption.push_back(vocab.text_start() +
                                  static_cast<TokenId>(bounded(rng, static_cast<std::uint64_t>(vocab.n_text))));
        } while (!seen_captions.insert(caption).second);
        TokenStream pattern;
        do {
            pattern.clear();
            for (std::int32_t i = 0; i < spec.tokens_per_image; ++i)
                pattern.push_back(vocab.image_start() +
                                  static_cast<TokenId>(bounded(rng, static_cast<std::uint64_t>(vocab.n_image))));
        } while (!seen_patterns.insert(pattern).second);
        book.captions.push_back(std::move(caption));
        book.patterns.push_back(std::move(pattern));
    }
    return book;
}

std::vector<Document> generate_synthetic_corpus(const SyntheticSpec& spec, const VocabLayout& vocab,
                                                std::vector<std::int32_t>* classes) {
    const PatternBook book = make_pattern_book(spec, vocab);
    Rng rng(derive_seed(spec.seed, kDocStream));
    std::vector<Document> docs;
    docs.reserve(static_cast<std::size_t>(spec.n_docs));
    if (classes)
        classes->clear();
    char id[32];
    for (std::int32_t d = 0; d < spec.n_docs; ++d) {
        const auto cls = static_cast<std::int32_t>(bounded(rng, static_cast<std::uint64_t>(spec.n_patterns)));
        Document doc;
        std::snprintf(id, sizeof id, "doc-%06d", d);
        doc.id = id;
        doc.caption = book.captions[static_cast<std::size_t>(cls)];
        doc.image = book.patterns[static_cast<std::size_t>(cls)];
        for (TokenId& t : doc.image)
            if (uniform01(rng) < spec.noise_rate)
                t = vocab.image_start() +
                    static_cast<TokenId>(bounded(rng, static_cast<std::uint64_t>(vocab.n_image)));
        docs.push_back(std::move(doc));
        if (classes)
            classes->push_back(cls);
    }
    return docs;
}

} // namespace cm3
