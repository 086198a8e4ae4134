#include "cm3/vocab.hpp"

#include <cctype>
#include <string>

#include "cm3/error.hpp"

namespace cm3 {

TokenId VocabLayout::mask(std::int32_t i) const {
    if (i < 0 || i >= n_masks)
        throw ConfigError("mask index " + std::to_string(i) + " out of range (n_masks=" +
                          std::to_string(n_masks) + ")");
    return kFirstMask + i;
}

VocabLayout build_vocab(std::int32_t n_text, std::int32_t n_image, std::int32_t n_masks) {
    if (n_text <= 0 || n_image <= 0)
        throw ConfigError("vocabulary blocks must be non-empty");
    if (n_masks < 1)
        throw ConfigError("at least one mask sentinel is required");
    VocabLayout v;
    v.n_text = n_text;
    v.n_image = n_image;
    v.n_masks = n_masks;
    return v;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

TokenId word_token(const VocabLayout& vocab, std::string_view word, std::int32_t reserved) {
    if (reserved < 0 || reserved >= vocab.n_text)
        throw ConfigError("reserved coordinate range must leave room for words");
    const auto range = static_cast<std::uint64_t>(vocab.n_text - reserved);
    return vocab.text_start() + static_cast<TokenId>(fnv1a(word) % range);
}

TokenStream tokenize_words(const VocabLayout& vocab, std::string_view text, std::int32_t reserved) {
    TokenStream out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
            ++j;
        if (j > i)
            out.push_back(word_token(vocab, text.substr(i, j - i), reserved));
        i = j;
    }
    return out;
}

TokenId coord_token(const VocabLayout& vocab, std::int32_t bucket, std::int32_t n_buckets) {
    if (n_buckets <= 0 || n_buckets > vocab.n_text)
        throw ConfigError("coordinate bucket count must fit in the text block");
    if (bucket < 0 || bucket >= n_buckets)
        throw ConfigError("coordinate bucket " + std::to_string(bucket) + " out of range");
    return vocab.text_start() + vocab.n_text - n_buckets + bucket;
}

} // namespace cm3
