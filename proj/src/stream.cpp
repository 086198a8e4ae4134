#include "cm3/stream.hpp"

#include <string>

#include "cm3/error.hpp"

namespace cm3 {

TokenStream serialize_document(const Document& doc, const VocabLayout& vocab) {
    if (doc.image.empty())
        throw DataError("document '" + doc.id + "' has an empty image");
    for (TokenId t : doc.caption)
        if (!vocab.is_text(t))
            throw DataError("document '" + doc.id + "': caption token " + std::to_string(t) +
                            " outside the text block");
    for (TokenId t : doc.image)
        if (!vocab.is_image(t))
            throw DataError("document '" + doc.id + "': image token " + std::to_string(t) +
                            " outside the image block");
    TokenStream out;
    out.reserve(doc.caption.size() + doc.image.size() + 2);
    out.push_back(VocabLayout::kEos);
    out.insert(out.end(), doc.caption.begin(), doc.caption.end());
    out.push_back(VocabLayout::kBreak);
    out.insert(out.end(), doc.image.begin(), doc.image.end());
    return out;
}

void validate_document(const Document& doc, const VocabLayout& vocab, std::size_t tokens_per_image) {
    if (doc.image.size() != tokens_per_image)
        throw ShapeError("document '" + doc.id + "': image has " + std::to_string(doc.image.size()) +
                         " tokens, expected " + std::to_string(tokens_per_image));
    serialize_document(doc, vocab);
}

std::vector<TokenStream> pack_sequences(const std::vector<TokenStream>& streams, std::size_t seq_len,
                                        const VocabLayout& vocab) {
    (void)vocab;
    if (seq_len == 0)
        throw ConfigError("sequence length must be positive");
    std::vector<TokenStream> out;
    TokenStream cur;
    cur.reserve(seq_len);
    auto flush = [&] {
        if (cur.empty())
            return;
        cur.resize(seq_len, VocabLayout::kPad);
        out.push_back(std::move(cur));
        cur.clear();
        cur.reserve(seq_len);
    };
    for (const TokenStream& s : streams) {
        if (s.size() > seq_len)
            throw DataError("stream of length " + std::to_string(s.size()) +
                            " exceeds sequence length " + std::to_string(seq_len));
        if (cur.size() + s.size() > seq_len)
            flush();
        cur.insert(cur.end(), s.begin(), s.end());
    }
    flush();
    return out;
}

std::vector<StreamViolation> validate_stream(const TokenStream& stream, const VocabLayout& vocab) {
    std::vector<StreamViolation> out;
    bool image_segment = false;
    bool suffix = false;
    bool infill_seen = false;
    bool sentinel_seen = false;
    bool padding = false;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const TokenId t = stream[i];
        if (t < 0 || t >= vocab.total_size()) {
            out.push_back({i, "token id " + std::to_string(t) + " out of range"});
            continue;
        }
        if (padding && t != VocabLayout::kPad) {
            out.push_back({i, "non-pad token after padding started"});
            continue;
        }
        switch (t) {
        case VocabLayout::kPad:
            padding = true;
            break;
        case VocabLayout::kEos:
            image_segment = false;
            suffix = false;
            infill_seen = false;
            sentinel_seen = false;
            break;
        case VocabLayout::kBreak:
            if (suffix)
                out.push_back({i, "<break> inside an infill suffix"});
            else
                image_segment = !image_segment;
            break;
        case VocabLayout::kInfill:
            if (!sentinel_seen)
                out.push_back({i, "<infill> without a preceding mask sentinel"});
            if (infill_seen)
                out.push_back({i, "second <infill> in one document"});
            infill_seen = true;
            suffix = true;
            break;
        default:
            if (vocab.is_mask(t)) {
                sentinel_seen = true;
            } else if (!suffix) {
                if (vocab.is_text(t) && image_segment)
                    out.push_back({i, "text token in an image segment"});
                else if (vocab.is_image(t) && !image_segment)
                    out.push_back({i, "image token in a text segment"});
            }
            break;
        }
    }
    return out;
}

} // namespace cm3
