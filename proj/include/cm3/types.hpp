#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cm3 {

using TokenId = std::int32_t;
using TokenStream = std::vector<TokenId>;

// One caption/image pair. Caption tokens live in the text block of the
// vocabulary, image tokens in the image block.
struct Document {
    std::string id;
    TokenStream caption;
    TokenStream image;
};

} // namespace cm3
