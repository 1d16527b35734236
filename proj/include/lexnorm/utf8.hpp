#pragma once

#include <string>
#include <string_view>

namespace lexnorm::utf8 {

// Invalid byte sequences decode to U+FFFD.
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);
std::string encode(char32_t cp);

// Lowercasing for Latin scripts, including every Vietnamese letter.
char32_t to_lower(char32_t cp);

enum class CharClass { kWord, kSpace, kPunct, kEmoji, kJoiner };

CharClass classify(char32_t cp);

// Number of code points.
std::size_t length(std::string_view text);

}  // namespace lexnorm::utf8
