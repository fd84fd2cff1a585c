#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace geoprofile {

// A normalized token together with the byte range it came from in the
// original text. `begin`/`end` exclude edge hyphens, apostrophes and periods
// that normalization strips.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Splits UTF-8 text into normalized tokens. Whitespace, punctuation and
// symbols separate tokens, except '.', '-' and apostrophes, which stay inside
// a token. Each token is casefolded, decomposed (NFD) with combining marks
// removed, has periods deleted and edge hyphens/apostrophes trimmed. Tokens
// that normalize to nothing are dropped.
std::vector<Token> tokenize(std::string_view text);

// Casefolded, diacritic-stripped, whitespace-collapsed form used for every
// name comparison: the normalized tokens of `s` joined by single spaces.
//   "São Paulo" -> "sao paulo", "  LONDON " -> "london".
std::string normalize_name(std::string_view s);

// UTF-8 to code points. Invalid sequences decode to U+FFFD.
std::u32string to_u32(std::string_view s);

std::size_t codepoint_length(std::string_view s);

// Unit-cost edit distance over code points.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

std::string_view trim(std::string_view s);

// ASCII case-insensitive equality.
bool iequals(std::string_view a, std::string_view b);

}  // namespace geoprofile
