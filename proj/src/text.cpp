#include "geoprofile/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <numeric>

#include "geoprofile/error.hpp"

namespace geoprofile {
namespace {

constexpr UChar32 kReplacement = 0xFFFD;

// Characters kept inside tokens: the period (deleted later), hyphens and
// apostrophes (kept when internal).
bool is_joiner(UChar32 c) {
  switch (c) {
    case '.':
    case '-':
    case '\'':
    case 0x2010:  // hyphen
    case 0x2011:  // non-breaking hyphen
    case 0x2018:  // left single quotation mark
    case 0x2019:  // right single quotation mark
      return true;
    default:
      return false;
  }
}

bool is_separator(UChar32 c) {
  if (c < 0 || c == kReplacement) return true;
  if (is_joiner(c)) return false;
  if (u_isUWhiteSpace(c)) return true;
  const auto mask = U_GET_GC_MASK(c);
  return (mask & (U_GC_P_MASK | U_GC_S_MASK | U_GC_CC_MASK | U_GC_CF_MASK | U_GC_Z_MASK)) != 0;
}

UChar32 next_codepoint(std::string_view s, std::size_t& pos) {
  UChar32 c;
  auto i = static_cast<int32_t>(pos);
  U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), i, static_cast<int32_t>(s.size()), c);
  pos = static_cast<std::size_t>(i);
  return c < 0 ? kReplacement : c;
}

const icu::Normalizer2& nfd() {
  static const icu::Normalizer2* instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    const auto* n = icu::Normalizer2::getNFDInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFD normalizer unavailable");
    return n;
  }();
  return *instance;
}

std::string normalize_ascii(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char ch : raw) {
    if (ch == '.') continue;
    out.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
  }
  return out;
}

std::string normalize_unicode(std::string_view raw) {
  icu::UnicodeString folded;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    UChar32 c = next_codepoint(raw, pos);
    if (c == 0x2018 || c == 0x2019) c = '\'';
    if (c == 0x2010 || c == 0x2011) c = '-';
    if (c == '.') continue;
    folded.append(c);
  }
  folded.foldCase();
  UErrorCode status = U_ZERO_ERROR;
  const icu::UnicodeString decomposed = nfd().normalize(folded, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");

  icu::UnicodeString stripped;
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 c = decomposed.char32At(i);
    i += U16_LENGTH(c);
    const auto type = u_charType(c);
    if (type == U_NON_SPACING_MARK || type == U_ENCLOSING_MARK) continue;
    stripped.append(c);
  }
  std::string out;
  stripped.toUTF8String(out);
  return out;
}

std::string_view strip_edges(std::string_view s) {
  const auto edge = [](char c) { return c == '-' || c == '\''; };
  while (!s.empty() && edge(s.front())) s.remove_prefix(1);
  while (!s.empty() && edge(s.back())) s.remove_suffix(1);
  return s;
}

void emit_token(std::string_view text, std::size_t begin, std::size_t end, bool ascii,
                std::vector<Token>& out) {
  const std::string_view raw = text.substr(begin, end - begin);
  std::string norm = ascii ? normalize_ascii(raw) : normalize_unicode(raw);
  const std::string_view core = strip_edges(norm);
  if (core.empty()) return;

  // Narrow the span past edge joiners so it slices to the visible word.
  std::size_t span_begin = begin;
  std::size_t span_end = begin;
  bool seen_core = false;
  for (std::size_t pos = begin; pos < end;) {
    const std::size_t at = pos;
    const UChar32 c = next_codepoint(text.substr(0, end), pos);
    if (!is_joiner(c)) {
      if (!seen_core) span_begin = at;
      seen_core = true;
      span_end = pos;
    }
  }
  out.push_back(Token{std::string(core), span_begin, span_end});
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  std::size_t start = 0;
  bool in_token = false;
  bool ascii = true;
  while (pos < text.size()) {
    const std::size_t at = pos;
    const auto byte = static_cast<unsigned char>(text[pos]);
    UChar32 c;
    if (byte < 0x80) {
      c = byte;
      ++pos;
    } else {
      c = next_codepoint(text, pos);
    }
    if (is_separator(c)) {
      if (in_token) emit_token(text, start, at, ascii, tokens);
      in_token = false;
      continue;
    }
    if (!in_token) {
      in_token = true;
      start = at;
      ascii = true;
    }
    if (byte >= 0x80) ascii = false;
  }
  if (in_token) emit_token(text, start, text.size(), ascii, tokens);
  return tokens;
}

std::string normalize_name(std::string_view s) {
  std::string out;
  for (const auto& token : tokenize(s)) {
    if (!out.empty()) out.push_back(' ');
    out += token.text;
  }
  return out;
}

std::u32string to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) out.push_back(static_cast<char32_t>(next_codepoint(s, pos)));
  return out;
}

std::size_t codepoint_length(std::string_view s) {
  std::size_t n = 0;
  for (char ch : s) {
    if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t above = row[j];
      const std::size_t substitute = diagonal + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({above + 1, row[j - 1] + 1, substitute});
      diagonal = above;
    }
  }
  return row[b.size()];
}

std::string_view trim(std::string_view s) {
  const auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto lower = [](char c) { return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c; };
    if (lower(a[i]) != lower(b[i])) return false;
  }
  return true;
}

}  // namespace geoprofile
