#include <doctest.h>

#include <algorithm>
#include <set>
#include <tuple>

#include "generators.hpp"
#include "geoprofile/text.hpp"
#include "geoprofile/token_matcher.hpp"
#include "oracles.hpp"

using namespace geoprofile;

TEST_SUITE("text") {
  TEST_CASE("normalize_name examples") {
    CHECK(normalize_name("São Paulo") == "sao paulo");
    CHECK(normalize_name("  LONDON ") == "london");
    CHECK(normalize_name("Cambridge") == "cambridge");
    CHECK(normalize_name("") == "");
    CHECK(normalize_name("Stratford-upon-Avon") == "stratford-upon-avon");
    CHECK(normalize_name("St. John's") == "st john's");
    CHECK(normalize_name("Hà Nội") == "ha noi");
    CHECK(normalize_name("Zürich, (CH)!") == "zurich ch");
  }

  TEST_CASE("normalize_name is idempotent") {
    gen::Engine e(7);
    for (int i = 0; i < 500; ++i) {
      auto s = gen::perturb(e, gen::place_name(e) + " Ünïcödé-'x", 2);
      CHECK(normalize_name(normalize_name(s)) == normalize_name(s));
    }
  }

  TEST_CASE("tokenize keeps byte ranges into the original") {
    const std::string text = "Visiting São Paulo, Brazil.";
    const auto toks = tokenize(text);
    REQUIRE(toks.size() == 4);
    CHECK(toks[1].text == "sao");
    CHECK(text.substr(toks[1].begin, toks[1].end - toks[1].begin) == "São");
    CHECK(toks[3].text == "brazil");
    CHECK(text.substr(toks[3].begin, toks[3].end - toks[3].begin) == "Brazil");
  }

  TEST_CASE("levenshtein agrees with the table oracle") {
    gen::Engine e(11);
    for (int i = 0; i < 300; ++i) {
      const auto a = gen::word(e, gen::between(e, 0, 4));
      const auto b = gen::perturb(e, a, gen::between(e, 0, 3));
      CHECK(levenshtein(to_u32(a), to_u32(b)) == oracle::edit_distance(oracle::utf8_decode(a), oracle::utf8_decode(b)));
    }
    CHECK(levenshtein(to_u32("kitten"), to_u32("sitting")) == 3);
    CHECK(codepoint_length("東京") == 2);
  }

  TEST_CASE("token matcher reports every occurrence") {
    TokenMatcher m;
    const std::vector<std::string> ny{"new", "york"}, york{"york"}, nyc{"new", "york", "city"};
    m.add(ny, 1);
    m.add(york, 2);
    m.add(nyc, 3);
    m.add(ny, 9);  // duplicate keeps the first value
    m.compile();
    CHECK(m.pattern_count() == 3);
    const std::vector<std::string_view> text{"in", "new", "york", "city", "and", "york"};
    const auto hits = m.find_all(text);
    REQUIRE(hits.size() == 4);
    CHECK(hits[0].first == 1);
    CHECK(hits[0].length == 2);
    CHECK(hits[0].value == 1);
    CHECK(hits[1].value == 2);
    CHECK(hits[2].value == 3);
    CHECK(hits[3].first == 5);
  }

  TEST_CASE("token matcher equals naive scan on random patterns") {
    gen::Engine e(3);
    for (int round = 0; round < 30; ++round) {
      std::vector<std::vector<std::string>> patterns;
      TokenMatcher m;
      for (std::uint32_t p = 0; p < 40; ++p) {
        std::vector<std::string> toks;
        for (std::size_t t = 0; t < gen::between(e, 1, 3); ++t) toks.push_back(gen::word(e, 1));
        bool dup = false;
        for (const auto& q : patterns) dup = dup || q == toks;
        if (dup) continue;
        m.add(toks, static_cast<std::uint32_t>(patterns.size()));
        patterns.push_back(toks);
      }
      m.compile();
      std::vector<std::string> words;
      for (int i = 0; i < 60; ++i) words.push_back(gen::word(e, 1));
      std::vector<std::string_view> view(words.begin(), words.end());
      std::set<std::tuple<std::size_t, std::size_t, std::uint32_t>> expected, got;
      for (std::size_t i = 0; i < words.size(); ++i)
        for (std::uint32_t p = 0; p < patterns.size(); ++p) {
          const auto& pat = patterns[p];
          if (i + pat.size() > words.size()) continue;
          if (std::equal(pat.begin(), pat.end(), words.begin() + static_cast<std::ptrdiff_t>(i)))
            expected.emplace(i, pat.size(), p);
        }
      for (const auto& h : m.find_all(view)) got.emplace(h.first, h.length, h.value);
      CHECK(got == expected);
    }
  }
}
