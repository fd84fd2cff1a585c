#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace geoprofile {

// Aho-Corasick automaton whose alphabet is whole tokens rather than bytes.
// Patterns are token sequences; a scan over a tokenized text reports every
// occurrence of every pattern in one pass, so matches always start and end on
// token boundaries.
class TokenMatcher {
 public:
  struct Match {
    std::size_t first = 0;    // index of the first token
    std::size_t length = 0;   // tokens covered
    std::uint32_t value = 0;  // caller payload given to add()
  };

  // Adds a pattern. Adding the same sequence twice keeps the first value.
  // Must be called before compile().
  void add(std::span<const std::string> tokens, std::uint32_t value);

  // Builds failure and output links. Idempotent.
  void compile();

  std::size_t pattern_count() const { return patterns_; }

  // Every occurrence, ordered by end position and then by decreasing length.
  std::vector<Match> find_all(std::span<const std::string_view> tokens) const;

 private:
  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;

  struct Node {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> next;  // symbol -> node, sorted
    std::uint32_t fail = 0;
    std::uint32_t dict = kNone;  // nearest proper suffix node that ends a pattern
    std::uint32_t depth = 0;
    std::uint32_t value = kNone;
  };

  std::uint32_t child(std::uint32_t node, std::uint32_t symbol) const;
  std::uint32_t symbol_of(std::string_view token) const;

  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> vocab_;
  std::vector<Node> nodes_{Node{}};
  std::size_t patterns_ = 0;
  bool compiled_ = false;
};

}  // namespace geoprofile
