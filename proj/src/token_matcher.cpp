#include "geoprofile/token_matcher.hpp"

#include <algorithm>
#include <queue>

#include "geoprofile/error.hpp"

namespace geoprofile {

std::uint32_t TokenMatcher::child(std::uint32_t node, std::uint32_t symbol) const {
  const auto& next = nodes_[node].next;
  const auto it = std::lower_bound(next.begin(), next.end(), symbol,
                                   [](const auto& edge, std::uint32_t s) { return edge.first < s; });
  return it != next.end() && it->first == symbol ? it->second : kNone;
}

std::uint32_t TokenMatcher::symbol_of(std::string_view token) const {
  const auto it = vocab_.find(token);
  return it == vocab_.end() ? kNone : it->second;
}

void TokenMatcher::add(std::span<const std::string> tokens, std::uint32_t value) {
  if (compiled_) throw Error("TokenMatcher::add after compile");
  if (tokens.empty()) return;
  std::uint32_t node = 0;
  for (const auto& token : tokens) {
    const auto [vit, fresh] = vocab_.emplace(token, static_cast<std::uint32_t>(vocab_.size()));
    const std::uint32_t symbol = vit->second;
    auto& next = nodes_[node].next;
    const auto it = std::lower_bound(next.begin(), next.end(), symbol,
                                     [](const auto& edge, std::uint32_t s) { return edge.first < s; });
    if (it != next.end() && it->first == symbol) {
      node = it->second;
      continue;
    }
    const auto created = static_cast<std::uint32_t>(nodes_.size());
    const std::uint32_t depth = nodes_[node].depth + 1;
    next.insert(it, {symbol, created});
    nodes_.push_back(Node{});
    nodes_.back().depth = depth;
    node = created;
  }
  if (nodes_[node].value == kNone) {
    nodes_[node].value = value;
    ++patterns_;
  }
}

void TokenMatcher::compile() {
  if (compiled_) return;
  std::queue<std::uint32_t> queue;
  for (const auto& [symbol, c] : nodes_[0].next) {
    nodes_[c].fail = 0;
    queue.push(c);
  }
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop();
    for (const auto& [symbol, c] : nodes_[u].next) {
      std::uint32_t f = nodes_[u].fail;
      std::uint32_t target = child(f, symbol);
      while (target == kNone && f != 0) {
        f = nodes_[f].fail;
        target = child(f, symbol);
      }
      nodes_[c].fail = (target == kNone || target == c) ? 0 : target;
      const auto& fail_node = nodes_[nodes_[c].fail];
      nodes_[c].dict = fail_node.value != kNone ? nodes_[c].fail : fail_node.dict;
      queue.push(c);
    }
  }
  compiled_ = true;
}

std::vector<TokenMatcher::Match> TokenMatcher::find_all(std::span<const std::string_view> tokens) const {
  if (!compiled_) throw Error("TokenMatcher::find_all before compile");
  std::vector<Match> matches;
  std::uint32_t state = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::uint32_t symbol = symbol_of(tokens[i]);
    if (symbol == kNone) {
      state = 0;
      continue;
    }
    std::uint32_t next = child(state, symbol);
    while (next == kNone && state != 0) {
      state = nodes_[state].fail;
      next = child(state, symbol);
    }
    state = next == kNone ? 0 : next;
    for (std::uint32_t out = nodes_[state].value != kNone ? state : nodes_[state].dict; out != kNone;
         out = nodes_[out].dict) {
      const auto& node = nodes_[out];
      matches.push_back(Match{i + 1 - node.depth, node.depth, node.value});
    }
  }
  return matches;
}

}  // namespace geoprofile
