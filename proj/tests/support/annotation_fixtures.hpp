#pragma once

#include <string>

#include "geoprofile/entity_filter.hpp"

namespace fixtures {

// Three raters over 651 items: 265 unanimous present, 245 unanimous absent,
// 69 with two present votes and 72 with one. The odd vote rotates across
// raters so no rater is systematically the dissenter.
inline geoprofile::AnnotationMatrix house_row() {
  using geoprofile::Vote;
  const int all1 = 265, all0 = 245, two = 69, one = 72;
  std::vector<std::string> items, raters{"r1", "r2", "r3"};
  for (int i = 0; i < all1 + all0 + two + one; ++i) items.push_back("house-" + std::to_string(i));
  geoprofile::AnnotationMatrix m(items, raters);
  std::size_t row = 0;
  auto fill = [&](int count, int ones) {
    for (int i = 0; i < count; ++i, ++row) {
      for (std::size_t r = 0; r < 3; ++r) {
        Vote v = ones == 3 ? Vote::kPresent : ones == 0 ? Vote::kAbsent : Vote::kAbsent;
        if (ones == 2) v = (r == static_cast<std::size_t>(i % 3)) ? Vote::kAbsent : Vote::kPresent;
        if (ones == 1) v = (r == static_cast<std::size_t>(i % 3)) ? Vote::kPresent : Vote::kAbsent;
        m.set(row, r, v);
      }
    }
  };
  fill(all1, 3);
  fill(all0, 0);
  fill(two, 2);
  fill(one, 1);
  return m;
}

}  // namespace fixtures
