#pragma once

// Slow, obviously-correct reference implementations. They share no code with
// the library apart from name normalization.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geoprofile/gazetteer.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Cyclic Jacobi rotations; returns eigenvalues ascending.
std::vector<double> symmetric_eigenvalues(Matrix a);

// exp(-sum l log l) over the eigenvalues of K/N, K the cosine kernel of the
// rows (normalized here).
double vendi(const Matrix& rows);

struct Flags {
  std::set<std::string> over, under;
};
Flags misalignment(const std::map<std::string, double>& data, const std::map<std::string, double>& ref, double r);

struct PR {
  double precision = 0, recall = 0;
};
// Full distance sort per point, k-th neighbour excluding self.
PR knn_precision_recall(const Matrix& real, const Matrix& generated, std::size_t k);

// rank = (#smaller) + (#equal + 1) / 2, then Pearson.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

// Plain dynamic-programming edit distance over code points.
std::size_t edit_distance(const std::u32string& a, const std::u32string& b);
std::u32string utf8_decode(const std::string& s);

// Linear scan over every entry and name variant with the documented ranking.
std::vector<std::int64_t> retrieve_ids(const std::vector<geoprofile::GazetteerEntry>& entries,
                                       const std::string& mention, std::size_t k);

// Same scan with every entry's name variants normalized once up front.
struct PreparedEntry {
  std::int64_t id = 0;
  std::int64_t population = 0;
  int class_rank = 2;
  std::vector<std::u32string> names;
};
std::vector<PreparedEntry> prepare(const std::vector<geoprofile::GazetteerEntry>& entries);
std::vector<std::int64_t> retrieve_ids(const std::vector<PreparedEntry>& entries, const std::string& mention,
                                       std::size_t k);

// votes[item][rater] in {0, 1}; complete ratings.
double fleiss_kappa(const std::vector<std::vector<int>>& votes);
// Mean over ordered rater pairs of 100 * both / marked_by_second.
std::optional<double> pairwise_agreement(const std::vector<std::vector<int>>& votes, int label);

}  // namespace oracle
