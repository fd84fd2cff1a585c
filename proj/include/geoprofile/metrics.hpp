#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geoprofile {

// Rows are unit vectors.
struct EmbeddingSet {
  Eigen::MatrixXd vectors;
  std::string label;

  std::size_t size() const { return static_cast<std::size_t>(vectors.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }

  // Normalizes every row to unit length. Sets *renormalized when any row
  // was off by more than 1e-6. Throws ParameterError on a zero row.
  static EmbeddingSet from_rows(Eigen::MatrixXd rows, std::string label = {}, bool* renormalized = nullptr);
};

// exp of the Shannon entropy of the eigenvalues of K/N, K the cosine kernel.
// Uses the d x d surrogate X'X/N when N > d. Result lies in [1, N]. Throws
// ParameterError when empty.
double vendi_score(const EmbeddingSet& s);
// The two spectral paths, exposed for cross-checking.
double vendi_score_kernel(const Eigen::MatrixXd& unit_rows);
double vendi_score_gram(const Eigen::MatrixXd& unit_rows);
// Entropy exponential of a spectrum; non-positive values contribute nothing.
double vendi_from_eigenvalues(const Eigen::VectorXd& eigenvalues);

// At most `cap` rows drawn without replacement (seeded); the set itself when
// it is already small enough. Row order is preserved.
EmbeddingSet subsample(const EmbeddingSet& s, std::size_t cap, std::uint64_t seed);

// vendi(real) / vendi(generated).
double diversity_ratio(const EmbeddingSet& real, const EmbeddingSet& generated);

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> v);

enum class PValueMode { kTApproximation, kPermutation };

struct SpearmanResult {
  std::optional<double> rho;      // nullopt when either input is constant
  std::optional<double> p_value;  // two-sided
  std::size_t n = 0;
};

struct SpearmanOptions {
  PValueMode mode = PValueMode::kTApproximation;
  std::size_t permutations = 10000;
  std::uint64_t seed = 0;
};

// Pearson correlation of average ranks. Throws ParameterError for unequal
// lengths or n < 3.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y, const SpearmanOptions& options = {});

// Country name -> count.
struct CountryDistribution {
  std::map<std::string, double> counts;
  double total() const;
};

struct MisalignmentReport {
  double r = 1.5;
  std::map<std::string, double> ratios;  // every reference country with positive mass
  std::set<std::string> over;
  std::set<std::string> under;
  std::set<std::string> excluded;  // dataset countries without positive reference mass
  std::size_t reference_countries = 0;
  double percent_over = 0.0;   // relative to reference_countries
  double percent_under = 0.0;
};

// ratio = p_data / p_ref; over when ratio >= r, under when ratio < 1/r.
// Throws ParameterError when r <= 1 or either total is not positive.
MisalignmentReport misalignment(const CountryDistribution& dataset, const CountryDistribution& reference,
                                double r = 1.5);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// k-NN manifold coverage. A point is covered by a set when it lies within
// the k-th nearest neighbour distance (self excluded) of some member.
// precision = covered fraction of `generated` by `real`; recall the reverse.
// Throws ParameterError when either set has k or fewer rows, DimensionError
// on mismatched dimensions.
PrecisionRecall knn_precision_recall(const EmbeddingSet& real, const EmbeddingSet& generated, std::size_t k = 3);

// k-th nearest neighbour distance of every row within its own set.
std::vector<double> knn_radii(const Eigen::MatrixXd& points, std::size_t k);
// Fraction of `queries` inside some ball (points[i], radii[i]).
double coverage(const Eigen::MatrixXd& points, std::span<const double> radii, const Eigen::MatrixXd& queries);

}  // namespace geoprofile
