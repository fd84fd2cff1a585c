#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geoprofile/countries.hpp"

namespace geoprofile {

enum class Vote : std::int8_t { kMissing = -1, kAbsent = 0, kPresent = 1 };

// N items by m raters.
class AnnotationMatrix {
 public:
  AnnotationMatrix(std::vector<std::string> items, std::vector<std::string> raters);

  // CSV `record_id,rater_id,vote` with vote in {0,1}. Items and raters keep
  // first-appearance order. Duplicate (item, rater) pairs are a FormatError.
  static AnnotationMatrix from_csv(std::istream& in);
  static AnnotationMatrix from_csv_file(const std::filesystem::path& path);

  std::size_t items() const { return items_.size(); }
  std::size_t raters() const { return raters_.size(); }
  const std::vector<std::string>& item_ids() const { return items_; }
  const std::vector<std::string>& rater_ids() const { return raters_; }

  Vote at(std::size_t item, std::size_t rater) const { return votes_[item * raters_.size() + rater]; }
  void set(std::size_t item, std::size_t rater, Vote v) { votes_[item * raters_.size() + rater] = v; }
  std::span<const Vote> row(std::size_t item) const { return {votes_.data() + item * raters_.size(), raters_.size()}; }

 private:
  std::vector<std::string> items_;
  std::vector<std::string> raters_;
  std::vector<Vote> votes_;
};

// Strict majority of the non-missing votes; a tie is absent. Throws
// ParameterError when every vote is missing.
bool majority_label(std::span<const Vote> votes);

// Mean over ordered rater pairs (i, j) of 100 * A_ij / N_j, where A_ij counts
// items both mark `present` (or both mark absent, for present = false) and N_j
// counts items j marks that way; only items both raters voted on count.
// Pairs with N_j = 0 are left out; nullopt when no pair is left.
std::optional<double> pairwise_agreement(const AnnotationMatrix& m, bool present);

// Mean of the two class-wise agreements (nullopt if either is undefined).
std::optional<double> overall_agreement(const AnnotationMatrix& m);

// Fleiss' kappa for two categories. Requires complete ratings (ParameterError
// otherwise). When chance agreement is 1, kappa is 1 if observed agreement is
// also 1 and undefined (nullopt) otherwise.
std::optional<double> fleiss_kappa(const AnnotationMatrix& m);

struct SampleItem {
  std::string record_id;
  const CanonicalCountry* country = nullptr;  // records without a country are never drawn
};

// Up to n_per_cell records from every non-empty (un_region, income group)
// cell, drawn with a seeded partial shuffle. Returns input positions,
// ascending.
std::vector<std::size_t> stratified_sample(const std::vector<SampleItem>& items, std::size_t n_per_cell,
                                           std::uint64_t seed);

struct TrainOptions {
  double C = 1.0;
  double tolerance = 1e-4;             // maximal KKT violation at termination
  std::uint64_t max_iterations = 10'000'000;
  double unit_norm_tolerance = 1e-6;
};

struct ClassifierModel {
  std::vector<double> weights;
  double bias = 0.0;
  double C = 1.0;
  double tolerance = 1e-4;
  std::uint64_t iterations = 0;
  bool converged = true;

  std::size_t feature_dim() const { return weights.size(); }
  double decision(std::span<const double> x) const;
  double decision(std::span<const float> x) const;
};

// Soft-margin linear SVM, dual solved by SMO with maximal-violating-pair
// selection. Rows of `features` must be unit-norm; labels are 0/1. Throws
// TrainingError for fewer than two rows or a single class, ParameterError for
// non-normalized rows or C <= 0.
ClassifierModel train_classifier(const Eigen::MatrixXd& features, std::span<const int> labels,
                                 const TrainOptions& options = {});

// w.x + b >= 0. Throws DimensionError on a length mismatch.
bool predict_presence(const ClassifierModel& model, std::span<const double> feature);
bool predict_presence(const ClassifierModel& model, std::span<const float> feature);

// Positive-class F1. 0 when there are no true positives.
double f1_score(std::span<const int> predicted, std::span<const int> gold);

// "GPSV" | version u32 | d u32 | w f64[d] | b f64 | C f64 | tolerance f64 |
// iterations u64 | converged u8.
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace geoprofile
