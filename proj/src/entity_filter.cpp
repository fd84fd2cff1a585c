#include "geoprofile/entity_filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

#include "geoprofile/binary_io.hpp"
#include "geoprofile/csv.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/random.hpp"
#include "geoprofile/text.hpp"

namespace geoprofile {

AnnotationMatrix::AnnotationMatrix(std::vector<std::string> items, std::vector<std::string> raters)
    : items_(std::move(items)), raters_(std::move(raters)), votes_(items_.size() * raters_.size(), Vote::kMissing) {}

AnnotationMatrix AnnotationMatrix::from_csv(std::istream& in) {
  const auto table = csv::read(in, "annotations");
  const auto c_item = table.column("record_id");
  const auto c_rater = table.column("rater_id");
  const auto c_vote = table.column("vote");

  std::vector<std::string> items, raters;
  std::unordered_map<std::string, std::size_t> item_pos, rater_pos;
  for (const auto& row : table.rows) {
    if (item_pos.emplace(row[c_item], items.size()).second) items.push_back(row[c_item]);
    if (rater_pos.emplace(row[c_rater], raters.size()).second) raters.push_back(row[c_rater]);
  }
  AnnotationMatrix m(std::move(items), std::move(raters));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto vote = trim(row[c_vote]);
    if (vote != "0" && vote != "1") {
      throw FormatError("annotations row " + std::to_string(r + 2) + ": vote must be 0 or 1");
    }
    const auto i = item_pos.at(row[c_item]);
    const auto j = rater_pos.at(row[c_rater]);
    if (m.at(i, j) != Vote::kMissing) {
      throw FormatError("annotations row " + std::to_string(r + 2) + ": duplicate vote by rater " + row[c_rater] +
                        " on " + row[c_item]);
    }
    m.set(i, j, vote == "1" ? Vote::kPresent : Vote::kAbsent);
  }
  return m;
}

AnnotationMatrix AnnotationMatrix::from_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return from_csv(in);
}

bool majority_label(std::span<const Vote> votes) {
  std::size_t present = 0, absent = 0;
  for (const auto v : votes) {
    if (v == Vote::kPresent) ++present;
    if (v == Vote::kAbsent) ++absent;
  }
  if (present + absent == 0) throw ParameterError("majority_label: every vote is missing");
  return present > absent;
}

std::optional<double> pairwise_agreement(const AnnotationMatrix& m, bool present) {
  if (m.raters() < 2) throw ParameterError("pairwise agreement needs at least two raters");
  const Vote c = present ? Vote::kPresent : Vote::kAbsent;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < m.raters(); ++i) {
    for (std::size_t j = 0; j < m.raters(); ++j) {
      if (i == j) continue;
      std::size_t both = 0, marked_by_j = 0;
      for (std::size_t item = 0; item < m.items(); ++item) {
        const Vote vi = m.at(item, i), vj = m.at(item, j);
        if (vi == Vote::kMissing || vj == Vote::kMissing) continue;
        if (vj == c) {
          ++marked_by_j;
          if (vi == c) ++both;
        }
      }
      if (marked_by_j == 0) continue;
      sum += 100.0 * static_cast<double>(both) / static_cast<double>(marked_by_j);
      ++pairs;
    }
  }
  if (pairs == 0) return std::nullopt;
  return sum / static_cast<double>(pairs);
}

std::optional<double> overall_agreement(const AnnotationMatrix& m) {
  const auto a0 = pairwise_agreement(m, false);
  const auto a1 = pairwise_agreement(m, true);
  if (!a0 || !a1) return std::nullopt;
  return (*a0 + *a1) / 2.0;
}

std::optional<double> fleiss_kappa(const AnnotationMatrix& m) {
  const std::size_t n_items = m.items();
  const std::size_t n = m.raters();
  if (n_items == 0) throw ParameterError("fleiss_kappa: no items");
  if (n < 2) throw ParameterError("fleiss_kappa: needs at least two raters");
  double p_bar = 0.0;
  double ones = 0.0;
  for (std::size_t item = 0; item < n_items; ++item) {
    double n1 = 0.0;
    for (const auto v : m.row(item)) {
      if (v == Vote::kMissing) throw ParameterError("fleiss_kappa: missing votes are not allowed");
      if (v == Vote::kPresent) n1 += 1.0;
    }
    const double n0 = static_cast<double>(n) - n1;
    p_bar += (n1 * n1 + n0 * n0 - static_cast<double>(n)) / static_cast<double>(n * (n - 1));
    ones += n1;
  }
  p_bar /= static_cast<double>(n_items);
  const double p1 = ones / static_cast<double>(n_items * n);
  const double p0 = 1.0 - p1;
  const double p_e = p0 * p0 + p1 * p1;
  if (p_e >= 1.0) {
    if (p_bar >= 1.0) return 1.0;
    return std::nullopt;
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

std::vector<std::size_t> stratified_sample(const std::vector<SampleItem>& items, std::size_t n_per_cell,
                                           std::uint64_t seed) {
  std::map<std::pair<std::string, IncomeGroup>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto* c = items[i].country;
    if (c == nullptr) continue;
    cells[{c->un_region, c->income_group}].push_back(i);
  }
  rng::Engine engine(seed);
  std::vector<std::size_t> chosen;
  for (auto& [cell, members] : cells) {
    const std::size_t take = std::min(n_per_cell, members.size());
    for (std::size_t k = 0; k < take; ++k) {
      const auto pick = k + rng::index(engine, members.size() - k);
      std::swap(members[k], members[pick]);
    }
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

double ClassifierModel::decision(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw DimensionError("feature has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(weights.size()));
  }
  double s = bias;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
  return s;
}

double ClassifierModel::decision(std::span<const float> x) const {
  if (x.size() != weights.size()) {
    throw DimensionError("feature has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(weights.size()));
  }
  double s = bias;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * static_cast<double>(x[i]);
  return s;
}

ClassifierModel train_classifier(const Eigen::MatrixXd& features, std::span<const int> labels,
                                 const TrainOptions& options) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw DimensionError("label count does not match feature rows");
  if (n < 2) throw TrainingError("training needs at least two examples");
  if (!(options.C > 0.0)) throw ParameterError("C must be positive");
  if (!(options.tolerance > 0.0)) throw ParameterError("tolerance must be positive");
  std::size_t positives = 0;
  for (const int l : labels) {
    if (l != 0 && l != 1) throw ParameterError("labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  if (positives == 0 || positives == n) throw TrainingError("training labels contain a single class");
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    if (std::abs(features.row(i).norm() - 1.0) > options.unit_norm_tolerance) {
      throw ParameterError("feature row " + std::to_string(i) + " is not unit-norm");
    }
  }

  const double C = options.C;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1.0 : -1.0;

  // Gram matrix when it fits comfortably; otherwise kernel columns on demand.
  constexpr std::size_t kGramLimit = 2000;
  Eigen::MatrixXd gram;
  if (n <= kGramLimit) gram = features * features.transpose();
  Eigen::VectorXd col_i(static_cast<Eigen::Index>(n)), col_j(static_cast<Eigen::Index>(n));
  const auto kernel_column = [&](std::size_t i, Eigen::VectorXd& out) {
    if (n <= kGramLimit) {
      out = gram.col(static_cast<Eigen::Index>(i));
    } else {
      out.noalias() = features * features.row(static_cast<Eigen::Index>(i)).transpose();
    }
  };
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = features.row(static_cast<Eigen::Index>(i)).squaredNorm();

  // Dual: min 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij, 0 <= a <= C, y'a = 0.
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  const auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0); };
  const auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C); };

  ClassifierModel model;
  model.C = C;
  model.tolerance = options.tolerance;
  model.converged = false;
  std::uint64_t iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i == n || j == n || g_max - g_min < options.tolerance) {
      model.converged = true;
      break;
    }

    kernel_column(i, col_i);
    kernel_column(j, col_j);
    const double k_ij = col_i[static_cast<Eigen::Index>(j)];
    const double old_i = alpha[i], old_j = alpha[j];
    constexpr double kTau = 1e-12;
    // Q_ii + Q_jj - 2 Q_ij in the raw kernel is the same for both label cases.
    double quad = diag[i] + diag[j] - 2.0 * k_ij;
    if (quad <= 0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double d_i = (alpha[i] - old_i) * y[i];
    const double d_j = (alpha[j] - old_j) * y[j];
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (col_i[static_cast<Eigen::Index>(t)] * d_i + col_j[static_cast<Eigen::Index>(t)] * d_j);
    }
  }
  model.iterations = iter;

  // Bias from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
  model.bias = -rho;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(features.cols());
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] != 0.0) w += alpha[t] * y[t] * features.row(static_cast<Eigen::Index>(t)).transpose();
  }
  model.weights.assign(w.data(), w.data() + w.size());
  return model;
}

bool predict_presence(const ClassifierModel& model, std::span<const double> feature) {
  return model.decision(feature) >= 0.0;
}

bool predict_presence(const ClassifierModel& model, std::span<const float> feature) {
  return model.decision(feature) >= 0.0;
}

double f1_score(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size()) throw ParameterError("f1_score: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == 1 && gold[i] == 1) ++tp;
    if (predicted[i] == 1 && gold[i] != 1) ++fp;
    if (predicted[i] != 1 && gold[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

namespace {
constexpr char kModelMagic[4] = {'G', 'P', 'S', 'V'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kModelMagic, 4);
  binary::Writer w(out);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.weights.size()));
  for (const double v : model.weights) w.f64(v);
  w.f64(model.bias);
  w.f64(model.C);
  w.f64(model.tolerance);
  w.u64(model.iterations);
  w.u8(model.converged ? 1 : 0);
  if (!out) throw IoError("write failed for " + path.string());
}

ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a classifier model file");
  }
  binary::Reader r(in);
  const auto version = r.u32();
  if (version != kModelVersion) throw FormatError(path.string() + ": unsupported model version");
  ClassifierModel m;
  m.weights.resize(r.u32());
  for (auto& v : m.weights) v = r.f64();
  m.bias = r.f64();
  m.C = r.f64();
  m.tolerance = r.f64();
  m.iterations = r.u64();
  m.converged = r.u8() != 0;
  return m;
}

}  // namespace geoprofile
