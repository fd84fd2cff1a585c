#include "geoprofile/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "geoprofile/error.hpp"
#include "geoprofile/random.hpp"

namespace geoprofile {

EmbeddingSet EmbeddingSet::from_rows(Eigen::MatrixXd rows, std::string label, bool* renormalized) {
  bool changed = false;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    if (!(norm > 0.0)) throw ParameterError("embedding row " + std::to_string(i) + " has zero norm");
    if (std::abs(norm - 1.0) > 1e-6) changed = true;
    rows.row(i) /= norm;
  }
  if (renormalized != nullptr) *renormalized = changed;
  return EmbeddingSet{std::move(rows), std::move(label)};
}

double vendi_from_eigenvalues(const Eigen::VectorXd& eigenvalues) {
  // Fixed ascending order so the sum does not depend on the solver path.
  std::vector<double> ev(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  std::sort(ev.begin(), ev.end());
  double entropy = 0.0;
  for (const double l : ev) {
    if (l > 0.0) entropy -= l * std::log(l);
  }
  return std::exp(entropy);
}

double vendi_score_kernel(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw ParameterError("vendi score of an empty set");
  const Eigen::MatrixXd k = (x * x.transpose()) / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k, Eigen::EigenvaluesOnly);
  return vendi_from_eigenvalues(solver.eigenvalues());
}

double vendi_score_gram(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw ParameterError("vendi score of an empty set");
  const Eigen::MatrixXd g = (x.transpose() * x) / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
  return vendi_from_eigenvalues(solver.eigenvalues());
}

double vendi_score(const EmbeddingSet& s) {
  if (s.size() == 0) throw ParameterError("vendi score of an empty set");
  return s.size() > s.dim() ? vendi_score_gram(s.vectors) : vendi_score_kernel(s.vectors);
}

EmbeddingSet subsample(const EmbeddingSet& s, std::size_t cap, std::uint64_t seed) {
  if (s.size() <= cap) return s;
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng::Engine engine(seed);
  for (std::size_t k = 0; k < cap; ++k) std::swap(idx[k], idx[k + rng::index(engine, idx.size() - k)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  EmbeddingSet out;
  out.label = s.label;
  out.vectors.resize(static_cast<Eigen::Index>(cap), s.vectors.cols());
  for (std::size_t r = 0; r < cap; ++r) out.vectors.row(static_cast<Eigen::Index>(r)) = s.vectors.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

double diversity_ratio(const EmbeddingSet& real, const EmbeddingSet& generated) {
  return vendi_score(real) / vendi_score(generated);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
    i = j;
  }
  return ranks;
}

namespace {

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

SpearmanResult spearman(std::span<const double> x, std::span<const double> y, const SpearmanOptions& options) {
  if (x.size() != y.size()) throw ParameterError("spearman: sequences differ in length");
  if (x.size() < 3) throw ParameterError("spearman: needs at least 3 pairs");
  SpearmanResult out;
  out.n = x.size();
  const auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  out.rho = pearson(rx, ry);
  if (!out.rho) return out;
  const double rho = *out.rho;

  if (options.mode == PValueMode::kTApproximation) {
    if (std::abs(rho) >= 1.0) {
      out.p_value = 0.0;  // t is infinite
      return out;
    }
    const double df = static_cast<double>(out.n - 2);
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    const boost::math::students_t dist(df);
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    return out;
  }

  rng::Engine engine(options.seed);
  std::size_t extreme = 0;
  for (std::size_t p = 0; p < options.permutations; ++p) {
    for (std::size_t i = ry.size() - 1; i > 0; --i) std::swap(ry[i], ry[rng::index(engine, i + 1)]);
    const auto r = pearson(rx, ry);
    if (r && std::abs(*r) >= std::abs(rho) - 1e-12) ++extreme;
  }
  out.p_value = static_cast<double>(extreme + 1) / static_cast<double>(options.permutations + 1);
  return out;
}

double CountryDistribution::total() const {
  double t = 0.0;
  for (const auto& [country, c] : counts) t += c;
  return t;
}

MisalignmentReport misalignment(const CountryDistribution& dataset, const CountryDistribution& reference, double r) {
  if (!(r > 1.0)) throw ParameterError("misalignment threshold r must exceed 1");
  const double data_total = dataset.total();
  const double ref_total = reference.total();
  if (!(data_total > 0.0)) throw ParameterError("dataset distribution is empty");
  if (!(ref_total > 0.0)) throw ParameterError("reference distribution is empty");
  for (const auto& [c, v] : dataset.counts) {
    if (v < 0) throw ParameterError("negative dataset count for " + c);
  }

  MisalignmentReport rep;
  rep.r = r;
  for (const auto& [country, value] : reference.counts) {
    if (value < 0) throw ParameterError("negative reference value for " + country);
    if (value == 0) continue;
    ++rep.reference_countries;
    const double p_ref = value / ref_total;
    const auto it = dataset.counts.find(country);
    const double p_data = it == dataset.counts.end() ? 0.0 : it->second / data_total;
    const double ratio = p_data / p_ref;
    rep.ratios[country] = ratio;
    if (ratio >= r) rep.over.insert(country);
    else if (ratio < 1.0 / r) rep.under.insert(country);
  }
  for (const auto& [country, c] : dataset.counts) {
    if (!rep.ratios.contains(country)) rep.excluded.insert(country);
  }
  if (rep.reference_countries > 0) {
    const double n = static_cast<double>(rep.reference_countries);
    rep.percent_over = 100.0 * static_cast<double>(rep.over.size()) / n;
    rep.percent_under = 100.0 * static_cast<double>(rep.under.size()) / n;
  }
  return rep;
}

std::vector<double> knn_radii(const Eigen::MatrixXd& points, std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n <= k) throw ParameterError("k-NN radius needs more than k points");
  std::vector<double> radii(n);
  std::vector<double> dist(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[w++] = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    radii[i] = dist[k - 1];
  }
  return radii;
}

double coverage(const Eigen::MatrixXd& points, std::span<const double> radii, const Eigen::MatrixXd& queries) {
  if (queries.rows() == 0) return 0.0;
  std::size_t covered = 0;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if ((queries.row(q) - points.row(i)).norm() <= radii[static_cast<std::size_t>(i)]) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(queries.rows());
}

PrecisionRecall knn_precision_recall(const EmbeddingSet& real, const EmbeddingSet& generated, std::size_t k) {
  if (k == 0) throw ParameterError("k must be positive");
  if (real.size() <= k || generated.size() <= k) throw ParameterError("k-NN precision/recall needs more than k points per set");
  if (real.dim() != generated.dim()) throw DimensionError("real and generated embeddings differ in dimension");
  const auto real_radii = knn_radii(real.vectors, k);
  const auto gen_radii = knn_radii(generated.vectors, k);
  return PrecisionRecall{coverage(real.vectors, real_radii, generated.vectors),
                         coverage(generated.vectors, gen_radii, real.vectors)};
}

}  // namespace geoprofile
