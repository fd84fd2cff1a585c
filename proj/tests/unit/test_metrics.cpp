#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "generators.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/metrics.hpp"
#include "oracles.hpp"

using namespace geoprofile;

namespace {

EmbeddingSet set_of(const Eigen::MatrixXd& m) { return EmbeddingSet::from_rows(m); }

Eigen::MatrixXd random_orthogonal(gen::Engine& e, std::size_t d) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gen::gaussian(e, d, d));
  return qr.householderQ();
}

// Two modes on the sphere: rows near +a and near +b, a and b orthogonal.
Eigen::MatrixXd two_modes(gen::Engine& e, std::size_t per_mode, std::size_t d, double spread) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(2 * per_mode), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < 2 * per_mode; ++i) {
    Eigen::VectorXd v = spread * gen::gaussian(e, 1, d).row(0).transpose();
    v(i < per_mode ? 0 : 1) += 1.0;
    m.row(static_cast<Eigen::Index>(i)) = v.normalized().transpose();
  }
  return m;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("vendi closed forms") {
    Eigen::MatrixXd same(5, 3);
    for (int i = 0; i < 5; ++i) same.row(i) << 0.6, 0.8, 0;
    CHECK(std::abs(vendi_score(set_of(same)) - 1.0) < 1e-9);
    for (std::size_t n : {1u, 2u, 7u, 20u}) {
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), 32);
      CHECK(std::abs(vendi_score(set_of(eye)) - static_cast<double>(n)) < 1e-9);
    }
    Eigen::MatrixXd pair(2, 2);
    pair << 1, 0, 0.5, std::sqrt(3.0) / 2;
    const double want = std::exp(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25)));
    CHECK(std::abs(vendi_score(set_of(pair)) - want) < 1e-9);
    CHECK(std::abs(want - 1.7548) < 1e-4);
  }

  TEST_CASE("vendi from a spectrum") {
    Eigen::VectorXd ev(4);
    ev << 0.5, 0.5, 0.0, -1e-16;
    CHECK(std::abs(vendi_from_eigenvalues(ev) - 2.0) < 1e-12);
  }

  TEST_CASE("vendi errors and renormalization") {
    CHECK_THROWS_AS(vendi_score(EmbeddingSet{}), ParameterError);
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 3);
    CHECK_THROWS_AS(EmbeddingSet::from_rows(zero), ParameterError);
    Eigen::MatrixXd raw(2, 2);
    raw << 3, 4, 0, 2;
    bool renorm = false;
    const auto s = EmbeddingSet::from_rows(raw, "x", &renorm);
    CHECK(renorm);
    CHECK(std::abs(s.vectors.row(0).norm() - 1.0) < 1e-12);
    CHECK(s.label == "x");
    Eigen::MatrixXd unit(1, 2);
    unit << 0.6, 0.8;
    renorm = true;
    EmbeddingSet::from_rows(unit, "", &renorm);
    CHECK_FALSE(renorm);
  }

  TEST_CASE("property: both spectral paths match the Jacobi oracle") {
    gen::Engine e(31);
    for (int t = 0; t < 25; ++t) {
      const auto n = gen::between(e, 1, 40), d = gen::between(e, 1, 12);
      const Eigen::MatrixXd x = gen::unit_rows(gen::gaussian(e, n, d));
      const double k = vendi_score_kernel(x), g = vendi_score_gram(x), o = oracle::vendi(gen::to_rows(x));
      CHECK(std::abs(k - g) < 1e-8);
      CHECK(std::abs(k - o) < 1e-8);
      CHECK(std::abs(vendi_score(set_of(x)) - o) < 1e-8);
      CHECK(k >= 1.0 - 1e-9);
      CHECK(k <= static_cast<double>(n) + 1e-9);
    }
  }

  TEST_CASE("property: vendi invariant under row permutation and rotation") {
    gen::Engine e(8);
    for (int t = 0; t < 20; ++t) {
      const auto n = gen::between(e, 2, 60), d = gen::between(e, 2, 10);
      const Eigen::MatrixXd x = gen::unit_rows(gen::gaussian(e, n, d));
      const double base = vendi_score(set_of(x));
      Eigen::PermutationMatrix<Eigen::Dynamic> p(static_cast<Eigen::Index>(n));
      p.setIdentity();
      for (Eigen::Index i = p.size() - 1; i > 0; --i)
        std::swap(p.indices()[i], p.indices()[static_cast<Eigen::Index>(rng::index(e, static_cast<std::uint64_t>(i) + 1))]);
      CHECK(std::abs(vendi_score(set_of(p * x)) - base) < 1e-9);
      const Eigen::MatrixXd q = random_orthogonal(e, d);
      CHECK(std::abs(vendi_score(set_of(x * q)) - base) < 1e-9);
    }
  }

  TEST_CASE("subsample") {
    gen::Engine e(3);
    const auto s = set_of(gen::unit_rows(gen::gaussian(e, 50, 4)));
    CHECK(subsample(s, 100, 1).size() == 50);
    const auto a = subsample(s, 10, 1);
    CHECK(a.size() == 10);
    CHECK(a.vectors == subsample(s, 10, 1).vectors);
    // order preserved: every picked row appears later than the previous one
    Eigen::Index last = -1;
    for (Eigen::Index i = 0; i < a.vectors.rows(); ++i) {
      Eigen::Index found = -1;
      for (Eigen::Index j = 0; j < s.vectors.rows(); ++j)
        if (s.vectors.row(j) == a.vectors.row(i)) found = j;
      CHECK(found > last);
      last = found;
    }
  }

  TEST_CASE("diversity ratio") {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
    Eigen::MatrixXd same(4, 4);
    for (int i = 0; i < 4; ++i) same.row(i) = eye.row(0);
    CHECK(std::abs(diversity_ratio(set_of(eye), set_of(eye)) - 1.0) < 1e-12);
    CHECK(std::abs(diversity_ratio(set_of(eye), set_of(same)) - 4.0) < 1e-9);
    // two copies each of e1, e2: spectrum {1/2, 1/2}
    Eigen::MatrixXd half(4, 4);
    half << eye.row(0), eye.row(0), eye.row(1), eye.row(1);
    CHECK(std::abs(diversity_ratio(set_of(eye), set_of(half)) - 2.0) < 1e-6);
  }

  TEST_CASE("average ranks") {
    const std::vector<double> v{10, 20, 20, 5, 20};
    CHECK(average_ranks(v) == std::vector<double>{2, 4, 4, 1, 4});
  }

  TEST_CASE("spearman examples") {
    const std::vector<double> x{1, 2, 3, 4, 5}, sq{1, 4, 9, 16, 25}, rev{5, 4, 3, 2, 1};
    CHECK(*spearman(x, sq).rho == 1.0);
    CHECK(*spearman(x, rev).rho == -1.0);
    const std::vector<double> y8{2, 1, 4, 3, 5}, y7{3, 1, 2, 4, 5};
    CHECK(std::abs(*spearman(x, y8).rho - 0.8) < 1e-15);
    CHECK(std::abs(*spearman(x, y7).rho - 0.7) < 1e-15);
    // two-sided t approximation, df = 3; reference value from an independent statistics package
    CHECK(std::abs(*spearman(x, y7).p_value - 0.1881204043741873) < 1e-9);
    const std::vector<double> tx{1, 2, 2, 3}, ty{1, 3, 2, 4};
    const auto tied = spearman(tx, ty);
    CHECK(std::abs(*tied.rho - 0.9486832980505139) < 1e-12);
    CHECK(std::abs(*tied.p_value - 0.05131670194948612) < 1e-9);
    CHECK(tied.n == 4);
  }

  TEST_CASE("spearman degenerate input") {
    const std::vector<double> x{1, 2, 3}, c{4, 4, 4}, two{1, 2};
    const auto r = spearman(x, c);
    CHECK_FALSE(r.rho.has_value());
    CHECK_FALSE(r.p_value.has_value());
    CHECK_THROWS_AS(spearman(two, two), ParameterError);
    CHECK_THROWS_AS(spearman(x, two), ParameterError);
  }

  TEST_CASE("spearman permutation p-value") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8}, y{2, 1, 4, 3, 6, 5, 8, 7};
    SpearmanOptions o;
    o.mode = PValueMode::kPermutation;
    o.permutations = 4000;
    o.seed = 5;
    const auto a = spearman(x, y, o), b = spearman(x, y, o);
    CHECK(*a.p_value == *b.p_value);
    CHECK(*a.p_value > 0.0);
    CHECK(*a.p_value < 0.05);
    const auto t = spearman(x, y);
    CHECK(std::abs(*a.p_value - *t.p_value) < 0.03);
  }

  TEST_CASE("property: spearman matches brute force on tied data and is monotone invariant") {
    gen::Engine e(12);
    for (int t = 0; t < 300; ++t) {
      const auto n = gen::between(e, 3, 25);
      std::vector<double> x, y;
      for (std::size_t i = 0; i < n; ++i) {
        x.push_back(static_cast<double>(rng::index(e, 6)));
        y.push_back(static_cast<double>(rng::index(e, 6)));
      }
      const auto got = spearman(x, y).rho;
      const auto want = oracle::spearman(x, y);
      REQUIRE(got.has_value() == want.has_value());
      if (!got) continue;
      CHECK(std::abs(*got - *want) < 1e-12);
      std::vector<double> fx;
      for (double v : x) fx.push_back(std::exp(v) * 3 - 7);
      CHECK(std::abs(*spearman(fx, y).rho - *got) < 1e-12);
    }
  }

  TEST_CASE("misalignment examples") {
    CountryDistribution d{{{"A", 8}, {"B", 2}}}, ref{{{"A", 4}, {"B", 6}}};
    const auto rep = misalignment(d, ref, 1.5);
    CHECK(rep.over == std::set<std::string>{"A"});
    CHECK(rep.under == std::set<std::string>{"B"});
    CHECK(std::abs(rep.ratios.at("A") - 2.0) < 1e-12);
    CHECK(std::abs(rep.ratios.at("B") - 1.0 / 3.0) < 1e-12);
    CHECK(rep.percent_over == 50.0);
    CHECK(rep.percent_under == 50.0);

    const auto same = misalignment(ref, ref);
    CHECK(same.over.empty());
    CHECK(same.under.empty());

    CountryDistribution missing{{{"A", 5}, {"Z", 5}}};
    const auto m = misalignment(missing, ref);
    CHECK(m.under.count("B"));
    CHECK(m.ratios.at("B") == 0.0);
    CHECK(m.excluded == std::set<std::string>{"Z"});
    CHECK(m.reference_countries == 2);
  }

  TEST_CASE("misalignment threshold edges and errors") {
    CountryDistribution ref{{{"A", 1}, {"B", 1}}};
    // ratios 1.5 and 0.5: exactly r is over, exactly 1/r is not under
    CountryDistribution d{{{"A", 3}, {"B", 1}}};
    const auto rep = misalignment(d, ref, 1.5);
    CHECK(rep.over == std::set<std::string>{"A"});
    CHECK(rep.under == std::set<std::string>{"B"});
    const auto two = misalignment(d, ref, 2.0);
    CHECK(two.over.empty());
    CHECK(two.under.empty());
    CHECK_THROWS_AS(misalignment(d, ref, 1.0), ParameterError);
    CHECK_THROWS_AS(misalignment(CountryDistribution{}, ref), ParameterError);
    CHECK_THROWS_AS(misalignment(d, CountryDistribution{{{"A", 0}}}), ParameterError);
  }

  TEST_CASE("property: misalignment matches brute force and ignores scale") {
    gen::Engine e(19);
    for (int t = 0; t < 200; ++t) {
      CountryDistribution d, ref;
      for (const auto& c : gen::country_codes()) {
        if (rng::index(e, 5)) d.counts[c] = static_cast<double>(rng::index(e, 100));
        if (rng::index(e, 5)) ref.counts[c] = static_cast<double>(rng::index(e, 100));
      }
      if (d.total() <= 0 || ref.total() <= 0) continue;
      const auto rep = misalignment(d, ref);
      const auto want = oracle::misalignment(d.counts, ref.counts, 1.5);
      CHECK(rep.over == want.over);
      CHECK(rep.under == want.under);
      for (const auto& c : rep.over) CHECK_FALSE(rep.under.count(c));
      CountryDistribution scaled = d;
      for (auto& [c, v] : scaled.counts) v *= 4;
      const auto s = misalignment(scaled, ref);
      CHECK(s.over == rep.over);
      CHECK(s.under == rep.under);
    }
  }

  TEST_CASE("knn precision/recall examples") {
    gen::Engine e(2);
    const auto real = set_of(gen::unit_rows(gen::gaussian(e, 60, 8)));
    const auto pr = knn_precision_recall(real, real, 3);
    CHECK(pr.precision == 1.0);
    CHECK(pr.recall == 1.0);

    Eigen::MatrixXd a = gen::gaussian(e, 40, 4) * 0.01, b = gen::gaussian(e, 40, 4) * 0.01;
    a.col(0).array() += 1.0;
    b.col(0).array() -= 1.0;
    const auto far = knn_precision_recall(set_of(a), set_of(b), 3);
    CHECK(far.precision == 0.0);
    CHECK(far.recall == 0.0);
  }

  TEST_CASE("knn precision/recall on a subset of one mode") {
    gen::Engine e(44);
    const Eigen::MatrixXd real = two_modes(e, 100, 6, 0.15);
    Eigen::MatrixXd gen_rows(40, 6);
    for (Eigen::Index i = 0; i < 40; ++i) {
      Eigen::VectorXd v = 0.05 * gen::gaussian(e, 1, 6).row(0).transpose();
      v(0) += 1.0;
      gen_rows.row(i) = v.normalized().transpose();
    }
    const auto pr = knn_precision_recall(set_of(real), set_of(gen_rows), 3);
    const auto want = oracle::knn_precision_recall(gen::to_rows(real), gen::to_rows(gen_rows), 3);
    CHECK(pr.precision == want.precision);
    CHECK(pr.recall == want.recall);
    CHECK(pr.precision >= 0.9);
    CHECK(pr.recall <= 0.5 + 0.05);
  }

  TEST_CASE("property: knn matches the brute-force oracle and is symmetric") {
    gen::Engine e(6);
    for (int t = 0; t < 12; ++t) {
      const auto n = gen::between(e, 8, 80), m = gen::between(e, 8, 80), d = gen::between(e, 2, 8);
      const Eigen::MatrixXd x = gen::unit_rows(gen::gaussian(e, n, d)), y = gen::unit_rows(gen::gaussian(e, m, d));
      for (std::size_t k : {1u, 3u, 5u}) {
        const auto got = knn_precision_recall(set_of(x), set_of(y), k);
        const auto want = oracle::knn_precision_recall(gen::to_rows(x), gen::to_rows(y), k);
        CHECK(got.precision == want.precision);
        CHECK(got.recall == want.recall);
        const auto swapped = knn_precision_recall(set_of(y), set_of(x), k);
        CHECK(swapped.recall == got.precision);
        CHECK(swapped.precision == got.recall);
      }
    }
  }

  TEST_CASE("knn errors and helpers") {
    const Eigen::MatrixXd three = Eigen::MatrixXd::Identity(3, 3), four = Eigen::MatrixXd::Identity(4, 4);
    CHECK_THROWS_AS(knn_precision_recall(set_of(three), set_of(three), 3), ParameterError);
    CHECK_THROWS_AS(knn_precision_recall(set_of(four), set_of(three), 1), DimensionError);
    const auto radii = knn_radii(four, 1);
    for (double r : radii) CHECK(std::abs(r - std::sqrt(2.0)) < 1e-12);
    const std::vector<double> tiny(4, 0.1);
    CHECK(coverage(four, tiny, four) == 1.0);
    CHECK(coverage(four, tiny, -four) == 0.0);
  }
}
