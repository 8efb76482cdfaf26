#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dilab/error.hpp"
#include "dilab/gmm.hpp"
#include "dilab/kmeans.hpp"
#include "dilab/rng.hpp"

using namespace dilab;

namespace {

// Direct sum of weighted densities, no log-sum-exp.
double naive_log_density(const ClassMixture& m, const Eigen::RowVectorXd& x) {
  double p = 0.0;
  for (int k = 0; k < m.components(); ++k) {
    double dens = m.weights(k);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double v = m.variances(k, j);
      const double z = x(j) - m.means(k, j);
      dens *= std::exp(-0.5 * z * z / v) / std::sqrt(2.0 * std::numbers::pi * v);
    }
    p += dens;
  }
  return std::log(p);
}

LabeledSet gaussian_clusters(Rng& rng, const Matrix& centers, double sd, int n, int label = 0) {
  LabeledSet out(static_cast<int>(centers.cols()));
  Matrix x(n, centers.cols());
  for (int i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(centers.rows())));
    for (Eigen::Index j = 0; j < centers.cols(); ++j) x(i, j) = centers(c, j) + sd * rng.normal();
  }
  return LabeledSet(x, std::vector<int>(static_cast<std::size_t>(n), label));
}

GmmGenerator random_generator(Rng& rng, int classes, int k, int d) {
  GmmGenerator gen;
  gen.dim = d;
  for (int c = 0; c < classes; ++c) {
    ClassMixture m;
    m.weights = Vector(k);
    for (int i = 0; i < k; ++i) m.weights(i) = 0.2 + rng.uniform();
    m.weights /= m.weights.sum();
    m.means = Matrix(k, d);
    m.variances = Matrix(k, d);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < d; ++j) {
        m.means(i, j) = 3.0 * rng.normal();
        m.variances(i, j) = 0.3 + rng.uniform();
      }
    gen.classes.push_back(m);
  }
  return gen;
}

}  // namespace

TEST_CASE("K=1 fit on two points is the closed-form MLE") {
  Matrix x(2, 2);
  x << 0, 0, 2, 2;
  const GmmFit fit = fit_em(LabeledSet(x, {0, 0}), 1, FitConfig{});
  const ClassMixture& m = fit.generator.classes[0];
  CHECK(m.weights(0) == 1.0);
  CHECK(std::abs(m.means(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(m.means(0, 1) - 1.0) < 1e-12);
  CHECK(std::abs(m.variances(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(m.variances(0, 1) - 1.0) < 1e-12);
}

TEST_CASE("K=1 fits match closed-form moments on random data") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + trial % 4;
    Matrix x(150, d);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (int j = 0; j < d; ++j) x(i, j) = (j + 1) * rng.normal() + j;
    std::vector<int> y(150);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
    const LabeledSet data(x, y);
    FitConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const GmmFit fit = fit_em(data, 2, cfg);
    for (int c = 0; c < 2; ++c) {
      const auto rows = data.rows_with_label(c);
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
      for (auto r : rows) mean += x.row(r);
      mean /= static_cast<double>(rows.size());
      Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
      for (auto r : rows) var += (x.row(r) - mean).array().square().matrix();
      var /= static_cast<double>(rows.size());
      const ClassMixture& m = fit.generator.classes[static_cast<std::size_t>(c)];
      CHECK((m.means.row(0) - mean).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((m.variances.row(0) - var).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("K=2 recovers two clusters at +-5") {
  Rng rng(12);
  Matrix centers(2, 1);
  centers << -5.0, 5.0;
  const LabeledSet data = gaussian_clusters(rng, centers, 0.5, 200);
  FitConfig cfg;
  cfg.components = 2;
  cfg.seed = 3;
  const ClassMixture m = fit_em(data, 1, cfg).generator.classes[0];

  // Brute-force two-means oracle: split at zero and average each side.
  double lo = 0, hi = 0;
  int nlo = 0, nhi = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double v = data.features(i, 0);
    if (v < 0) { lo += v; ++nlo; } else { hi += v; ++nhi; }
  }
  lo /= nlo;
  hi /= nhi;
  const int a = m.means(0, 0) < m.means(1, 0) ? 0 : 1;
  const int b = 1 - a;
  CHECK(std::abs(m.means(a, 0) - lo) < 0.05);
  CHECK(std::abs(m.means(b, 0) - hi) < 0.05);
  CHECK(std::abs(m.means(a, 0) + 5.0) < 0.3);
  CHECK(std::abs(m.means(b, 0) - 5.0) < 0.3);
  CHECK(std::abs(m.weights(a) - 0.5) < 0.1);
  CHECK(std::abs(m.weights(a) - static_cast<double>(nlo) / data.size()) < 1e-3);
}

TEST_CASE("EM log-likelihood is monotone on random instances") {
  Rng rng(2718);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(3));
    const int d = rng.below(2) == 0 ? 2 : 5;
    Matrix centers(3, d);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < d; ++j) centers(i, j) = 2.0 * rng.normal();
    const LabeledSet data = gaussian_clusters(rng, centers, 1.0, 300);
    FitConfig cfg;
    cfg.components = k;
    cfg.seed = rng.next();
    cfg.tolerance = 1e-10;
    const GmmFit fit = fit_em(data, 1, cfg);
    const auto& ll = fit.traces[0].log_likelihood;
    REQUIRE(ll.size() >= 1);
    for (std::size_t i = 1; i < ll.size(); ++i) CHECK(ll[i] >= ll[i - 1] - 1e-9);
    const ClassMixture& m = fit.generator.classes[0];
    CHECK(std::abs(m.weights.sum() - 1.0) < 1e-9);
    CHECK(m.weights.minCoeff() >= 0.0);
    CHECK(m.variances.minCoeff() >= cfg.ridge);
    // The reported trace ends at the fitted parameters.
    CHECK(std::abs(log_likelihood(fit.generator, data) - ll.back()) < 1e-9);
  }
}

TEST_CASE("duplicated points are held at the ridge floor") {
  Matrix x = Matrix::Constant(6, 2, 1.5);
  FitConfig cfg;
  cfg.ridge = 1e-4;
  const ClassMixture m = fit_em(LabeledSet(x, std::vector<int>(6, 0)), 1, cfg).generator.classes[0];
  CHECK(m.variances(0, 0) == 1e-4);
  CHECK(m.variances(0, 1) == 1e-4);
}

TEST_CASE("too few samples for K is a validation error suggesting smaller K") {
  Matrix x(3, 2);
  x.setRandom();
  FitConfig cfg;
  cfg.components = 2;
  try {
    fit_em(LabeledSet(x, {0, 0, 1}), 2, cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("smaller") != std::string::npos);
  }
}

TEST_CASE("log-likelihood: standard normal at the mode") {
  GmmGenerator gen;
  gen.dim = 1;
  gen.classes.push_back({Vector::Ones(1), Matrix::Zero(1, 1), Matrix::Ones(1, 1)});
  Matrix x = Matrix::Zero(1, 1);
  CHECK(log_likelihood(gen, LabeledSet(x, {0})) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(log_likelihood(gen, LabeledSet(x, {0})) == doctest::Approx(-0.918939).epsilon(1e-6));
}

TEST_CASE("log-likelihood: naive oracle and translation invariance") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 4;
    GmmGenerator gen = random_generator(rng, 2, 1 + trial % 3, d);
    Matrix x(20, d);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) {
      y[static_cast<std::size_t>(i)] = i % 2;
      for (int j = 0; j < d; ++j) x(i, j) = 2.0 * rng.normal();
    }
    const LabeledSet data(x, y);
    double naive = 0.0;
    for (int i = 0; i < 20; ++i)
      naive += naive_log_density(gen.classes[static_cast<std::size_t>(i % 2)], x.row(i));
    naive /= 20.0;
    CHECK(std::abs(log_likelihood(gen, data) - naive) < 1e-10);

    const Eigen::RowVectorXd shift = Eigen::RowVectorXd::Constant(d, 4.25);
    GmmGenerator moved = gen;
    for (auto& m : moved.classes) m.means.rowwise() += shift;
    const LabeledSet shifted(x.rowwise() + shift, y);
    CHECK(std::abs(log_likelihood(moved, shifted) - log_likelihood(gen, data)) < 1e-10);
  }
}

TEST_CASE("log-likelihood rejects a dimension mismatch") {
  Rng rng(1);
  const GmmGenerator gen = random_generator(rng, 1, 1, 2);
  CHECK_THROWS_AS(log_likelihood(gen, LabeledSet(Matrix::Zero(2, 3), {0, 0})), ShapeError);
}

TEST_CASE("sample: counts, tags, determinism") {
  Rng rng(8);
  const GmmGenerator gen = random_generator(rng, 2, 2, 3);
  const SyntheticBuffer a = sample(gen, 10, 4, 99);
  const SyntheticBuffer b = sample(gen, 10, 4, 99);
  const SyntheticBuffer c = sample(gen, 10, 4, 100);
  CHECK(a.data.size() == 20);
  CHECK(a.data.dim() == 3);
  CHECK(a.data.rows_with_label(0).size() == 10);
  CHECK(a.data.rows_with_label(1).size() == 10);
  CHECK(a.domain_id == 4);
  CHECK(a == b);
  CHECK_FALSE(a.data == c.data);
  CHECK(a.origin != c.origin);
  CHECK_THROWS_AS(sample(gen, 0, 0, 1), ValidationError);
}

TEST_CASE("sample: K=1 empirical mean within 3 sigma / sqrt(n)") {
  GmmGenerator gen;
  gen.dim = 2;
  Matrix mu(1, 2), var(1, 2);
  mu << 1.5, -2.0;
  var << 0.25, 4.0;
  gen.classes.push_back({Vector::Ones(1), mu, var});
  const SyntheticBuffer buf = sample(gen, 1000, 0, 5);
  const Eigen::RowVectorXd mean = buf.data.features.colwise().mean();
  for (int j = 0; j < 2; ++j) CHECK(std::abs(mean(j) - mu(0, j)) < 3.0 * std::sqrt(var(0, j) / 1000.0));
}

TEST_CASE("sampling is consistent with the likelihood (Monte-Carlo oracle)") {
  Rng rng(77);
  const GmmGenerator gen = random_generator(rng, 1, 3, 2);
  auto mean_and_var = [&](const SyntheticBuffer& buf) {
    double s = 0, sq = 0;
    const auto n = static_cast<double>(buf.data.size());
    for (Eigen::Index i = 0; i < buf.data.size(); ++i) {
      const double v = gen.log_density(buf.data.features.row(i), 0);
      s += v;
      sq += v * v;
    }
    const double m = s / n;
    return std::pair{m, (sq - n * m * m) / (n - 1)};
  };
  const auto [fresh, fresh_var] = mean_and_var(sample(gen, 2000, 0, 1));
  const auto [oracle, oracle_var] = mean_and_var(sample(gen, 100000, 0, 2));
  const double se = std::sqrt(fresh_var / 2000.0 + oracle_var / 100000.0);
  CHECK(std::abs(fresh - oracle) < 3.0 * se);
}

TEST_CASE("fingerprint tracks config and seed") {
  FitConfig a;
  FitConfig b = a;
  CHECK(fingerprint(a) == fingerprint(b));
  b.seed = 1;
  CHECK(fingerprint(a) != fingerprint(b));
  b = a;
  b.components = 2;
  CHECK(fingerprint(a) != fingerprint(b));
  b = a;
  b.ridge = 1e-5;
  CHECK(fingerprint(a) != fingerprint(b));
}

TEST_CASE("generator and buffer survive a json round trip bit-exactly") {
  Rng rng(5);
  GmmGenerator gen = random_generator(rng, 3, 2, 4);
  gen.fingerprint = 0xDEADBEEFCAFEF00DULL;
  const GmmGenerator back = generator_from_json(nlohmann::json::parse(to_json(gen).dump()));
  REQUIRE(back.num_classes() == 3);
  CHECK(back.fingerprint == gen.fingerprint);
  for (int c = 0; c < 3; ++c) {
    CHECK(back.classes[c].weights == gen.classes[c].weights);
    CHECK(back.classes[c].means == gen.classes[c].means);
    CHECK(back.classes[c].variances == gen.classes[c].variances);
  }
  const SyntheticBuffer buf = sample(gen, 5, 2, 9);
  CHECK(synthetic_buffer_from_json(nlohmann::json::parse(to_json(buf).dump())) == buf);
}

TEST_CASE("lloyd k-means: K=1 is the mean and WCSS never increases") {
  Rng rng(6);
  Matrix centers(4, 2);
  centers << 0, 0, 4, 0, 0, 4, 4, 4;
  const LabeledSet data = gaussian_clusters(rng, centers, 1.0, 200);
  const KMeansResult one = lloyd_kmeans(data.features, 1, 1);
  CHECK((one.centroids.row(0) - data.features.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const KMeansResult r = lloyd_kmeans(data.features, 4, seed);
    CHECK(r.centroids.rows() == 4);
    CHECK(r.iterations <= 100);
    for (std::size_t i = 1; i < r.wcss_trace.size(); ++i)
      CHECK(r.wcss_trace[i] <= r.wcss_trace[i - 1] + 1e-9);
  }
  Rng seeding(3);
  const auto picks = kmeans_pp_seed(data.features, 4, seeding);
  CHECK(std::set<Eigen::Index>(picks.begin(), picks.end()).size() == 4);
}
