#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "dilab/domain.hpp"
#include "dilab/error.hpp"
#include "dilab/training.hpp"

using namespace dilab;

namespace {

Matrix two_class_means(double half_gap) {
  Matrix m(2, 2);
  m << -half_gap, 0.0, half_gap, 0.0;
  return m;
}

Vector unit_var(int d) { return Vector::Ones(d); }

// Nearest-class-mean oracle fit on one split and applied to another.
struct NearestMean {
  Matrix means;
  explicit NearestMean(const LabeledSet& s, int classes) : means(Matrix::Zero(classes, s.dim())) {
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      means.row(s.labels[i]) += s.features.row(i);
      ++counts[static_cast<std::size_t>(s.labels[i])];
    }
    for (int c = 0; c < classes; ++c) means.row(c) /= counts[static_cast<std::size_t>(c)];
  }
  double accuracy(const LabeledSet& s) const {
    int hits = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      Eigen::Index best = 0;
      (means.rowwise() - s.features.row(i)).rowwise().squaredNorm().minCoeff(&best);
      hits += static_cast<int>(best) == s.labels[i];
    }
    return static_cast<double>(hits) / static_cast<double>(s.size());
  }
};

std::multiset<std::pair<std::vector<double>, int>> as_multiset(std::span<const Sample> xs) {
  std::multiset<std::pair<std::vector<double>, int>> out;
  for (const auto& s : xs)
    out.emplace(std::vector<double>(s.features.data(), s.features.data() + s.features.size()), s.label);
  return out;
}

}  // namespace

TEST_CASE("build_stream: structure, disjointness and determinism") {
  const std::vector<Vector> shifts = {Vector::Zero(2), Vector::Constant(2, 3.0),
                                      Vector::Constant(2, 6.0)};
  const auto recipes = recipe_covariate_shift(two_class_means(2.0), shifts, unit_var(2));
  const DomainStream a = build_stream(recipes, 17);
  const DomainStream b = build_stream(recipes, 17);
  const DomainStream c = build_stream(recipes, 18);
  REQUIRE(a.num_domains() == 3);
  CHECK(a.dim == 2);
  CHECK(a.num_classes == 2);
  for (int t = 0; t < 3; ++t) {
    CHECK(a[t].domain_id == t);
    CHECK(a[t].train == b[t].train);
    CHECK(a[t].val == b[t].val);
    CHECK(a[t].test == b[t].test);
    CHECK_FALSE(a[t].train == c[t].train);
    CHECK(a[t].n_train() == 400);
    // Continuous draws: no row is shared between splits.
    bool shared = false;
    for (Eigen::Index i = 0; i < a[t].test.size(); ++i)
      for (Eigen::Index j = 0; j < a[t].train.size(); ++j)
        shared = shared || a[t].test.features.row(i) == a[t].train.features.row(j);
    CHECK_FALSE(shared);
  }
}

TEST_CASE("build_stream: labels are balanced within one") {
  SplitSizes sizes{100, 7, 11};
  Matrix means(3, 2);
  means << 0, 0, 5, 0, 0, 5;
  const std::vector<Vector> shifts = {Vector::Zero(2)};
  const auto recipes = recipe_covariate_shift(means, shifts, unit_var(2), sizes);
  const DomainStream s = build_stream(recipes, 3);
  for (auto kind : {SplitKind::train, SplitKind::val, SplitKind::test}) {
    const LabeledSet& split = s[0].split(kind);
    std::map<int, int> counts;
    for (int y : split.labels) ++counts[y];
    const double even = static_cast<double>(split.size()) / 3.0;
    for (auto [label, n] : counts) CHECK(std::abs(n - even) <= 1.0);
  }

  SplitSizes binary{100, 10, 10};
  const auto r2 = recipe_covariate_shift(two_class_means(1.0), shifts, unit_var(2), binary);
  const DomainStream s2 = build_stream(r2, 9);
  CHECK(s2[0].train.rows_with_label(0).size() == 50);
  CHECK(s2[0].train.rows_with_label(1).size() == 50);
}

TEST_CASE("build_stream: inconsistent recipes are a config error listing both problems") {
  std::vector<Vector> shifts = {Vector::Zero(2)};
  auto recipes = recipe_covariate_shift(two_class_means(1.0), shifts, unit_var(2));
  Matrix wide(3, 3);
  wide.setZero();
  wide(1, 0) = 1;
  wide(2, 1) = 1;
  const std::vector<Vector> shifts3 = {Vector::Zero(3)};
  auto other = recipe_covariate_shift(wide, shifts3, unit_var(3));
  recipes.push_back(other[0]);
  try {
    build_stream(recipes, 1);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.violations().size() == 2);
  }
  auto too_small = recipe_covariate_shift(two_class_means(1.0), shifts, unit_var(2), {8, 2, 2});
  CHECK_THROWS_AS(build_stream(too_small, 1), ValidationError);
}

TEST_CASE("covariate shift: zero shifts give identically distributed domains") {
  const std::vector<Vector> shifts(3, Vector::Zero(2));
  const auto recipes = recipe_covariate_shift(two_class_means(2.0), shifts, unit_var(2));
  for (const auto& r : recipes) {
    CHECK(r.class_means == recipes[0].class_means);
    CHECK(r.variances == recipes[0].variances);
    CHECK(r.label_for(0) == 0);
  }
  CHECK_THROWS_AS(recipe_covariate_shift(two_class_means(1.0), std::vector<Vector>{Vector::Zero(3)},
                                         unit_var(2)),
                  ShapeError);
}

TEST_CASE("rotation: angle pi/2 maps (1,0) to (0,1)") {
  Matrix base(1, 2);
  base << 1.0, 0.0;
  const std::vector<double> angles = {std::numbers::pi / 2};
  const auto recipes = recipe_rotation(base, angles, unit_var(2));
  const Matrix m = recipes[0].effective_class_means();
  CHECK(std::abs(m(0, 0)) < 1e-15);
  CHECK(m(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  Matrix line(1, 1);
  line << 1.0;
  CHECK_THROWS_AS(recipe_rotation(line, angles, unit_var(1)), ValidationError);
}

TEST_CASE("covariate shift of 10 sigma makes domains separable by a nearest-mean oracle") {
  const std::vector<Vector> shifts = {Vector::Zero(2), (Vector(2) << 0.0, 10.0).finished()};
  const auto recipes = recipe_covariate_shift(two_class_means(3.0), shifts, unit_var(2));
  const DomainStream s = build_stream(recipes, 5);
  // Relabel by domain id and let the oracle separate the domains.
  LabeledSet train(2), test(2);
  for (int t = 0; t < 2; ++t) {
    LabeledSet tr = s[t].train, te = s[t].test;
    std::fill(tr.labels.begin(), tr.labels.end(), t);
    std::fill(te.labels.begin(), te.labels.end(), t);
    train.append(tr);
    test.append(te);
  }
  CHECK(NearestMean(train, 2).accuracy(test) >= 0.99);
}

TEST_CASE("conditional flip: empty flip set equals zero-shift covariate recipe") {
  const auto flip = recipe_conditional_flip(two_class_means(2.0), unit_var(2), 3, {});
  const std::vector<Vector> shifts(3, Vector::Zero(2));
  const auto cov = recipe_covariate_shift(two_class_means(2.0), shifts, unit_var(2));
  const DomainStream a = build_stream(flip, 4), b = build_stream(cov, 4);
  for (int t = 0; t < 3; ++t) {
    CHECK(a[t].train == b[t].train);
    CHECK(a[t].test == b[t].test);
  }
}

TEST_CASE("conditional flip: same location, opposite label") {
  const auto recipes = recipe_conditional_flip(two_class_means(2.0), unit_var(2), 2, {1});
  CHECK(recipes[0].label_for(0) == 0);
  CHECK(recipes[1].label_for(0) == 1);
  CHECK(recipes[1].label_for(1) == 0);
  CHECK(recipes[0].effective_class_means() == recipes[1].effective_class_means());

  Matrix three(3, 2);
  three << 0, 0, 1, 0, 2, 0;
  const auto cyc = recipe_conditional_flip(three, unit_var(2), 2, {1});
  CHECK(cyc[1].label_for(0) == 1);
  CHECK(cyc[1].label_for(1) == 2);
  CHECK(cyc[1].label_for(2) == 0);

  CHECK_THROWS_AS(recipe_conditional_flip(two_class_means(2.0), unit_var(2), 2, {2}), ConfigError);
}

TEST_CASE("conditional flip: per-domain Bayes rules disagree") {
  // 10 sigma between the class means.
  const auto recipes = recipe_conditional_flip(two_class_means(5.0), unit_var(2), 2, {1});
  const DomainStream s = build_stream(recipes, 21);
  const NearestMean rule0(s[0].train, 2), rule1(s[1].train, 2);
  CHECK(rule0.accuracy(s[0].test) >= 0.95);
  CHECK(rule1.accuracy(s[1].test) >= 0.95);
  CHECK(rule0.accuracy(s[1].test) <= 0.05);
}

TEST_CASE("conditional flip: sequential training on the flipped domain erases the first rule") {
  const auto recipes = recipe_conditional_flip(two_class_means(5.0), unit_var(2), 2, {1});
  const DomainStream s = build_stream(recipes, 33);
  Classifier model = Classifier::he_init({2, 32, 2}, 7);
  TrainConfig cfg;
  train_classifier(model, s[0].train, cfg, 1);
  CHECK(accuracy(model, s[0].test) >= 0.95);
  train_classifier(model, s[1].train, cfg, 2);
  CHECK(accuracy(model, s[0].test) <= 0.2);
}

TEST_CASE("split_dataset: floor partition, multiset union, determinism") {
  std::vector<Sample> samples;
  for (int i = 0; i < 100; ++i) samples.push_back({Vector::Constant(2, i), i % 3});
  const auto a = split_dataset(samples, {0.8, 0.1, 0.1}, 5);
  CHECK(a[0].size() == 80);
  CHECK(a[1].size() == 10);
  CHECK(a[2].size() == 10);
  std::vector<Sample> joined;
  for (const auto& part : a) joined.insert(joined.end(), part.begin(), part.end());
  CHECK(as_multiset(joined) == as_multiset(samples));
  const auto b = split_dataset(samples, {0.8, 0.1, 0.1}, 5);
  for (int k = 0; k < 3; ++k) CHECK(as_multiset(a[k]) == as_multiset(b[k]));
  CHECK(a[0][0].features == b[0][0].features);

  const auto odd = split_dataset(std::span(samples).first(7), {0.5, 0.25, 0.25}, 1);
  CHECK(odd[1].size() == 1);
  CHECK(odd[2].size() == 1);
  CHECK(odd[0].size() == 5);

  CHECK_THROWS_AS(split_dataset(std::span(samples).first(2), {0.8, 0.1, 0.1}, 1), ValidationError);
  CHECK_THROWS_AS(split_dataset(samples, {0.8, 0.1, 0.2}, 1), ValidationError);
  CHECK_THROWS_AS(split_dataset(samples, {1.0, 0.0, 0.0}, 1), ValidationError);
}

TEST_CASE("stream text format round-trips exactly") {
  const auto recipes = recipe_conditional_flip(two_class_means(1.5), unit_var(2), 2, {1}, {20, 4, 6});
  const DomainStream s = build_stream(recipes, 77);
  std::stringstream buf;
  write_stream(buf, s);
  std::string header;
  std::getline(std::stringstream(buf.str()), header);
  CHECK(header == "domain_id,split,label,x0,x1");
  const DomainStream r = read_stream(buf);
  REQUIRE(r.num_domains() == 2);
  for (int t = 0; t < 2; ++t) {
    CHECK(r[t].train == s[t].train);
    CHECK(r[t].val == s[t].val);
    CHECK(r[t].test == s[t].test);
  }
  std::stringstream bad("domain,label\n");
  CHECK_THROWS_AS(read_stream(bad), IoError);
}

TEST_CASE("DomainAccess only exposes the current domain") {
  const auto recipes = recipe_conditional_flip(two_class_means(2.0), unit_var(2), 3, {}, {10, 2, 2});
  const DomainStream s = build_stream(recipes, 1);
  const DomainAccess view(s, 1);
  CHECK(view.current().domain_id == 1);
  CHECK(view.current().train == s[1].train);
  CHECK_NOTHROW(view.domain(1));
  CHECK_THROWS_AS(view.domain(0), AccessError);
  CHECK_THROWS_AS(view.domain(2), AccessError);
  CHECK_THROWS_AS(DomainAccess(s, 3), ContractError);
}
