#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dilab/classifier.hpp"
#include "dilab/router.hpp"

namespace dilab {

/// alpha(s, t): accuracy on domain s after training through domain t, s <= t.
/// Indices are 0-based here; files and reports print them 1-based.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(int num_domains);

  int num_domains() const { return T_; }
  void set(int s, int t, double value);
  bool has(int s, int t) const;
  double at(int s, int t) const;
  int populated() const;

  bool operator==(const AccuracyMatrix&) const = default;

 private:
  void check(int s, int t) const;
  int T_ = 0;
  std::vector<std::optional<double>> cells_;
};

/// Writes the fraction of predictions equal to labels into alpha(s, t).
void record_alpha(AccuracyMatrix& m, int s, int t, std::span<const int> predictions,
                  std::span<const int> labels);

/// A_t = (1 / (t + 1)) * sum_{s <= t} alpha(s, t) for 0-based t.
double average_accuracy(const AccuracyMatrix& m, int t);

/// Backward transfer mean_{s < T-1} (alpha(s, T-1) - alpha(s, s)); 0 when T = 1.
/// Auxiliary forgetting measure, reported separately from A_t.
double backward_transfer(const AccuracyMatrix& m);

struct RoutingReport {
  std::string router_kind;
  double overall = 0.0;
  std::vector<double> per_domain;
  std::vector<std::vector<long>> confusion;  // [true][predicted]

  bool operator==(const RoutingReport&) const = default;
};

RoutingReport routing_accuracy(std::span<const int> predicted, std::span<const int> true_domains,
                               int num_domains, std::string router_kind);
/// Routes `features` and scores them against domains [0, num_domains).
RoutingReport routing_accuracy(const RouterModel& router, const Matrix& features,
                               std::span<const int> true_domains, int num_domains,
                               std::string router_kind);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues descending; each eigenvector's largest-magnitude entry is positive.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;  // columns
};
SymmetricEigen jacobi_eigen(const Matrix& symmetric, int max_sweeps = 100);

struct Projection2d {
  Matrix coords;                    // n x 2
  std::array<double, 2> explained{0.0, 0.0};
  Matrix components;                // d x 2
  Vector eigenvalues;               // all covariance eigenvalues, descending
  bool degenerate = false;          // rank-0 input
};

/// Mean-centred projection onto the top two eigenvectors of the sample covariance.
Projection2d pca_project_2d(const Matrix& features);

}  // namespace dilab
