#pragma once

#include <functional>
#include <span>

#include "dilab/classifier.hpp"

namespace dilab {

/// Returns the objective at theta and writes its analytic gradient into grad.
using Objective = std::function<double(const Vector& theta, Vector& grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  Eigen::Index checked = 0;
};

/// Relative discrepancy used by the checker:
///   |a - n| / max(|a|, |n|, floor)
/// The floor keeps near-zero gradients from turning round-off into large
/// ratios; it defaults to 1e-4.
double relative_error(double analytic, double numeric, double floor = 1e-4);

/// Central differences (f(theta + h e_i) - f(theta - h e_i)) / 2h on every
/// coordinate, or on `max_coords` evenly strided coordinates when the vector is longer.
GradCheckResult finite_diff_check(const Objective& objective, const Vector& theta, double h,
                                  Eigen::Index max_coords = 0);

/// Same check on loss_and_grad of a classifier.
GradCheckResult finite_diff_check(const Classifier& model, const Matrix& batch,
                                  std::span<const int> labels, double h);

}  // namespace dilab
