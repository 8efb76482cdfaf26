#include "dilab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dilab/error.hpp"

namespace dilab {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult finite_diff_check(const Objective& objective, const Vector& theta, double h,
                                  Eigen::Index max_coords) {
  if (!(h > 0.0 && h <= 1e-2)) throw ValidationError("perturbation h must lie in (0, 1e-2]");
  Vector analytic(theta.size());
  objective(theta, analytic);

  std::vector<Eigen::Index> coords;
  const Eigen::Index n = theta.size();
  if (max_coords <= 0 || max_coords >= n) {
    for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
  } else {
    for (Eigen::Index k = 0; k < max_coords; ++k) coords.push_back(k * n / max_coords);
  }

  GradCheckResult result;
  Vector probe = theta;
  Vector scratch(theta.size());
  for (Eigen::Index i : coords) {
    probe(i) = theta(i) + h;
    const double up = objective(probe, scratch);
    probe(i) = theta(i) - h;
    const double down = objective(probe, scratch);
    probe(i) = theta(i);
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(analytic(i), numeric);
    if (err > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      result.worst_index = i;
    }
    ++result.checked;
  }
  return result;
}

GradCheckResult finite_diff_check(const Classifier& model, const Matrix& batch,
                                  std::span<const int> labels, double h) {
  if (batch.rows() == 0) throw ValidationError("finite_diff_check: empty batch");
  Classifier work = model;
  Objective f = [&](const Vector& theta, Vector& grad) {
    work.params() = theta;
    LossAndGrad lg = loss_and_grad(work, batch, labels);
    grad = std::move(lg.grad);
    return lg.loss;
  };
  return finite_diff_check(f, model.params(), h);
}

}  // namespace dilab
