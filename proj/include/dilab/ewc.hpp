#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "dilab/domain.hpp"
#include "dilab/training.hpp"

namespace dilab {

struct EwcAnchor {
  Vector theta;   // parameters after finishing the domain
  Vector fisher;  // diagonal Fisher at theta, entries >= 0
};

/// One quadratic anchor per completed domain.
struct EwcState {
  double lambda = 1.0;
  std::vector<EwcAnchor> anchors;
};

/// F_i = mean over n_samples distinct training points (chosen by a seeded
/// shuffle) of (d log p(y_hat | x) / d theta_i)^2, where y_hat is drawn from
/// the model's own predictive distribution.
Vector estimate_fisher_diag(const Classifier& model, const LabeledSet& data, int n_samples,
                            std::uint64_t seed);

struct PenaltyValue {
  double value = 0.0;
  Vector grad;
};

/// (lambda / 2) * sum_t sum_i F_{t,i} (theta_i - theta*_{t,i})^2 and its gradient.
PenaltyValue ewc_penalty(const Vector& params, const EwcState& ewc);
PenaltyValue ewc_penalty(const Classifier& model, const EwcState& ewc);

/// Adapter for train_classifier.
Penalty make_ewc_penalty(const EwcState& ewc);

nlohmann::json to_json(const EwcState& ewc);

}  // namespace dilab
