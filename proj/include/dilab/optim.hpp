#pragma once

#include <cstdint>
#include <string_view>

#include "dilab/classifier.hpp"

namespace dilab {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Vector first_moment;   // empty until the first adam step
  Vector second_moment;
  std::int64_t step = 0;

  static OptimizerState sgd(double lr);
  static OptimizerState adam(double lr);
};

/// theta <- theta - lr * g
void sgd_step(Classifier& model, const Vector& grads, OptimizerState& state);

/// Bias-corrected Adam update.
void adam_step(Classifier& model, const Vector& grads, OptimizerState& state);

/// Dispatches on state.kind.
void apply_step(Classifier& model, const Vector& grads, OptimizerState& state);

}  // namespace dilab
