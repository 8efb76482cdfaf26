#include "dilab/optim.hpp"

#include <cmath>
#include <string>

#include "dilab/error.hpp"

namespace dilab {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ValidationError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

OptimizerState OptimizerState::sgd(double lr) {
  OptimizerState s;
  s.kind = OptimizerKind::sgd;
  s.learning_rate = lr;
  return s;
}

OptimizerState OptimizerState::adam(double lr) {
  OptimizerState s;
  s.kind = OptimizerKind::adam;
  s.learning_rate = lr;
  return s;
}

namespace {

void check_grads(const Classifier& model, const Vector& grads) {
  if (grads.size() != model.num_params()) {
    throw ShapeError("gradient has " + std::to_string(grads.size()) + " entries, model has " +
                     std::to_string(model.num_params()));
  }
  for (Eigen::Index i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads(i))) {
      throw NumericError("non-finite gradient in layer " + std::to_string(model.layer_of(i)));
    }
  }
}

}  // namespace

void sgd_step(Classifier& model, const Vector& grads, OptimizerState& state) {
  if (state.kind != OptimizerKind::sgd) throw ValidationError("sgd_step on a non-sgd state");
  check_grads(model, grads);
  model.params() -= state.learning_rate * grads;
  ++state.step;
}

void adam_step(Classifier& model, const Vector& grads, OptimizerState& state) {
  if (state.kind != OptimizerKind::adam) throw ValidationError("adam_step on a non-adam state");
  check_grads(model, grads);
  if (state.first_moment.size() != model.num_params()) {
    state.first_moment = Vector::Zero(model.num_params());
    state.second_moment = Vector::Zero(model.num_params());
  }
  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto m_hat = state.first_moment.array() / c1;
  auto v_hat = state.second_moment.array() / c2;
  model.params().array() -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
}

void apply_step(Classifier& model, const Vector& grads, OptimizerState& state) {
  if (state.kind == OptimizerKind::sgd) {
    sgd_step(model, grads, state);
  } else {
    adam_step(model, grads, state);
  }
}

}  // namespace dilab
