#include "dilab/ewc.hpp"

#include <numeric>
#include <string>

#include "dilab/error.hpp"
#include "dilab/rng.hpp"

namespace dilab {

Vector estimate_fisher_diag(const Classifier& model, const LabeledSet& data, int n_samples,
                            std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("Fisher estimate needs at least one sample");
  if (n_samples > data.size()) {
    throw ValidationError("Fisher estimate asks for " + std::to_string(n_samples) +
                          " samples but the domain has " + std::to_string(data.size()));
  }
  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  rng.shuffle(std::span<Eigen::Index>(order));

  Vector fisher = Vector::Zero(model.num_params());
  Matrix x(1, data.dim());
  for (int s = 0; s < n_samples; ++s) {
    x.row(0) = data.features.row(order[static_cast<std::size_t>(s)]);
    const Matrix p = softmax_rows(model.forward(x));
    const double u = rng.uniform();
    int y_hat = model.output_dim() - 1;
    double acc = 0.0;
    for (int c = 0; c < model.output_dim(); ++c) {
      acc += p(0, c);
      if (u < acc) {
        y_hat = c;
        break;
      }
    }
    const int label[1] = {y_hat};
    const LossAndGrad lg = loss_and_grad(model, x, label);
    fisher += lg.grad.cwiseProduct(lg.grad);
  }
  return fisher / static_cast<double>(n_samples);
}

PenaltyValue ewc_penalty(const Vector& params, const EwcState& ewc) {
  PenaltyValue out;
  out.grad = Vector::Zero(params.size());
  for (std::size_t t = 0; t < ewc.anchors.size(); ++t) {
    const EwcAnchor& a = ewc.anchors[t];
    if (a.theta.size() != params.size() || a.fisher.size() != params.size()) {
      throw ValidationError("EWC anchor " + std::to_string(t) + " has " +
                            std::to_string(a.theta.size()) + " parameters, model has " +
                            std::to_string(params.size()));
    }
    const Vector diff = params - a.theta;
    out.value += 0.5 * ewc.lambda * a.fisher.dot(diff.cwiseProduct(diff));
    out.grad += ewc.lambda * a.fisher.cwiseProduct(diff);
  }
  return out;
}

PenaltyValue ewc_penalty(const Classifier& model, const EwcState& ewc) {
  return ewc_penalty(model.params(), ewc);
}

Penalty make_ewc_penalty(const EwcState& ewc) {
  return [&ewc](const Vector& params, Vector& grad) {
    PenaltyValue pv = ewc_penalty(params, ewc);
    grad += pv.grad;
    return pv.value;
  };
}

nlohmann::json to_json(const EwcState& ewc) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : ewc.anchors) {
    anchors.push_back({{"theta", std::vector<double>(a.theta.data(), a.theta.data() + a.theta.size())},
                       {"fisher", std::vector<double>(a.fisher.data(), a.fisher.data() + a.fisher.size())}});
  }
  return {{"lambda", ewc.lambda}, {"anchors", anchors}};
}

}  // namespace dilab
