#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dilab/classifier.hpp"
#include "dilab/domain.hpp"
#include "dilab/optim.hpp"

namespace dilab {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-2;

  bool operator==(const TrainConfig&) const = default;
};

/// Extra objective term: returns its value and adds its gradient into `grad`.
using Penalty = std::function<double(const Vector& params, Vector& grad)>;

struct TrainLog {
  std::vector<double> epoch_loss;  // mean minibatch objective per epoch
};

/// Minibatch training with a fresh optimizer state. Each epoch reshuffles the
/// row order with Rng(seed) (one generator for the whole call).
TrainLog train_classifier(Classifier& model, const LabeledSet& trainset, const TrainConfig& cfg,
                          std::uint64_t seed, const Penalty& penalty = {});

double accuracy(const Classifier& model, const LabeledSet& data);
double accuracy(std::span<const int> predictions, std::span<const int> labels);

}  // namespace dilab
