#include "dilab/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dilab/error.hpp"
#include "dilab/rng.hpp"

namespace dilab {

TrainLog train_classifier(Classifier& model, const LabeledSet& trainset, const TrainConfig& cfg,
                          std::uint64_t seed, const Penalty& penalty) {
  TrainLog log;
  if (cfg.epochs < 0) throw ValidationError("epochs must be non-negative");
  if (cfg.epochs == 0) return log;
  if (trainset.empty()) throw ValidationError("train_classifier: empty training set");
  if (cfg.batch_size < 1) throw ValidationError("batch size must be at least 1");
  for (int y : trainset.labels) {
    if (y < 0 || y >= model.output_dim()) {
      throw ValidationError("training label " + std::to_string(y) + " outside model arity " +
                            std::to_string(model.output_dim()));
    }
  }

  OptimizerState state = cfg.optimizer == OptimizerKind::sgd
                             ? OptimizerState::sgd(cfg.learning_rate)
                             : OptimizerState::adam(cfg.learning_rate);
  Rng rng(seed);
  const Eigen::Index n = trainset.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  Matrix batch;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double epoch_total = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n - start);
      batch.resize(len, trainset.dim());
      labels.resize(static_cast<std::size_t>(len));
      for (Eigen::Index i = 0; i < len; ++i) {
        const Eigen::Index row = order[static_cast<std::size_t>(start + i)];
        batch.row(i) = trainset.features.row(row);
        labels[static_cast<std::size_t>(i)] = trainset.labels[static_cast<std::size_t>(row)];
      }
      LossAndGrad lg = loss_and_grad(model, batch, labels);
      double objective = lg.loss;
      if (penalty) objective += penalty(model.params(), lg.grad);
      if (!std::isfinite(objective)) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches));
      }
      apply_step(model, lg.grad, state);
      epoch_total += objective;
      ++batches;
    }
    log.epoch_loss.push_back(epoch_total / batches);
  }
  return log;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("prediction/label length mismatch");
  if (labels.empty()) throw ValidationError("accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double accuracy(const Classifier& model, const LabeledSet& data) {
  const auto pred = model.predict(data.features);
  return accuracy(pred, data.labels);
}

}  // namespace dilab
