#include "dilab/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dilab/error.hpp"
#include "dilab/rng.hpp"

namespace dilab {

Classifier::Classifier(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) {
    throw ValidationError("classifier needs at least input and output dims");
  }
  for (int d : dims_) {
    if (d <= 0) throw ValidationError("classifier layer dims must be positive");
  }
  Eigen::Index total = 0;
  for (int l = 0; l + 1 < static_cast<int>(dims_.size()); ++l) {
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(dims_[l + 1]) * dims_[l] + dims_[l + 1];
  }
  params_ = Vector::Zero(total);
}

Classifier Classifier::he_init(std::vector<int> layer_dims, std::uint64_t seed) {
  Classifier model(std::move(layer_dims));
  Rng rng(seed);
  for (int l = 0; l < model.num_layers(); ++l) {
    const double scale = std::sqrt(2.0 / model.dims_[l]);
    auto w = model.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * rng.normal();
    }
  }
  return model;
}

Eigen::Map<const Matrix> Classifier::weight(int layer) const {
  return {params_.data() + offsets_[layer], dims_[layer + 1], dims_[layer]};
}

Eigen::Map<Matrix> Classifier::weight(int layer) {
  return {params_.data() + offsets_[layer], dims_[layer + 1], dims_[layer]};
}

Eigen::Map<const Vector> Classifier::bias(int layer) const {
  return {params_.data() + offsets_[layer] + Eigen::Index{dims_[layer + 1]} * dims_[layer],
          dims_[layer + 1]};
}

Eigen::Map<Vector> Classifier::bias(int layer) {
  return {params_.data() + offsets_[layer] + Eigen::Index{dims_[layer + 1]} * dims_[layer],
          dims_[layer + 1]};
}

int Classifier::layer_of(Eigen::Index index) const {
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  return static_cast<int>(it - offsets_.begin()) - 1;
}

void Classifier::check_input(const Matrix& batch) const {
  if (batch.cols() != input_dim()) {
    throw ShapeError("classifier expects " + std::to_string(input_dim()) +
                     " input features, got " + std::to_string(batch.cols()));
  }
}

namespace {

Matrix affine(const Matrix& a, const Eigen::Map<const Matrix>& w,
              const Eigen::Map<const Vector>& b) {
  Matrix z = a * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

}  // namespace

Matrix Classifier::forward(const Matrix& batch) const {
  check_input(batch);
  Matrix a = batch;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = affine(a, weight(l), bias(l));
    if (l + 1 < num_layers()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Matrix Classifier::hidden_features(const Matrix& batch) const {
  check_input(batch);
  Matrix a = batch;
  for (int l = 0; l + 1 < num_layers(); ++l) {
    a = affine(a, weight(l), bias(l)).cwiseMax(0.0);
  }
  return a;
}

int argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = static_cast<int>(j);
  }
  return best;
}

std::vector<int> Classifier::predict(const Matrix& batch) const {
  Matrix logits = forward(batch);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) out[i] = argmax_row(logits.row(i));
  return out;
}

bool Classifier::operator==(const Classifier& other) const {
  return dims_ == other.dims_ && params_.size() == other.params_.size() &&
         std::equal(params_.data(), params_.data() + params_.size(), other.params_.data());
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

LossAndGrad loss_and_grad(const Classifier& model, const Matrix& batch,
                          std::span<const int> labels) {
  if (batch.rows() == 0) throw ValidationError("loss_and_grad: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != batch.rows()) {
    throw ShapeError("loss_and_grad: " + std::to_string(batch.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  const int classes = model.output_dim();
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw ValidationError("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
  }
  if (batch.cols() != model.input_dim()) {
    throw ShapeError("classifier expects " + std::to_string(model.input_dim()) +
                     " input features, got " + std::to_string(batch.cols()));
  }

  const int layers = model.num_layers();
  const double n = static_cast<double>(batch.rows());

  // Forward pass keeping every layer's input activation.
  std::vector<Matrix> inputs;
  inputs.reserve(layers);
  inputs.push_back(batch);
  Matrix logits;
  for (int l = 0; l < layers; ++l) {
    Matrix z = affine(inputs.back(), model.weight(l), model.bias(l));
    if (l + 1 < layers) {
      inputs.push_back(z.cwiseMax(0.0));
    } else {
      logits = std::move(z);
    }
  }

  LossAndGrad out;

  // Loss via log-sum-exp; delta = softmax - onehot, averaged over the batch.
  Matrix delta(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    const double s = e.sum();
    total += (std::log(s) + m) - logits(i, labels[i]);
    delta.row(i) = e / s;
    delta(i, labels[i]) -= 1.0;
  }
  out.loss = total / n;
  delta /= n;

  Classifier grad_view(model.layer_dims());
  for (int l = layers - 1; l >= 0; --l) {
    grad_view.weight(l) = delta.transpose() * inputs[l];
    grad_view.bias(l) = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * model.weight(l);
      delta = (inputs[l].array() > 0.0).select(back, 0.0);
    }
  }
  out.grad = std::move(grad_view.params());
  return out;
}

}  // namespace dilab
