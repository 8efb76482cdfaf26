#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dilab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense feedforward network: rectifier on hidden layers, identity on the
/// output layer. All parameters live in one flat vector; layer l's weight is
/// a column-major (out x in) block followed by its bias.
class Classifier {
 public:
  Classifier() = default;

  /// All parameters zero.
  explicit Classifier(std::vector<int> layer_dims);

  /// He-scaled normal weights (stddev sqrt(2 / fan_in)), zero biases.
  static Classifier he_init(std::vector<int> layer_dims, std::uint64_t seed);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }

  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<const Vector> bias(int layer) const;
  Eigen::Map<Vector> bias(int layer);

  const Vector& params() const { return params_; }
  Vector& params() { return params_; }
  Eigen::Index num_params() const { return params_.size(); }

  /// Layer that owns flat parameter `index`.
  int layer_of(Eigen::Index index) const;

  Matrix forward(const Matrix& batch) const;

  /// Activations of the last hidden layer (the input itself when there is no
  /// hidden layer).
  Matrix hidden_features(const Matrix& batch) const;

  /// Argmax over logits; ties go to the lowest class index.
  std::vector<int> predict(const Matrix& batch) const;

  bool operator==(const Classifier& other) const;

 private:
  void check_input(const Matrix& batch) const;

  std::vector<int> dims_;
  std::vector<Eigen::Index> offsets_;  // start of each layer's weight block
  Vector params_;
};

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;
};

/// Mean softmax cross-entropy over the batch and its exact gradient.
LossAndGrad loss_and_grad(const Classifier& model, const Matrix& batch,
                          std::span<const int> labels);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Index of the row maximum, lowest index on ties.
int argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row);

}  // namespace dilab
