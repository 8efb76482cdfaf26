#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "dilab/domain.hpp"

namespace dilab {

struct FitConfig {
  int components = 1;
  int max_iters = 100;
  double tolerance = 1e-6;
  double ridge = 1e-6;
  std::uint64_t seed = 0;

  bool operator==(const FitConfig&) const = default;
};

/// One class's diagonal-covariance mixture.
struct ClassMixture {
  Vector weights;     // K, on the simplex
  Matrix means;       // K x d
  Matrix variances;   // K x d, entries >= ridge

  int components() const { return static_cast<int>(weights.size()); }
};

/// Class-conditional generator: one mixture per class label.
struct GmmGenerator {
  int dim = 0;
  std::vector<ClassMixture> classes;
  std::uint64_t fingerprint = 0;

  int num_classes() const { return static_cast<int>(classes.size()); }
  double log_density(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label) const;
};

struct EmTrace {
  std::vector<double> log_likelihood;  // mean per-sample, one entry per parameter set
  int reseeds = 0;
  bool converged = false;
};

struct GmmFit {
  GmmGenerator generator;
  std::vector<EmTrace> traces;  // per class
};

/// Fits every class independently by EM from k-means++ seeded means,
/// data-variance initial variances and uniform weights. Variances are
/// clamped below at cfg.ridge in each M-step; a component whose total
/// responsibility falls under 1e-10 is re-seeded to a random point of that
/// class with the class data variance.
GmmFit fit_em(const LabeledSet& data, int num_classes, const FitConfig& cfg);

/// Mean over samples of log p(x | label).
double log_likelihood(const GmmGenerator& gen, const LabeledSet& samples);

/// Synthetic samples drawn from one domain's generator, all tagged with that domain.
struct SyntheticBuffer {
  int domain_id = 0;
  LabeledSet data;
  std::uint64_t origin = 0;

  bool operator==(const SyntheticBuffer&) const = default;
};

/// n_per_class draws per class, class-major order: component by inverse CDF
/// on the weights, then mean + sqrt(var) * normal per coordinate.
SyntheticBuffer sample(const GmmGenerator& gen, int n_per_class, int domain_id,
                       std::uint64_t seed);

std::uint64_t fingerprint(const FitConfig& cfg);

nlohmann::json to_json(const GmmGenerator& gen);
GmmGenerator generator_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SyntheticBuffer& buffer);
SyntheticBuffer synthetic_buffer_from_json(const nlohmann::json& j);

// Shared helpers for matrices in checkpoint documents.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index cols = -1);
nlohmann::json labeled_set_to_json(const LabeledSet& s);
LabeledSet labeled_set_from_json(const nlohmann::json& j);

}  // namespace dilab
