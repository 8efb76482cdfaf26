#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <string_view>
#include <vector>

#include "dilab/classifier.hpp"

namespace dilab {

struct Sample {
  Vector features;
  int label = 0;
};

/// Row-per-sample feature matrix with parallel class labels.
struct LabeledSet {
  Matrix features;
  std::vector<int> labels;

  LabeledSet() = default;
  LabeledSet(Matrix x, std::vector<int> y);
  explicit LabeledSet(int dim) : features(0, dim) {}

  Eigen::Index size() const { return features.rows(); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool empty() const { return size() == 0; }

  void append(const LabeledSet& other);
  LabeledSet select(std::span<const Eigen::Index> rows) const;
  /// Rows whose label equals `label`, in original order.
  std::vector<Eigen::Index> rows_with_label(int label) const;

  static LabeledSet from_samples(std::span<const Sample> samples);
  std::vector<Sample> to_samples() const;

  bool operator==(const LabeledSet& other) const;
};

enum class SplitKind { train, val, test };
std::string_view to_string(SplitKind split);

struct DomainDataset {
  int domain_id = 0;
  LabeledSet train;
  LabeledSet val;
  LabeledSet test;

  Eigen::Index n_train() const { return train.size(); }
  const LabeledSet& split(SplitKind kind) const;
};

enum class RecipeKind { covariate_shift, conditional_flip, rotation };
std::string_view to_string(RecipeKind kind);
RecipeKind recipe_kind_from_string(std::string_view name);

struct SplitSizes {
  int train = 400;
  int val = 50;
  int test = 50;
};

/// Generative description of one domain: class c is drawn from
/// N(class_means.row(c), diag(variances)), then rotated by `angle` in the
/// first two coordinates. With `flip` set, the emitted label is the cyclic
/// successor (c + 1) mod C of the latent class.
struct DomainRecipe {
  RecipeKind kind = RecipeKind::covariate_shift;
  Matrix class_means;   // C x d
  Vector variances;     // d, strictly positive
  double angle = 0.0;   // radians
  bool flip = false;
  SplitSizes sizes;

  int num_classes() const { return static_cast<int>(class_means.rows()); }
  int dim() const { return static_cast<int>(class_means.cols()); }

  /// Means after rotation, indexed by latent class.
  Matrix effective_class_means() const;
  /// Emitted label for a latent class.
  int label_for(int latent_class) const;
};

struct DomainStream {
  std::vector<DomainDataset> domains;
  int dim = 0;
  int num_classes = 0;

  int num_domains() const { return static_cast<int>(domains.size()); }
  const DomainDataset& operator[](int t) const { return domains.at(static_cast<std::size_t>(t)); }
};

/// Seeds: seed -> derive(seed, t) per domain -> derive(domain_seed, split).
/// Each split holds C-balanced labels (i mod C, then shuffled).
DomainStream build_stream(std::span<const DomainRecipe> recipes, std::uint64_t seed);

/// Domain t's class means = base_means + shifts[t].
std::vector<DomainRecipe> recipe_covariate_shift(const Matrix& base_means,
                                                 std::span<const Vector> shifts,
                                                 const Vector& variances, SplitSizes sizes = {});

/// Domain t's distribution is the base rotated by angles[t].
std::vector<DomainRecipe> recipe_rotation(const Matrix& base_means, std::span<const double> angles,
                                          const Vector& variances, SplitSizes sizes = {});

/// T domains over the same class geometry; domains in flip_domains emit the
/// cyclically permuted label. Optional per-domain shifts (empty = all zero).
std::vector<DomainRecipe> recipe_conditional_flip(const Matrix& base_means,
                                                  const Vector& variances, int num_domains,
                                                  const std::set<int>& flip_domains,
                                                  SplitSizes sizes = {},
                                                  std::span<const Vector> shifts = {});

/// Random permutation from seed, then val = floor(N r_val), test = floor(N r_test),
/// train gets the remainder.
std::array<std::vector<Sample>, 3> split_dataset(std::span<const Sample> samples,
                                                 std::array<double, 3> ratios,
                                                 std::uint64_t seed);

/// Columnar text: header "domain_id,split,label,x0,...,x{d-1}", then one
/// sample per line in domain order, splits train/val/test. Features use %.17g.
void write_stream(std::ostream& out, const DomainStream& stream);
DomainStream read_stream(std::istream& in);

/// What a strategy may see while training on one domain.
struct TrainingView {
  int domain_id;
  const LabeledSet& train;
  const LabeledSet& val;
};

/// Access-controlled window onto a stream. Only the current domain's train
/// and val splits are reachable; anything else throws AccessError.
class DomainAccess {
 public:
  DomainAccess(const DomainStream& stream, int current);

  int current_index() const { return current_; }
  int num_classes() const { return stream_->num_classes; }
  int dim() const { return stream_->dim; }

  TrainingView current() const;
  TrainingView domain(int t) const;

 private:
  const DomainStream* stream_;
  int current_;
};

}  // namespace dilab
