#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dilab/classifier.hpp"
#include "dilab/domain.hpp"
#include "dilab/gmm.hpp"

namespace dilab {

/// Unlabeled feature rows known to come from one domain.
struct DomainFeatures {
  int domain_id = 0;
  Matrix features;
};

/// Union of the inputs with the domain id as label, in input order.
/// Duplicate domain ids are rejected.
LabeledSet build_router_trainset(std::span<const DomainFeatures> sets);
LabeledSet build_router_trainset(std::span<const SyntheticBuffer> buffers);

/// K stored centroids per domain.
struct CentroidTable {
  Matrix centroids;             // rows grouped by domain
  std::vector<int> domain_of;   // per centroid row

  int num_domains() const;
};

/// Lloyd's k-means per domain; domain d uses seed derive_seed(seed, d).
CentroidTable fit_centroid_router(std::span<const DomainFeatures> sets, int centroids_per_domain,
                                  std::uint64_t seed);
void add_domain_centroids(CentroidTable& table, const DomainFeatures& set,
                          int centroids_per_domain, std::uint64_t seed);

/// Majority domain among the k nearest centroids. Neighbours are ordered by
/// (distance, domain, row); vote ties go to the lowest domain.
int centroid_route(const CentroidTable& table, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                   int k_nn);

enum class RouterKind { constant, discriminator, centroid };

/// Maps an input to a domain index in [0, arity).
class RouterModel {
 public:
  RouterModel() = default;
  static RouterModel constant();
  static RouterModel discriminator(Classifier net);
  static RouterModel centroid(CentroidTable table, int k_nn);

  RouterKind kind() const { return kind_; }
  int arity() const;
  std::vector<int> route(const Matrix& x) const;
  /// Per-domain scores for discriminator routers (logits); empty otherwise.
  Matrix scores(const Matrix& x) const;
  /// Representation used for 2-D projections: last hidden layer for a
  /// discriminator, raw input otherwise.
  Matrix features(const Matrix& x) const;

  const Classifier* network() const { return net_ ? &*net_ : nullptr; }
  const CentroidTable& table() const { return table_; }
  int neighbors() const { return k_nn_; }

  nlohmann::json to_json() const;
  static RouterModel from_json(const nlohmann::json& j);

 private:
  RouterKind kind_ = RouterKind::constant;
  std::optional<Classifier> net_;
  CentroidTable table_;
  int k_nn_ = 1;
};

nlohmann::json to_json(const Classifier& model);
Classifier classifier_from_json(const nlohmann::json& j);

}  // namespace dilab
