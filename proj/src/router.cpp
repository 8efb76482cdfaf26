#include "dilab/router.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <tuple>

#include "dilab/error.hpp"
#include "dilab/kmeans.hpp"
#include "dilab/rng.hpp"

namespace dilab {

LabeledSet build_router_trainset(std::span<const DomainFeatures> sets) {
  if (sets.empty()) throw ValidationError("router training needs at least one domain");
  std::set<int> ids;
  LabeledSet out;
  for (const auto& s : sets) {
    if (!ids.insert(s.domain_id).second) {
      throw ValidationError("domain " + std::to_string(s.domain_id) + " appears twice in router inputs");
    }
    out.append(LabeledSet(s.features, std::vector<int>(static_cast<std::size_t>(s.features.rows()), s.domain_id)));
  }
  return out;
}

LabeledSet build_router_trainset(std::span<const SyntheticBuffer> buffers) {
  std::vector<DomainFeatures> sets;
  sets.reserve(buffers.size());
  for (const auto& b : buffers) sets.push_back({b.domain_id, b.data.features});
  return build_router_trainset(sets);
}

int CentroidTable::num_domains() const {
  return domain_of.empty() ? 0 : *std::max_element(domain_of.begin(), domain_of.end()) + 1;
}

void add_domain_centroids(CentroidTable& table, const DomainFeatures& set,
                          int centroids_per_domain, std::uint64_t seed) {
  if (set.features.rows() == 0) {
    throw ValidationError("domain " + std::to_string(set.domain_id) + " has no features to cluster");
  }
  if (set.features.rows() < centroids_per_domain) {
    throw ValidationError("domain " + std::to_string(set.domain_id) + " has fewer points than K=" +
                          std::to_string(centroids_per_domain));
  }
  const KMeansResult km = lloyd_kmeans(
      set.features, centroids_per_domain,
      derive_seed(seed, static_cast<std::uint64_t>(set.domain_id)));
  Matrix grown(table.centroids.rows() + km.centroids.rows(), km.centroids.cols());
  if (table.centroids.rows() > 0) {
    if (table.centroids.cols() != km.centroids.cols()) throw ShapeError("centroid dims disagree");
    grown << table.centroids, km.centroids;
  } else {
    grown = km.centroids;
  }
  table.centroids = std::move(grown);
  table.domain_of.insert(table.domain_of.end(), static_cast<std::size_t>(km.centroids.rows()),
                         set.domain_id);
}

CentroidTable fit_centroid_router(std::span<const DomainFeatures> sets, int centroids_per_domain,
                                  std::uint64_t seed) {
  if (sets.empty()) throw ValidationError("centroid router needs at least one domain");
  CentroidTable table;
  for (const auto& s : sets) add_domain_centroids(table, s, centroids_per_domain, seed);
  return table;
}

int centroid_route(const CentroidTable& table, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                   int k_nn) {
  const auto n = table.centroids.rows();
  if (k_nn < 1 || k_nn > n) {
    throw ValidationError("K_nn=" + std::to_string(k_nn) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::tuple<double, int, Eigen::Index>> order;
  order.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    order.emplace_back((table.centroids.row(i) - x).squaredNorm(),
                       table.domain_of[static_cast<std::size_t>(i)], i);
  }
  std::partial_sort(order.begin(), order.begin() + k_nn, order.end());
  std::vector<int> votes(static_cast<std::size_t>(table.num_domains()), 0);
  for (int k = 0; k < k_nn; ++k) ++votes[static_cast<std::size_t>(std::get<1>(order[static_cast<std::size_t>(k)]))];
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

RouterModel RouterModel::constant() { return RouterModel{}; }

RouterModel RouterModel::discriminator(Classifier net) {
  RouterModel r;
  r.kind_ = RouterKind::discriminator;
  r.net_ = std::move(net);
  return r;
}

RouterModel RouterModel::centroid(CentroidTable table, int k_nn) {
  RouterModel r;
  r.kind_ = RouterKind::centroid;
  r.table_ = std::move(table);
  r.k_nn_ = k_nn;
  return r;
}

int RouterModel::arity() const {
  switch (kind_) {
    case RouterKind::constant: return 1;
    case RouterKind::discriminator: return net_->output_dim();
    case RouterKind::centroid: return table_.num_domains();
  }
  return 1;
}

std::vector<int> RouterModel::route(const Matrix& x) const {
  switch (kind_) {
    case RouterKind::constant: return std::vector<int>(static_cast<std::size_t>(x.rows()), 0);
    case RouterKind::discriminator: return net_->predict(x);
    case RouterKind::centroid: {
      std::vector<int> out(static_cast<std::size_t>(x.rows()));
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = centroid_route(table_, x.row(i), k_nn_);
      }
      return out;
    }
  }
  return {};
}

Matrix RouterModel::scores(const Matrix& x) const {
  if (kind_ == RouterKind::discriminator) return net_->forward(x);
  return {};
}

Matrix RouterModel::features(const Matrix& x) const {
  if (kind_ == RouterKind::discriminator) return net_->hidden_features(x);
  return x;
}

nlohmann::json to_json(const Classifier& model) {
  const Vector& p = model.params();
  return {{"layer_dims", model.layer_dims()},
          {"params", std::vector<double>(p.data(), p.data() + p.size())}};
}

Classifier classifier_from_json(const nlohmann::json& j) {
  Classifier model(j.at("layer_dims").get<std::vector<int>>());
  const auto p = j.at("params").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(p.size()) != model.num_params()) {
    throw IoError("classifier document has " + std::to_string(p.size()) + " params, expected " +
                  std::to_string(model.num_params()));
  }
  model.params() = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  return model;
}

nlohmann::json RouterModel::to_json() const {
  switch (kind_) {
    case RouterKind::constant: return {{"kind", "constant"}};
    case RouterKind::discriminator: return {{"kind", "discriminator"}, {"network", dilab::to_json(*net_)}};
    case RouterKind::centroid:
      return {{"kind", "centroid"},
              {"neighbors", k_nn_},
              {"centroids", matrix_to_json(table_.centroids)},
              {"domain_of", table_.domain_of}};
  }
  return {};
}

RouterModel RouterModel::from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "constant") return constant();
  if (kind == "discriminator") return discriminator(classifier_from_json(j.at("network")));
  if (kind == "centroid") {
    CentroidTable t;
    t.centroids = matrix_from_json(j.at("centroids"));
    t.domain_of = j.at("domain_of").get<std::vector<int>>();
    return centroid(std::move(t), j.at("neighbors").get<int>());
  }
  throw IoError("unknown router kind '" + kind + "'");
}

}  // namespace dilab
