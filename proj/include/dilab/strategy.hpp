#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dilab/domain.hpp"
#include "dilab/ewc.hpp"
#include "dilab/gmm.hpp"
#include "dilab/replay.hpp"
#include "dilab/router.hpp"
#include "dilab/training.hpp"

namespace dilab {

inline constexpr std::array<std::string_view, 8> kStrategyNames = {
    "seqft", "ewc", "er", "gen_replay", "g2d", "oracle_router", "centroid_router", "mtl"};

/// Seed derivation shared by every strategy, so strategies that do the same
/// thing on the same domain draw the same numbers:
///   data stream            derive(run, "data")
///   domain t, purpose p    derive(derive(derive(run, "domain"), t), p)
namespace seeds {
std::uint64_t stream(std::uint64_t run_seed);
std::uint64_t domain(std::uint64_t run_seed, int t, std::string_view purpose);
}  // namespace seeds

/// Architecture and optimisation of one classifier family.
struct ClassifierSpec {
  std::vector<int> hidden{32};
  TrainConfig train;
  /// Candidate learning rates; when non-empty, each domain keeps the
  /// candidate with the best accuracy on that domain's validation split.
  std::vector<double> lr_grid;

  std::vector<int> layer_dims(int input_dim, int outputs) const;
  bool operator==(const ClassifierSpec&) const = default;
};

struct StrategyConfig {
  std::string name;
  ClassifierSpec classifier;
  double ewc_lambda = 1.0;
  int fisher_samples = 200;
  int buffer_per_class = 15;
  int buffer_budget = 0;        // > 0 switches ER to proportional quotas
  bool fresh_experts = false;   // experts start from scratch instead of the previous expert
  int centroids = 3;
  int neighbors = 1;

  bool operator==(const StrategyConfig&) const = default;
};

/// Settings every strategy in a run shares: the per-domain generator and the
/// domain discriminator. G2D and generative replay read the same buffers.
struct SharedConfig {
  FitConfig generator{2, 100, 1e-6, 1e-6, 0};
  int synthetic_per_class = 15;
  ClassifierSpec router;

  bool operator==(const SharedConfig&) const = default;
};

struct StreamShape {
  int dim = 0;
  int num_classes = 0;
  int num_domains = 0;
};

class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual std::string_view name() const = 0;

  /// Domains must arrive in order 0, 1, 2, ...
  void train_on_domain(const DomainAccess& access);

  /// Class predictions without any domain identity.
  virtual std::vector<int> predict(const Matrix& x) const = 0;

  /// Routing strategies expose their router; others return nullptr.
  virtual const RouterModel* router() const { return nullptr; }
  /// "synthetic", "oracle" or "centroid" for routing strategies.
  virtual std::string_view router_kind() const { return {}; }

  virtual nlohmann::json checkpoint() const = 0;

  int domains_seen() const { return seen_; }
  /// The training set used for the most recent classifier update.
  const LabeledSet& last_trainset() const { return last_trainset_; }

 protected:
  Strategy(StrategyConfig cfg, SharedConfig shared, StreamShape shape, std::uint64_t run_seed)
      : cfg_(std::move(cfg)), shared_(std::move(shared)), shape_(shape), run_seed_(run_seed) {}

  virtual void train_domain(const TrainingView& view) = 0;

  /// Trains a copy of `init` for each learning-rate candidate and keeps the
  /// best on `val`.
  Classifier fit_classifier(const Classifier& init, const LabeledSet& trainset,
                            const LabeledSet& val, std::uint64_t seed, const Penalty& penalty = {});
  Classifier fresh_classifier(int t) const;

  StrategyConfig cfg_;
  SharedConfig shared_;
  StreamShape shape_;
  std::uint64_t run_seed_;
  int seen_ = 0;
  LabeledSet last_trainset_;
};

/// Fits domain t's generator and draws its synthetic buffer. Depends only on
/// (run seed, t, shared config, data), never on the calling strategy.
SyntheticBuffer synthesize_domain(const LabeledSet& train, int t, int num_classes,
                                  const SharedConfig& shared, std::uint64_t run_seed,
                                  GmmGenerator* generator_out = nullptr);

/// Single classifier finetuned domain after domain; EWC adds its penalty.
class SeqFtStrategy : public Strategy {
 public:
  SeqFtStrategy(StrategyConfig cfg, SharedConfig shared, StreamShape shape, std::uint64_t seed);
  std::string_view name() const override { return "seqft"; }
  std::vector<int> predict(const Matrix& x) const override { return model_.predict(x); }
  nlohmann::json checkpoint() const override;
  const Classifier& model() const { return model_; }

 protected:
  void train_domain(const TrainingView& view) override;
  Classifier model_;
};

class EwcStrategy : public SeqFtStrategy {
 public:
  EwcStrategy(StrategyConfig cfg, SharedConfig shared, StreamShape shape, std::uint64_t seed);
  std::string_view name() const override { return "ewc"; }
  nlohmann::json checkpoint() const override;
  const EwcState& ewc() const { return ewc_; }

 protected:
  void train_domain(const TrainingView& view) override;
  EwcState ewc_;
};

/// Replay of real samples kept from earlier domains.
class ErStrategy : public SeqFtStrategy {
 public:
  using SeqFtStrategy::SeqFtStrategy;
  std::string_view name() const override { return "er"; }
  nlohmann::json checkpoint() const override;
  const ReplayBuffer& buffer() const { return buffer_; }

 protected:
  void train_domain(const TrainingView& view) override;
  ReplayBuffer buffer_;
  std::vector<Eigen::Index> domain_sizes_;
};

/// Replay of synthetic samples from per-domain generators.
class GenReplayStrategy : public SeqFtStrategy {
 public:
  using SeqFtStrategy::SeqFtStrategy;
  std::string_view name() const override { return "gen_replay"; }
  nlohmann::json checkpoint() const override;
  const std::vector<SyntheticBuffer>& buffers() const { return buffers_; }

 protected:
  void train_domain(const TrainingView& view) override;
  std::vector<SyntheticBuffer> buffers_;
};

/// One classifier trained from scratch on every train split seen so far.
class MtlStrategy : public SeqFtStrategy {
 public:
  using SeqFtStrategy::SeqFtStrategy;
  std::string_view name() const override { return "mtl"; }
  nlohmann::json checkpoint() const override;

 protected:
  void train_domain(const TrainingView& view) override;
  LabeledSet all_train_;
};

/// Frozen expert per domain plus a router choosing the expert at inference.
class ExpertRoutingStrategy : public Strategy {
 public:
  std::vector<int> predict(const Matrix& x) const override;
  const RouterModel* router() const override { return &router_; }
  const std::vector<Classifier>& experts() const { return experts_; }
  nlohmann::json checkpoint() const override;

 protected:
  using Strategy::Strategy;
  void train_domain(const TrainingView& view) override;
  virtual void update_router(const TrainingView& view) = 0;
  virtual void extend_checkpoint(nlohmann::json&) const {}
  Classifier train_router(const LabeledSet& trainset, int t) const;

  std::vector<Classifier> experts_;
  RouterModel router_;
};

/// Router trained on the union of synthetic buffers.
class G2dStrategy : public ExpertRoutingStrategy {
 public:
  G2dStrategy(StrategyConfig cfg, SharedConfig shared, StreamShape shape, std::uint64_t seed)
      : ExpertRoutingStrategy(std::move(cfg), std::move(shared), shape, seed) {}
  std::string_view name() const override { return "g2d"; }
  std::string_view router_kind() const override { return "synthetic"; }
  const std::vector<SyntheticBuffer>& buffers() const { return buffers_; }
  const std::vector<GmmGenerator>& generators() const { return generators_; }

 protected:
  void update_router(const TrainingView& view) override;
  void extend_checkpoint(nlohmann::json& j) const override;
  std::vector<SyntheticBuffer> buffers_;
  std::vector<GmmGenerator> generators_;
};

/// Router trained on the full real train splits of all seen domains.
class OracleRouterStrategy : public ExpertRoutingStrategy {
 public:
  OracleRouterStrategy(StrategyConfig cfg, SharedConfig shared, StreamShape shape, std::uint64_t seed)
      : ExpertRoutingStrategy(std::move(cfg), std::move(shared), shape, seed) {}
  std::string_view name() const override { return "oracle_router"; }
  std::string_view router_kind() const override { return "oracle"; }

 protected:
  void update_router(const TrainingView& view) override;
  std::vector<DomainFeatures> real_;
};

/// k-means centroids per domain with k-nearest-centroid voting.
class CentroidRouterStrategy : public ExpertRoutingStrategy {
 public:
  CentroidRouterStrategy(StrategyConfig cfg, SharedConfig shared, StreamShape shape, std::uint64_t seed)
      : ExpertRoutingStrategy(std::move(cfg), std::move(shared), shape, seed) {}
  std::string_view name() const override { return "centroid_router"; }
  std::string_view router_kind() const override { return "centroid"; }

 protected:
  void update_router(const TrainingView& view) override;
  CentroidTable table_;
};

/// Throws ConfigError listing valid names for an unknown strategy.
std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg, const SharedConfig& shared,
                                        const StreamShape& shape, std::uint64_t run_seed);

bool is_strategy_name(std::string_view name);
std::string valid_strategy_list();

}  // namespace dilab
