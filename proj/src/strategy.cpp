#include "dilab/strategy.hpp"

#include <algorithm>
#include <string>

#include "dilab/error.hpp"
#include "dilab/rng.hpp"

namespace dilab {

namespace seeds {

std::uint64_t stream(std::uint64_t run_seed) { return derive_seed(run_seed, "data"); }

std::uint64_t domain(std::uint64_t run_seed, int t, std::string_view purpose) {
  return derive_seed(derive_seed(derive_seed(run_seed, "domain"), static_cast<std::uint64_t>(t)),
                     purpose);
}

}  // namespace seeds

std::vector<int> ClassifierSpec::layer_dims(int input_dim, int outputs) const {
  std::vector<int> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(outputs);
  return dims;
}

void Strategy::train_on_domain(const DomainAccess& access) {
  if (access.current_index() != seen_) {
    throw ContractError(std::string(name()) + ": expected domain " + std::to_string(seen_) +
                        ", got " + std::to_string(access.current_index()));
  }
  train_domain(access.current());
  ++seen_;
}

Classifier Strategy::fit_classifier(const Classifier& init, const LabeledSet& trainset,
                                    const LabeledSet& val, std::uint64_t seed,
                                    const Penalty& penalty) {
  last_trainset_ = trainset;
  std::vector<double> candidates = cfg_.classifier.lr_grid;
  if (candidates.empty()) candidates.push_back(cfg_.classifier.train.learning_rate);

  Classifier best;
  double best_acc = -1.0;
  for (double lr : candidates) {
    TrainConfig tc = cfg_.classifier.train;
    tc.learning_rate = lr;
    Classifier model = init;
    train_classifier(model, trainset, tc, seed, penalty);
    if (candidates.size() == 1) return model;
    const double acc = val.empty() ? 0.0 : accuracy(model, val);
    if (acc > best_acc) {
      best_acc = acc;
      best = std::move(model);
    }
  }
  return best;
}

Classifier Strategy::fresh_classifier(int t) const {
  return Classifier::he_init(cfg_.classifier.layer_dims(shape_.dim, shape_.num_classes),
                             seeds::domain(run_seed_, t, "model"));
}

SyntheticBuffer synthesize_domain(const LabeledSet& train, int t, int num_classes,
                                  const SharedConfig& shared, std::uint64_t run_seed,
                                  GmmGenerator* generator_out) {
  FitConfig fc = shared.generator;
  fc.seed = seeds::domain(run_seed, t, "generator");
  GmmFit fit = fit_em(train, num_classes, fc);
  SyntheticBuffer buf = sample(fit.generator, shared.synthetic_per_class, t,
                               seeds::domain(run_seed, t, "synthetic"));
  if (generator_out) *generator_out = std::move(fit.generator);
  return buf;
}

// ---------------------------------------------------------------------------
// Single-classifier strategies

SeqFtStrategy::SeqFtStrategy(StrategyConfig cfg, SharedConfig shared, StreamShape shape,
                             std::uint64_t seed)
    : Strategy(std::move(cfg), std::move(shared), shape, seed) {}

void SeqFtStrategy::train_domain(const TrainingView& view) {
  const int t = view.domain_id;
  if (t == 0) model_ = fresh_classifier(0);
  model_ = fit_classifier(model_, view.train, view.val, seeds::domain(run_seed_, t, "train"));
}

nlohmann::json SeqFtStrategy::checkpoint() const {
  return {{"strategy", name()}, {"domains_seen", seen_}, {"model", to_json(model_)}};
}

EwcStrategy::EwcStrategy(StrategyConfig cfg, SharedConfig shared, StreamShape shape,
                         std::uint64_t seed)
    : SeqFtStrategy(std::move(cfg), std::move(shared), shape, seed) {
  ewc_.lambda = cfg_.ewc_lambda;
}

void EwcStrategy::train_domain(const TrainingView& view) {
  const int t = view.domain_id;
  if (t == 0) model_ = fresh_classifier(0);
  const Penalty penalty = ewc_.anchors.empty() ? Penalty{} : make_ewc_penalty(ewc_);
  model_ = fit_classifier(model_, view.train, view.val, seeds::domain(run_seed_, t, "train"),
                          penalty);
  const int n = std::min<int>(cfg_.fisher_samples, static_cast<int>(view.train.size()));
  ewc_.anchors.push_back(
      {model_.params(),
       estimate_fisher_diag(model_, view.train, n, seeds::domain(run_seed_, t, "fisher"))});
}

nlohmann::json EwcStrategy::checkpoint() const {
  nlohmann::json j = SeqFtStrategy::checkpoint();
  j["ewc"] = to_json(ewc_);
  return j;
}

void ErStrategy::train_domain(const TrainingView& view) {
  const int t = view.domain_id;
  if (t == 0) model_ = fresh_classifier(0);
  const LabeledSet trainset = compose_replay_trainset(view.train, buffer_);
  model_ = fit_classifier(model_, trainset, view.val, seeds::domain(run_seed_, t, "train"));

  domain_sizes_.push_back(view.train.size());
  int per_class = cfg_.buffer_per_class;
  if (cfg_.buffer_budget > 0) {
    const auto quotas = proportional_quotas(domain_sizes_, cfg_.buffer_budget);
    shrink_to_quotas(buffer_, quotas, shape_.num_classes);
    per_class = std::max(1, quotas.back() / shape_.num_classes);
  }
  buffer_ = update_replay_buffer(std::move(buffer_), view.train, t, per_class, shape_.num_classes,
                                 seeds::domain(run_seed_, t, "buffer"));
}

nlohmann::json ErStrategy::checkpoint() const {
  nlohmann::json j = SeqFtStrategy::checkpoint();
  j["buffer"] = {{"source", to_string(buffer_.source)},
                 {"domains", buffer_.domains},
                 {"data", labeled_set_to_json(buffer_.data)}};
  return j;
}

void GenReplayStrategy::train_domain(const TrainingView& view) {
  const int t = view.domain_id;
  if (t == 0) model_ = fresh_classifier(0);
  const LabeledSet trainset = compose_replay_trainset(view.train, replay_from_synthetic(buffers_));
  model_ = fit_classifier(model_, trainset, view.val, seeds::domain(run_seed_, t, "train"));
  buffers_.push_back(synthesize_domain(view.train, t, shape_.num_classes, shared_, run_seed_));
}

nlohmann::json GenReplayStrategy::checkpoint() const {
  nlohmann::json j = SeqFtStrategy::checkpoint();
  nlohmann::json b = nlohmann::json::array();
  for (const auto& buf : buffers_) b.push_back(to_json(buf));
  j["buffers"] = b;
  return j;
}

void MtlStrategy::train_domain(const TrainingView& view) {
  const int t = view.domain_id;
  all_train_.append(view.train);
  model_ = fit_classifier(fresh_classifier(t), all_train_, view.val,
                          seeds::domain(run_seed_, t, "train"));
}

nlohmann::json MtlStrategy::checkpoint() const { return SeqFtStrategy::checkpoint(); }

// ---------------------------------------------------------------------------
// Expert bank + router

void ExpertRoutingStrategy::train_domain(const TrainingView& view) {
  const int t = view.domain_id;
  const Classifier init =
      (t == 0 || cfg_.fresh_experts) ? fresh_classifier(t) : experts_.back();
  experts_.push_back(
      fit_classifier(init, view.train, view.val, seeds::domain(run_seed_, t, "train")));
  update_router(view);
}

Classifier ExpertRoutingStrategy::train_router(const LabeledSet& trainset, int t) const {
  Classifier net = Classifier::he_init(shared_.router.layer_dims(shape_.dim, t + 1),
                                       seeds::domain(run_seed_, t, "router-init"));
  train_classifier(net, trainset, shared_.router.train, seeds::domain(run_seed_, t, "router-train"));
  return net;
}

std::vector<int> ExpertRoutingStrategy::predict(const Matrix& x) const {
  if (experts_.empty()) throw ContractError(std::string(name()) + ": predict before training");
  const std::vector<int> route = router_.route(x);
  std::vector<int> out(route.size());
  // Group rows by expert so each expert runs one batched forward pass.
  for (std::size_t e = 0; e < experts_.size(); ++e) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < route.size(); ++i) {
      if (route[i] == static_cast<int>(e)) rows.push_back(static_cast<Eigen::Index>(i));
    }
    if (rows.empty()) continue;
    Matrix sub(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
    const auto pred = experts_[e].predict(sub);
    for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<std::size_t>(rows[k])] = pred[k];
  }
  return out;
}

nlohmann::json ExpertRoutingStrategy::checkpoint() const {
  nlohmann::json experts = nlohmann::json::array();
  for (const auto& e : experts_) experts.push_back(to_json(e));
  nlohmann::json j = {{"strategy", name()},
                      {"domains_seen", seen_},
                      {"router_kind", router_kind()},
                      {"experts", experts},
                      {"router", router_.to_json()}};
  extend_checkpoint(j);
  return j;
}

void G2dStrategy::update_router(const TrainingView& view) {
  const int t = view.domain_id;
  GmmGenerator gen;
  buffers_.push_back(synthesize_domain(view.train, t, shape_.num_classes, shared_, run_seed_, &gen));
  generators_.push_back(std::move(gen));
  router_ = t == 0 ? RouterModel::constant()
                   : RouterModel::discriminator(train_router(build_router_trainset(buffers_), t));
}

void G2dStrategy::extend_checkpoint(nlohmann::json& j) const {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& buf : buffers_) b.push_back(to_json(buf));
  nlohmann::json g = nlohmann::json::array();
  for (const auto& gen : generators_) g.push_back(to_json(gen));
  j["buffers"] = b;
  j["generators"] = g;
}

void OracleRouterStrategy::update_router(const TrainingView& view) {
  const int t = view.domain_id;
  real_.push_back({t, view.train.features});
  router_ = t == 0 ? RouterModel::constant()
                   : RouterModel::discriminator(train_router(build_router_trainset(real_), t));
}

void CentroidRouterStrategy::update_router(const TrainingView& view) {
  const int t = view.domain_id;
  add_domain_centroids(table_, {t, view.train.features}, cfg_.centroids,
                       seeds::domain(run_seed_, 0, "centroids"));
  const int k_nn = std::min<int>(cfg_.neighbors, static_cast<int>(table_.centroids.rows()));
  router_ = RouterModel::centroid(table_, k_nn);
}

// ---------------------------------------------------------------------------

bool is_strategy_name(std::string_view name) {
  return std::find(kStrategyNames.begin(), kStrategyNames.end(), name) != kStrategyNames.end();
}

std::string valid_strategy_list() {
  std::string out;
  for (auto n : kStrategyNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg, const SharedConfig& shared,
                                        const StreamShape& shape, std::uint64_t run_seed) {
  const std::string& n = cfg.name;
  if (n == "seqft") return std::make_unique<SeqFtStrategy>(cfg, shared, shape, run_seed);
  if (n == "ewc") return std::make_unique<EwcStrategy>(cfg, shared, shape, run_seed);
  if (n == "er") return std::make_unique<ErStrategy>(cfg, shared, shape, run_seed);
  if (n == "gen_replay") return std::make_unique<GenReplayStrategy>(cfg, shared, shape, run_seed);
  if (n == "g2d") return std::make_unique<G2dStrategy>(cfg, shared, shape, run_seed);
  if (n == "oracle_router") return std::make_unique<OracleRouterStrategy>(cfg, shared, shape, run_seed);
  if (n == "centroid_router") return std::make_unique<CentroidRouterStrategy>(cfg, shared, shape, run_seed);
  if (n == "mtl") return std::make_unique<MtlStrategy>(cfg, shared, shape, run_seed);
  throw ConfigError("unknown strategy '" + n + "' (valid: " + valid_strategy_list() + ")");
}

}  // namespace dilab
