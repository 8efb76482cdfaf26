#include "dilab/runner.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

#include "dilab/error.hpp"
#include "dilab/rng.hpp"

namespace dilab {

std::string make_run_id(const ExperimentConfig& cfg, const StrategyConfig& strategy,
                        std::uint64_t seed) {
  nlohmann::json key = {{"benchmark", to_json(cfg.benchmark)},
                        {"generator", to_json(cfg.shared)},
                        {"router", {{"hidden", cfg.shared.router.hidden},
                                    {"epochs", cfg.shared.router.train.epochs},
                                    {"batch_size", cfg.shared.router.train.batch_size},
                                    {"optimizer", to_string(cfg.shared.router.train.optimizer)},
                                    {"learning_rate", cfg.shared.router.train.learning_rate}}},
                        {"strategy", to_json(strategy)},
                        {"seed", seed}};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key.dump())));
  return buf;
}

DomainStream build_run_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto recipes = cfg.benchmark.recipes();
  return build_stream(recipes, seeds::stream(seed));
}

ProjectionRows project_router(const RouterModel& router, const DomainStream& stream,
                              const std::string& router_kind) {
  ProjectionRows rows;
  rows.router_kind = router_kind;
  LabeledSet stacked(stream.dim);
  for (const auto& ds : stream.domains) {
    stacked.append(LabeledSet(ds.test.features,
                              std::vector<int>(static_cast<std::size_t>(ds.test.size()), ds.domain_id)));
  }
  rows.domains = stacked.labels;
  const Projection2d p = pca_project_2d(router.features(stacked.features));
  rows.coords = p.coords;
  rows.explained = p.explained;
  return rows;
}

RunRecord run_single(const ExperimentConfig& cfg, std::size_t index, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& run_dir) {
  const StrategyConfig& scfg = cfg.strategies.at(index);
  RunRecord rec;
  rec.run_id = make_run_id(cfg, scfg, seed);
  rec.strategy = scfg.name;
  rec.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const DomainStream stream = build_run_stream(cfg, seed);
    const int T = stream.num_domains();
    const StreamShape shape{stream.dim, stream.num_classes, T};
    auto strategy = make_strategy(scfg, cfg.shared, shape, seed);

    rec.alpha = AccuracyMatrix(T);
    for (int t = 0; t < T; ++t) {
      strategy->train_on_domain(DomainAccess(stream, t));
      for (int s = 0; s <= t; ++s) {
        const auto pred = strategy->predict(stream[s].test.features);
        record_alpha(rec.alpha, s, t, pred, stream[s].test.labels);
      }
      rec.average.push_back(average_accuracy(rec.alpha, t));
    }
    rec.bwt = backward_transfer(rec.alpha);

    if (const RouterModel* router = strategy->router()) {
      LabeledSet stacked(stream.dim);
      for (const auto& ds : stream.domains) {
        stacked.append(LabeledSet(ds.test.features,
                                  std::vector<int>(static_cast<std::size_t>(ds.test.size()), ds.domain_id)));
      }
      const std::string kind(strategy->router_kind());
      rec.routing = routing_accuracy(*router, stacked.features, stacked.labels, stream.num_domains(), kind);
      const Matrix f = router->features(stacked.features);
      if (f.cols() >= 2 && f.rows() >= 3) rec.projection = project_router(*router, stream, kind);
    }

    if (run_dir) {
      std::filesystem::create_directories(*run_dir);
      std::ofstream out(*run_dir / "checkpoint.json");
      if (!out) throw IoError("cannot write " + (*run_dir / "checkpoint.json").string());
      nlohmann::json ck = strategy->checkpoint();
      ck["run_id"] = rec.run_id;
      ck["seed"] = seed;
      out << ck.dump() << '\n';
    }
  } catch (const std::exception& e) {
    rec.failure = e.what();
  }
  rec.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, int jobs,
                                      const std::optional<std::filesystem::path>& out_dir) {
  struct Job {
    std::size_t strategy;
    std::uint64_t seed;
  };
  std::vector<Job> queue;
  for (std::size_t i = 0; i < cfg.strategies.size(); ++i)
    for (std::uint64_t seed : cfg.seeds) queue.push_back({i, seed});

  std::vector<RunRecord> records(queue.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < queue.size(); k = next++) {
      std::optional<std::filesystem::path> dir;
      if (out_dir) dir = *out_dir / make_run_id(cfg, cfg.strategies[queue[k].strategy], queue[k].seed);
      records[k] = run_single(cfg, queue[k].strategy, queue[k].seed, dir);
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(queue.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json alpha = nlohmann::json::array();
  for (int t = 0; t < r.alpha.num_domains(); ++t) {
    for (int s = 0; s <= t; ++s) {
      if (r.alpha.has(s, t)) alpha.push_back({{"s", s + 1}, {"t", t + 1}, {"alpha", r.alpha.at(s, t)}});
    }
  }
  nlohmann::json j = {{"run_id", r.run_id},
                      {"strategy", r.strategy},
                      {"seed", r.seed},
                      {"alpha", alpha},
                      {"average_accuracy", r.average},
                      {"bwt_final", r.bwt},
                      {"duration_seconds", r.duration_seconds},
                      {"failure", r.failure}};
  if (r.routing) {
    j["routing"] = {{"router_kind", r.routing->router_kind},
                    {"overall", r.routing->overall},
                    {"per_domain", r.routing->per_domain},
                    {"confusion", r.routing->confusion}};
  }
  return j;
}

}  // namespace dilab
