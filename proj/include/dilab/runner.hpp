#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dilab/config.hpp"
#include "dilab/eval.hpp"

namespace dilab {

/// Router features of one run's test points projected to 2-D.
struct ProjectionRows {
  std::string router_kind;
  std::vector<int> domains;  // true domain per row
  Matrix coords;             // n x 2
  std::array<double, 2> explained{0.0, 0.0};
};

struct RunRecord {
  std::string run_id;
  std::string strategy;
  std::uint64_t seed = 0;
  AccuracyMatrix alpha;
  std::vector<double> average;  // A_t for t = 0..T-1
  double bwt = 0.0;
  std::optional<RoutingReport> routing;
  std::optional<ProjectionRows> projection;
  double duration_seconds = 0.0;
  std::string failure;  // empty on success

  bool ok() const { return failure.empty(); }
  double final_average() const { return average.empty() ? 0.0 : average.back(); }
};

/// 16 hex digits: FNV-1a of the canonical JSON of (benchmark, generator,
/// router, this strategy's resolved entry, seed).
std::string make_run_id(const ExperimentConfig& cfg, const StrategyConfig& strategy,
                        std::uint64_t seed);

/// Stream for one seed: build_stream(benchmark recipes, seeds::stream(seed)).
DomainStream build_run_stream(const ExperimentConfig& cfg, std::uint64_t seed);

/// Trains strategy `index` under `seed` through every domain, filling the
/// lower triangle of alpha after each domain. Routing strategies also get a
/// routing report and a projection over all test splits. A thrown component
/// error is captured in RunRecord::failure. When run_dir is set, the final
/// checkpoint is written to run_dir / "checkpoint.json".
RunRecord run_single(const ExperimentConfig& cfg, std::size_t index, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& run_dir = std::nullopt);

/// Every (strategy, seed) pair, strategy-major, on up to `jobs` threads.
/// With out_dir set, each run writes only inside out_dir / run_id.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, int jobs = 1,
                                      const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Router features (see RouterModel::features) of every test split, stacked
/// in domain order, projected with pca_project_2d.
ProjectionRows project_router(const RouterModel& router, const DomainStream& stream,
                              const std::string& router_kind);

nlohmann::json to_json(const RunRecord& r);

}  // namespace dilab
