#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dilab/domain.hpp"
#include "dilab/strategy.hpp"

namespace dilab {

/// Declarative benchmark: turned into DomainRecipes by recipes().
struct BenchmarkConfig {
  std::string name = "benchmark";
  RecipeKind kind = RecipeKind::covariate_shift;
  int domains = 0;
  std::vector<std::vector<double>> class_means;  // C rows of d
  std::vector<double> variances;                 // d
  std::vector<std::vector<double>> shifts;       // T rows of d
  std::vector<double> angles;                    // T, rotation only
  std::vector<int> flip_domains;                 // conditional_flip only
  SplitSizes sizes;

  int dim() const { return class_means.empty() ? 0 : static_cast<int>(class_means.front().size()); }
  int num_classes() const { return static_cast<int>(class_means.size()); }
  std::vector<DomainRecipe> recipes() const;

  bool operator==(const BenchmarkConfig& o) const;
};

struct ExperimentConfig {
  BenchmarkConfig benchmark;
  SharedConfig shared;
  ClassifierSpec classifier;  // defaults inherited by every strategy
  std::vector<StrategyConfig> strategies;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "results";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses the JSON config document. All violations are collected and thrown
/// together as one ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& cfg);
std::string serialize_config(const ExperimentConfig& cfg);

nlohmann::json to_json(const StrategyConfig& s);
nlohmann::json to_json(const BenchmarkConfig& b);
nlohmann::json to_json(const SharedConfig& s);

}  // namespace dilab
