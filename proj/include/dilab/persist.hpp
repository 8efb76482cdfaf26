#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dilab/config.hpp"
#include "dilab/runner.hpp"

namespace dilab {

// Result files written into an output directory. All floats use %.6f and
// every row ends with '\n'. Domain indices s, t and domain are 1-based.
//
//   matrix.csv      run_id,strategy,seed,s,t,alpha
//   summary.csv     run_id,strategy,seed,t,A_t,BWT-final
//   routing.csv     run_id,router_kind,domain,accuracy   (domain "all" = overall)
//   projection.csv  run_id,router_kind,domain,pc1,pc2
//   report.txt      strategy rows with mean +/- sample std over seeds
//   config.json     resolved experiment config
//   <run_id>/record.json, <run_id>/checkpoint.json

std::string matrix_csv(const std::vector<RunRecord>& records);
std::string summary_csv(const std::vector<RunRecord>& records);
std::string routing_csv(const std::vector<RunRecord>& records);
std::string projection_csv(const std::vector<RunRecord>& records);

struct SummaryRow {
  std::string run_id;
  std::string strategy;
  std::uint64_t seed = 0;
  int t = 0;
  double average = 0.0;
  double bwt = 0.0;
};

struct RoutingRow {
  std::string run_id;
  std::string router_kind;
  std::string domain;
  double accuracy = 0.0;
};

std::vector<SummaryRow> parse_summary_csv(const std::string& text);
std::vector<RoutingRow> parse_routing_csv(const std::string& text);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};
MeanStd mean_std(const std::vector<double>& values);

/// Strategy rows in first-appearance order, final A_T per run aggregated over seeds.
std::string render_report(const std::string& benchmark, const std::vector<SummaryRow>& summary,
                          const std::vector<RoutingRow>& routing,
                          const std::vector<std::string>& failures = {});

/// Writes every file listed above. Throws IoError naming the path on failure.
void persist_results(const std::vector<RunRecord>& records, const ExperimentConfig& cfg,
                     const std::filesystem::path& out_dir);

/// Rebuilds report.txt from summary.csv / routing.csv in dir and returns it.
std::string regenerate_report(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace dilab
