// dilab: run, report and inspect domain-incremental experiments.
//
//   dilab run <config> [--out DIR] [--jobs N]
//   dilab report <DIR>
//   dilab project <run_id> --router <kind> [--dir DIR]
//   dilab validate <config>
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dilab/config.hpp"
#include "dilab/error.hpp"
#include "dilab/persist.hpp"
#include "dilab/router.hpp"
#include "dilab/runner.hpp"

namespace fs = std::filesystem;
using namespace dilab;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

int print_violations(const ConfigError& e) {
  std::cerr << "invalid config:\n";
  for (const auto& v : e.violations()) std::cerr << "  - " << v << '\n';
  return kInvalid;
}

int cmd_validate(const std::string& path) {
  try {
    const ExperimentConfig cfg = load_config(path);
    std::cout << "ok: " << cfg.strategies.size() << " strategies x " << cfg.seeds.size()
              << " seeds, " << cfg.benchmark.domains << " domains\n";
    return kOk;
  } catch (const ConfigError& e) {
    return print_violations(e);
  } catch (const IoError& e) {
    std::cerr << e.what() << '\n';
    return kInvalid;
  }
}

int cmd_run(const std::string& path, const std::string& out_opt, int jobs) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const ConfigError& e) {
    return print_violations(e);
  } catch (const IoError& e) {
    std::cerr << e.what() << '\n';
    return kInvalid;
  }
  const fs::path out = out_opt.empty() ? fs::path(cfg.output_dir) : fs::path(out_opt);
  try {
    fs::create_directories(out);
    const auto records = run_experiment(cfg, jobs, out);
    persist_results(records, cfg, out);
    std::cout << read_file(out / "report.txt");
    bool failed = false;
    for (const auto& r : records) {
      if (!r.ok()) {
        std::cerr << "run " << r.run_id << " (" << r.strategy << ", seed " << r.seed
                  << ") failed: " << r.failure << '\n';
        failed = true;
      }
    }
    return failed ? kRuntime : kOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

int cmd_report(const std::string& dir) {
  try {
    std::cout << regenerate_report(dir);
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

int cmd_project(const std::string& run_id, const std::string& kind, const std::string& dir) {
  try {
    const fs::path base(dir);
    const ExperimentConfig cfg = load_config((base / "config.json").string());
    const auto ck = nlohmann::json::parse(read_file(base / run_id / "checkpoint.json"));
    if (!ck.contains("router")) {
      std::cerr << "run " << run_id << " (" << ck.value("strategy", "?") << ") has no router\n";
      return kInvalid;
    }
    const std::string actual = ck.at("router_kind").get<std::string>();
    if (actual != kind) {
      std::cerr << "run " << run_id << " has a '" << actual << "' router, not '" << kind << "'\n";
      return kInvalid;
    }
    const RouterModel router = RouterModel::from_json(ck.at("router"));
    const DomainStream stream = build_run_stream(cfg, ck.at("seed").get<std::uint64_t>());
    const ProjectionRows rows = project_router(router, stream, kind);
    std::printf("run_id,router_kind,domain,pc1,pc2\n");
    for (Eigen::Index i = 0; i < rows.coords.rows(); ++i) {
      std::printf("%s,%s,%d,%.6f,%.6f\n", run_id.c_str(), kind.c_str(),
                  rows.domains[static_cast<std::size_t>(i)] + 1, rows.coords(i, 0), rows.coords(i, 1));
    }
    std::fprintf(stderr, "explained variance: %.6f %.6f\n", rows.explained[0], rows.explained[1]);
    return kOk;
  } catch (const ConfigError& e) {
    return print_violations(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-incremental continual learning lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir, report_dir, run_id, router_kind, project_dir = "results";
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run every strategy x seed of a config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (default: config 'output')");
  run->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Re-render report.txt from a result directory");
  report->add_option("dir", report_dir, "Result directory")->required();

  auto* project = app.add_subcommand("project", "2-D PCA projection of a run's router features");
  project->add_option("run_id", run_id, "Run id")->required();
  project->add_option("--router", router_kind, "synthetic, oracle or centroid")->required();
  project->add_option("--dir", project_dir, "Result directory");

  auto* validate = app.add_subcommand("validate", "Check a config and list every violation");
  validate->add_option("config", config_path, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  if (*run) return cmd_run(config_path, out_dir, jobs);
  if (*report) return cmd_report(report_dir);
  if (*project) return cmd_project(run_id, router_kind, project_dir);
  if (*validate) return cmd_validate(config_path);
  return kInvalid;
}
