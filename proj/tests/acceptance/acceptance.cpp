// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance [--only N[,N...]]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dilab/classifier.hpp"
#include "dilab/config.hpp"
#include "dilab/ewc.hpp"
#include "dilab/eval.hpp"
#include "dilab/gmm.hpp"
#include "dilab/gradcheck.hpp"
#include "dilab/persist.hpp"
#include "dilab/rng.hpp"
#include "dilab/runner.hpp"
#include "dilab/strategy.hpp"

namespace fs = std::filesystem;
using namespace dilab;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentConfig load(const std::string& name) {
  return load_config((fs::path(DILAB_SOURCE_DIR) / "configs" / name).string());
}

std::size_t strategy_index(const ExperimentConfig& cfg, const std::string& name) {
  for (std::size_t i = 0; i < cfg.strategies.size(); ++i)
    if (cfg.strategies[i].name == name) return i;
  throw std::runtime_error("config has no strategy " + name);
}

fs::path scratch(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / ("dilab-acceptance-" + leaf);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs every seed of one strategy and returns the records plus wall time.
struct SweepResult {
  std::vector<RunRecord> runs;
  double seconds = 0.0;
};

SweepResult sweep(const ExperimentConfig& cfg, const std::string& name,
                  const std::optional<fs::path>& dir = std::nullopt) {
  SweepResult out;
  const auto start = Clock::now();
  const std::size_t idx = strategy_index(cfg, name);
  for (auto seed : cfg.seeds) {
    std::optional<fs::path> run_dir;
    if (dir) run_dir = *dir / (name + "-" + std::to_string(seed));
    out.runs.push_back(run_single(cfg, idx, seed, run_dir));
    if (!out.runs.back().ok()) throw std::runtime_error(name + " failed: " + out.runs.back().failure);
  }
  out.seconds = seconds_since(start);
  return out;
}

double mean_of(const std::vector<RunRecord>& runs, const std::function<double(const RunRecord&)>& f) {
  double s = 0.0;
  for (const auto& r : runs) s += f(r);
  return s / static_cast<double>(runs.size());
}

Matrix random_matrix(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto start = Clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + trial % 4, c = 2 + trial % 3;
    std::vector<int> dims{d};
    for (int h = 0; h <= trial % 2; ++h) dims.push_back(4 + trial);
    dims.push_back(c);
    const Classifier model = Classifier::he_init(dims, rng.next());
    const Matrix x = random_matrix(rng, 8, d);
    std::vector<int> y(8);
    for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    worst = std::max(worst, finite_diff_check(model, x, y, 1e-5).max_rel_error);
  }

  // Task loss plus a two-anchor EWC penalty.
  const Classifier model = Classifier::he_init({3, 8, 3}, 77);
  EwcState ewc;
  for (int a = 0; a < 2; ++a) {
    Vector theta(model.num_params()), fisher(model.num_params());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      theta(i) = rng.normal();
      fisher(i) = rng.uniform();
    }
    ewc.anchors.push_back({theta, fisher});
  }
  const Matrix x = random_matrix(rng, 8, 3);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 1, 0};
  Classifier probe = model;
  const Penalty penalty = make_ewc_penalty(ewc);
  const Objective total = [&](const Vector& p, Vector& g) {
    probe.params() = p;
    LossAndGrad lg = loss_and_grad(probe, x, y);
    g = lg.grad;
    return lg.loss + penalty(p, g);
  };
  const double ewc_err = finite_diff_check(total, model.params(), 1e-5).max_rel_error;
  const double secs = seconds_since(start);
  return {worst < 1e-5 && ewc_err < 1e-5 && secs < 10.0,
          fmt("10 nets max rel err %.2e, EWC loss %.2e (< 1e-05), %.2f s (< 10 s)", worst, ewc_err, secs)};
}

Outcome em_soundness() {
  const auto start = Clock::now();
  Rng rng(314159);
  double worst_drop = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(3));
    const int d = rng.below(2) == 0 ? 2 : 5;
    const Matrix centers = 2.5 * random_matrix(rng, 3, d);
    Matrix x(300, d);
    for (int i = 0; i < 300; ++i)
      x.row(i) = centers.row(static_cast<Eigen::Index>(rng.below(3))) + random_matrix(rng, 1, d);
    FitConfig cfg;
    cfg.components = k;
    cfg.tolerance = 1e-10;
    cfg.seed = rng.next();
    const GmmFit fit = fit_em(LabeledSet(x, std::vector<int>(300, 0)), 1, cfg);
    const auto& ll = fit.traces[0].log_likelihood;
    for (std::size_t i = 1; i < ll.size(); ++i) worst_drop = std::max(worst_drop, ll[i - 1] - ll[i]);
  }

  double worst_mle = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const int d = 2 + trial;
    const Matrix x = random_matrix(rng, 120, d) * 1.7;
    FitConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const ClassMixture m = fit_em(LabeledSet(x, std::vector<int>(120, 0)), 1, cfg).generator.classes[0];
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().mean();
    worst_mle = std::max({worst_mle, (m.means.row(0) - mean).cwiseAbs().maxCoeff(),
                          (m.variances.row(0) - var).cwiseAbs().maxCoeff()});
  }
  const double secs = seconds_since(start);
  return {worst_drop <= 1e-9 && worst_mle <= 1e-9 && secs < 10.0,
          fmt("largest LL decrease %.2e (<= 1e-09), K=1 MLE gap %.2e (<= 1e-09), %.2f s (< 10 s)",
              std::max(worst_drop, 0.0), worst_mle, secs)};
}

Outcome average_accuracy_exact() {
  AccuracyMatrix m(2);
  m.set(0, 0, 0.8);
  m.set(0, 1, 0.6);
  m.set(1, 1, 0.9);
  AccuracyMatrix ones(3);
  for (int t = 0; t < 3; ++t)
    for (int s = 0; s <= t; ++s) ones.set(s, t, 1.0);
  const double a2 = average_accuracy(m, 1);
  bool all_one = true;
  for (int t = 0; t < 3; ++t) all_one = all_one && average_accuracy(ones, t) == 1.0;
  return {a2 == 0.75 && all_one, fmt("column (0.6, 0.9) -> %.17g, all-ones -> %s", a2, all_one ? "1" : "not 1")};
}

Outcome forgetting_reproduction() {
  const ExperimentConfig cfg = load("flip_t2.json");
  const SweepResult seq = sweep(cfg, "seqft");
  const SweepResult g2d = sweep(cfg, "g2d");
  const double a12_seq = mean_of(seq.runs, [](const RunRecord& r) { return r.alpha.at(0, 1); });
  const double a11_seq = mean_of(seq.runs, [](const RunRecord& r) { return r.alpha.at(0, 0); });
  const double a12_g2d = mean_of(g2d.runs, [](const RunRecord& r) { return r.alpha.at(0, 1); });
  const double secs = seq.seconds + g2d.seconds;
  return {a12_seq <= 0.3 && a11_seq >= 0.95 && a12_g2d >= 0.9 && secs < 120.0,
          fmt("seqft alpha(1,2) %.4f (<= 0.3), alpha(1,1) %.4f (>= 0.95); g2d alpha(1,2) %.4f (>= 0.9); %.1f s",
              a12_seq, a11_seq, a12_g2d, secs)};
}

// Criteria 5-7 share one benchmark; runs are computed once.
struct ShiftRuns {
  ExperimentConfig cfg;
  std::map<std::string, SweepResult> by_name;
  fs::path dir;
  double final_mean(const std::string& n) const {
    return mean_of(by_name.at(n).runs, [](const RunRecord& r) { return r.final_average(); });
  }
  double routing_mean(const std::string& n) const {
    return mean_of(by_name.at(n).runs, [](const RunRecord& r) { return r.routing->overall; });
  }
};

const ShiftRuns& shift_runs() {
  static const ShiftRuns runs = [] {
    ShiftRuns r;
    r.cfg = load("shift_t4.json");
    r.dir = scratch("shift");
    for (const char* n : {"seqft", "gen_replay", "g2d", "oracle_router", "centroid_router", "mtl"})
      r.by_name[n] = sweep(r.cfg, n, r.dir);
    return r;
  }();
  return runs;
}

bool buffers_identical(const ShiftRuns& r) {
  for (auto seed : r.cfg.seeds) {
    const auto g = nlohmann::json::parse(
        read_file(r.dir / ("g2d-" + std::to_string(seed)) / "checkpoint.json"));
    const auto b = nlohmann::json::parse(
        read_file(r.dir / ("gen_replay-" + std::to_string(seed)) / "checkpoint.json"));
    // gen_replay stores the buffers it replays; g2d stores the buffers its router saw.
    if (g.at("buffers") != b.at("buffers")) return false;
  }
  return true;
}

Outcome headline_ordering() {
  const ShiftRuns& r = shift_runs();
  const double g2d = r.final_mean("g2d"), gr = r.final_mean("gen_replay"), seq = r.final_mean("seqft");
  const bool same = buffers_identical(r);
  const double secs = r.by_name.at("g2d").seconds + r.by_name.at("gen_replay").seconds +
                      r.by_name.at("seqft").seconds;
  return {g2d >= gr + 0.02 && g2d >= seq + 0.05 && same && secs < 300.0,
          fmt("A_T g2d %.4f, gen_replay %.4f (need <= %.4f), seqft %.4f (need <= %.4f); buffers %s; %.1f s",
              g2d, gr, g2d - 0.02, seq, g2d - 0.05, same ? "bit-identical" : "DIFFER", secs)};
}

Outcome router_gap() {
  const ShiftRuns& r = shift_runs();
  const double syn = r.routing_mean("g2d"), orc = r.routing_mean("oracle_router"),
               cen = r.routing_mean("centroid_router");
  const double secs = r.by_name.at("g2d").seconds + r.by_name.at("oracle_router").seconds +
                      r.by_name.at("centroid_router").seconds;
  return {orc - syn <= 0.05 && syn > cen && orc > cen && secs < 180.0,
          fmt("routing synthetic %.4f, oracle %.4f (gap %.2f pp <= 5), centroid %.4f; %.1f s", syn, orc,
              100.0 * (orc - syn), cen, secs)};
}

Outcome quasi_oracle_sandwich() {
  const ShiftRuns& r = shift_runs();
  const double mtl = r.final_mean("mtl"), orc = r.final_mean("oracle_router"), g2d = r.final_mean("g2d");
  return {mtl >= orc - 0.01 && orc >= g2d - 0.01,
          fmt("A_T mtl %.4f (need >= %.4f), oracle_router %.4f (need >= %.4f), g2d %.4f", mtl, orc - 0.01, orc,
              g2d - 0.01, g2d)};
}

using RowKey = std::pair<std::vector<double>, int>;
std::multiset<RowKey> rows_of(const LabeledSet& s) {
  std::multiset<RowKey> out;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const Eigen::RowVectorXd r = s.features.row(i);
    out.emplace(std::vector<double>(r.data(), r.data() + r.size()), s.labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

Outcome degenerate_equalities() {
  ExperimentConfig cfg = load("shift_t4.json");
  const std::uint64_t seed = cfg.seeds.front();
  const DomainStream stream = build_run_stream(cfg, seed);
  const StreamShape shape{stream.dim, stream.num_classes, stream.num_domains()};

  StrategyConfig seq = cfg.strategies[strategy_index(cfg, "seqft")];
  StrategyConfig ewc = cfg.strategies[strategy_index(cfg, "ewc")];
  ewc.ewc_lambda = 0.0;
  auto a = make_strategy(seq, cfg.shared, shape, seed);
  auto b = make_strategy(ewc, cfg.shared, shape, seed);
  bool trajectory_equal = true;
  for (int t = 0; t < stream.num_domains(); ++t) {
    a->train_on_domain(DomainAccess(stream, t));
    b->train_on_domain(DomainAccess(stream, t));
    trajectory_equal = trajectory_equal && dynamic_cast<const SeqFtStrategy&>(*a).model() ==
                                               dynamic_cast<const SeqFtStrategy&>(*b).model();
  }

  StrategyConfig er = cfg.strategies[strategy_index(cfg, "er")];
  er.buffer_per_class = 1 << 20;
  er.buffer_budget = 0;
  StrategyConfig mtl = cfg.strategies[strategy_index(cfg, "mtl")];
  er.classifier.train.epochs = mtl.classifier.train.epochs = 1;
  auto e = make_strategy(er, cfg.shared, shape, seed);
  auto m = make_strategy(mtl, cfg.shared, shape, seed);
  for (int t = 0; t < stream.num_domains(); ++t) {
    e->train_on_domain(DomainAccess(stream, t));
    m->train_on_domain(DomainAccess(stream, t));
  }
  const bool multiset_equal = rows_of(e->last_trainset()) == rows_of(m->last_trainset());
  return {trajectory_equal && multiset_equal,
          fmt("ewc(lambda=0) vs seqft parameters %s after every domain; er(unlimited) vs mtl final trainset "
              "%s (%lld rows)",
              trajectory_equal ? "bit-equal" : "DIFFER", multiset_equal ? "multiset-equal" : "DIFFER",
              static_cast<long long>(e->last_trainset().size()))};
}

Outcome determinism() {
  const fs::path a = scratch("det-a"), b = scratch("det-b");
  const std::string cfg = (fs::path(DILAB_SOURCE_DIR) / "configs" / "flip_t2.json").string();
  auto run = [&](const fs::path& out) {
    const std::string cmd = std::string("\"") + DILAB_CLI + "\" run \"" + cfg + "\" --out \"" +
                            out.string() + "\" > /dev/null";
    return std::system(cmd.c_str());
  };
  const int ra = run(a), rb = run(b);
  std::vector<std::string> differing;
  for (const char* f : {"matrix.csv", "summary.csv", "routing.csv"}) {
    if (!fs::exists(a / f) || read_file(a / f) != read_file(b / f)) differing.push_back(f);
  }
  std::string which;
  for (const auto& d : differing) which += " " + d;
  return {ra == 0 && rb == 0 && differing.empty(),
          fmt("two `run` invocations: exit %d/%d, matrix/summary/routing.csv %s%s", ra, rb,
              differing.empty() ? "byte-identical" : "differ:", which.c_str())};
}

Outcome routing_decomposition() {
  const ExperimentConfig cfg = load("shift_t4.json");
  const std::uint64_t seed = cfg.seeds.front();
  const DomainStream stream = build_run_stream(cfg, seed);
  const StreamShape shape{stream.dim, stream.num_classes, stream.num_domains()};
  auto strat = make_strategy(cfg.strategies[strategy_index(cfg, "g2d")], cfg.shared, shape, seed);
  for (int t = 0; t < stream.num_domains(); ++t) strat->train_on_domain(DomainAccess(stream, t));
  const auto& g2d = dynamic_cast<const G2dStrategy&>(*strat);

  // 25 test points from each of the four domains.
  LabeledSet fixture(stream.dim);
  for (int t = 0; t < stream.num_domains(); ++t) {
    std::vector<Eigen::Index> rows(25);
    for (int i = 0; i < 25; ++i) rows[static_cast<std::size_t>(i)] = i;
    fixture.append(stream[t].test.select(rows));
  }
  const auto pred = g2d.predict(fixture.features);
  long direct = 0;
  for (Eigen::Index i = 0; i < fixture.size(); ++i) direct += pred[i] == fixture.labels[i];

  // Point by point: route, then ask the chosen expert.
  long brute = 0;
  for (Eigen::Index i = 0; i < fixture.size(); ++i) {
    const Matrix x = fixture.features.row(i);
    const int expert = g2d.router()->route(x)[0];
    brute += g2d.experts()[static_cast<std::size_t>(expert)].predict(x)[0] == fixture.labels[i];
  }
  return {direct == brute && fixture.size() == 100,
          fmt("g2d_predict %ld/100 correct, per-point decomposition %ld/100", direct, brute)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream ss(argv[i + 1]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"EM soundness", em_soundness},
      {"average accuracy exactness", average_accuracy_exact},
      {"forgetting reproduction (conditional flip, T=2)", forgetting_reproduction},
      {"headline ordering (covariate shift, T=4)", headline_ordering},
      {"router gap (covariate shift, T=4)", router_gap},
      {"quasi-oracle sandwich (covariate shift, T=4)", quasi_oracle_sandwich},
      {"degenerate equalities", degenerate_equalities},
      {"determinism", determinism},
      {"routing decomposition oracle", routing_decomposition},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
