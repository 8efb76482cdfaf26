#include "dilab/persist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dilab/error.hpp"

namespace dilab {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string matrix_csv(const std::vector<RunRecord>& records) {
  std::string out = "run_id,strategy,seed,s,t,alpha\n";
  for (const auto& r : records) {
    if (!r.ok()) continue;
    for (int t = 0; t < r.alpha.num_domains(); ++t) {
      for (int s = 0; s <= t; ++s) {
        out += r.run_id + ',' + r.strategy + ',' + std::to_string(r.seed) + ',' +
               std::to_string(s + 1) + ',' + std::to_string(t + 1) + ',' + fmt6(r.alpha.at(s, t)) + '\n';
      }
    }
  }
  return out;
}

std::string summary_csv(const std::vector<RunRecord>& records) {
  std::string out = "run_id,strategy,seed,t,A_t,BWT-final\n";
  for (const auto& r : records) {
    if (!r.ok()) continue;
    for (std::size_t t = 0; t < r.average.size(); ++t) {
      out += r.run_id + ',' + r.strategy + ',' + std::to_string(r.seed) + ',' +
             std::to_string(t + 1) + ',' + fmt6(r.average[t]) + ',' + fmt6(r.bwt) + '\n';
    }
  }
  return out;
}

std::string routing_csv(const std::vector<RunRecord>& records) {
  std::string out = "run_id,router_kind,domain,accuracy\n";
  for (const auto& r : records) {
    if (!r.ok() || !r.routing) continue;
    for (std::size_t d = 0; d < r.routing->per_domain.size(); ++d) {
      out += r.run_id + ',' + r.routing->router_kind + ',' + std::to_string(d + 1) + ',' +
             fmt6(r.routing->per_domain[d]) + '\n';
    }
    out += r.run_id + ',' + r.routing->router_kind + ",all," + fmt6(r.routing->overall) + '\n';
  }
  return out;
}

std::string projection_csv(const std::vector<RunRecord>& records) {
  std::string out = "run_id,router_kind,domain,pc1,pc2\n";
  for (const auto& r : records) {
    if (!r.ok() || !r.projection) continue;
    const auto& p = *r.projection;
    for (Eigen::Index i = 0; i < p.coords.rows(); ++i) {
      out += r.run_id + ',' + p.router_kind + ',' + std::to_string(p.domains[static_cast<std::size_t>(i)] + 1) +
             ',' + fmt6(p.coords(i, 0)) + ',' + fmt6(p.coords(i, 1)) + '\n';
    }
  }
  return out;
}

std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::vector<SummaryRow> rows;
  std::stringstream ss(text);
  std::string line;
  std::getline(ss, line);  // header
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw IoError("summary.csv: malformed row '" + line + "'");
    rows.push_back({f[0], f[1], std::stoull(f[2]), std::stoi(f[3]), std::stod(f[4]), std::stod(f[5])});
  }
  return rows;
}

std::vector<RoutingRow> parse_routing_csv(const std::string& text) {
  std::vector<RoutingRow> rows;
  std::stringstream ss(text);
  std::string line;
  std::getline(ss, line);
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw IoError("routing.csv: malformed row '" + line + "'");
    rows.push_back({f[0], f[1], f[2], std::stod(f[3])});
  }
  return rows;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd m;
  m.n = values.size();
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

std::string render_report(const std::string& benchmark, const std::vector<SummaryRow>& summary,
                          const std::vector<RoutingRow>& routing,
                          const std::vector<std::string>& failures) {
  // Final row per run = the largest t seen for that run id.
  std::map<std::string, SummaryRow> final_rows;
  std::vector<std::string> strategy_order;
  for (const auto& row : summary) {
    auto it = final_rows.find(row.run_id);
    if (it == final_rows.end() || row.t > it->second.t) final_rows[row.run_id] = row;
    if (std::find(strategy_order.begin(), strategy_order.end(), row.strategy) == strategy_order.end()) {
      strategy_order.push_back(row.strategy);
    }
  }
  std::map<std::string, std::vector<double>> finals, bwts;
  std::vector<std::string> run_order;
  for (const auto& row : summary) {
    if (std::find(run_order.begin(), run_order.end(), row.run_id) == run_order.end()) {
      run_order.push_back(row.run_id);
    }
  }
  for (const auto& id : run_order) {
    const SummaryRow& r = final_rows[id];
    finals[r.strategy].push_back(r.average);
    bwts[r.strategy].push_back(r.bwt);
  }

  char line[256];
  std::string out;
  out += "Final average accuracy A_T, mean \xC2\xB1 std over seeds\n\n";
  std::snprintf(line, sizeof line, "%-16s | %-28s\n", "strategy", benchmark.c_str());
  out += line;
  out += std::string(17, '-') + "+" + std::string(30, '-') + "\n";
  for (const auto& s : strategy_order) {
    const MeanStd m = mean_std(finals[s]);
    std::snprintf(line, sizeof line, "%-16s | %.6f \xC2\xB1 %.6f (n=%zu)\n", s.c_str(), m.mean, m.std, m.n);
    out += line;
  }

  std::vector<std::string> kinds;
  std::map<std::string, std::vector<double>> overall;
  for (const auto& r : routing) {
    if (r.domain != "all") continue;
    if (std::find(kinds.begin(), kinds.end(), r.router_kind) == kinds.end()) kinds.push_back(r.router_kind);
    overall[r.router_kind].push_back(r.accuracy);
  }
  if (!kinds.empty()) {
    out += "\nDomain routing accuracy, mean \xC2\xB1 std over seeds\n\n";
    std::snprintf(line, sizeof line, "%-16s | %-28s\n", "router", benchmark.c_str());
    out += line;
    out += std::string(17, '-') + "+" + std::string(30, '-') + "\n";
    for (const auto& k : kinds) {
      const MeanStd m = mean_std(overall[k]);
      std::snprintf(line, sizeof line, "%-16s | %.6f \xC2\xB1 %.6f (n=%zu)\n", k.c_str(), m.mean, m.std, m.n);
      out += line;
    }
  }

  out += "\nBackward transfer (auxiliary forgetting metric, not A_t), mean \xC2\xB1 std\n\n";
  for (const auto& s : strategy_order) {
    const MeanStd m = mean_std(bwts[s]);
    std::snprintf(line, sizeof line, "%-16s | %+.6f \xC2\xB1 %.6f\n", s.c_str(), m.mean, m.std);
    out += line;
  }

  if (!failures.empty()) {
    out += "\nFailed runs\n\n";
    for (const auto& f : failures) out += f + "\n";
  }
  return out;
}

namespace {

std::vector<SummaryRow> summary_rows(const std::vector<RunRecord>& records) {
  return parse_summary_csv(summary_csv(records));
}

}  // namespace

void persist_results(const std::vector<RunRecord>& records, const ExperimentConfig& cfg,
                     const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  write_file(out_dir / "matrix.csv", matrix_csv(records));
  write_file(out_dir / "summary.csv", summary_csv(records));
  const std::string routing = routing_csv(records);
  write_file(out_dir / "routing.csv", routing);
  write_file(out_dir / "projection.csv", projection_csv(records));
  write_file(out_dir / "config.json", serialize_config(cfg));

  std::vector<std::string> failures;
  for (const auto& r : records) {
    if (!r.ok()) failures.push_back(r.run_id + " " + r.strategy + " seed " + std::to_string(r.seed) + ": " + r.failure);
    const auto dir = out_dir / r.run_id;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create run directory " + dir.string());
    write_file(dir / "record.json", to_json(r).dump(2) + "\n");
  }
  write_file(out_dir / "report.txt",
             render_report(cfg.benchmark.name, summary_rows(records), parse_routing_csv(routing), failures));
}

std::string regenerate_report(const std::filesystem::path& dir) {
  const auto summary = parse_summary_csv(read_file(dir / "summary.csv"));
  std::vector<RoutingRow> routing;
  if (std::filesystem::exists(dir / "routing.csv")) routing = parse_routing_csv(read_file(dir / "routing.csv"));
  std::string benchmark = "benchmark";
  if (std::filesystem::exists(dir / "config.json")) {
    benchmark = load_config((dir / "config.json").string()).benchmark.name;
  }
  const std::string report = render_report(benchmark, summary, routing);
  write_file(dir / "report.txt", report);
  return report;
}

}  // namespace dilab
