#include "dilab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dilab/error.hpp"

namespace dilab {

using nlohmann::json;

bool BenchmarkConfig::operator==(const BenchmarkConfig& o) const {
  return name == o.name && kind == o.kind && domains == o.domains &&
         class_means == o.class_means && variances == o.variances && shifts == o.shifts &&
         angles == o.angles && flip_domains == o.flip_domains && sizes.train == o.sizes.train &&
         sizes.val == o.sizes.val && sizes.test == o.sizes.test;
}

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace

std::vector<DomainRecipe> BenchmarkConfig::recipes() const {
  const Matrix means = to_matrix(class_means);
  const Vector var = to_vector(variances);
  std::vector<Vector> shift_vecs;
  for (const auto& s : shifts) shift_vecs.push_back(to_vector(s));
  switch (kind) {
    case RecipeKind::covariate_shift:
      return recipe_covariate_shift(means, shift_vecs, var, sizes);
    case RecipeKind::rotation:
      return recipe_rotation(means, angles, var, sizes);
    case RecipeKind::conditional_flip:
      return recipe_conditional_flip(means, var, domains,
                                     std::set<int>(flip_domains.begin(), flip_domains.end()),
                                     sizes, shift_vecs);
  }
  return {};
}

namespace {

/// Collects violations while reading typed fields out of a JSON object.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void error(std::string msg) { errors_.push_back(std::move(msg)); }

  void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) return;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) error("unknown field '" + where + it.key() + "'");
    }
  }

  template <typename T>
  bool read(const json& obj, const std::string& where, const char* key, T& out,
            const char* type_name, bool required) {
    if (!obj.is_object() || !obj.contains(key)) {
      if (required) {
        error("missing required field '" + where + key + "' (expected " + type_name + ")");
      }
      return false;
    }
    try {
      out = obj.at(key).get<T>();
      return true;
    } catch (const json::exception&) {
      error("field '" + where + key + "' must be " + type_name);
      return false;
    }
  }

 private:
  std::vector<std::string>& errors_;
};

const std::set<std::string> kClassifierKeys = {"hidden", "epochs", "batch_size", "optimizer",
                                               "learning_rate", "lr_grid"};

void read_classifier(Reader& r, const json& obj, const std::string& where, ClassifierSpec& spec) {
  r.read(obj, where, "hidden", spec.hidden, "a list of positive integers", false);
  r.read(obj, where, "epochs", spec.train.epochs, "an integer", false);
  r.read(obj, where, "batch_size", spec.train.batch_size, "an integer", false);
  std::string opt;
  if (r.read(obj, where, "optimizer", opt, "a string", false)) {
    if (opt == "sgd" || opt == "adam") {
      spec.train.optimizer = optimizer_from_string(opt);
    } else {
      r.error("field '" + where + "optimizer' must be 'sgd' or 'adam', got '" + opt + "'");
    }
  }
  r.read(obj, where, "learning_rate", spec.train.learning_rate, "a number", false);
  r.read(obj, where, "lr_grid", spec.lr_grid, "a list of numbers", false);

  for (int h : spec.hidden) {
    if (h < 1) r.error("'" + where + "hidden' entries must be >= 1");
  }
  if (spec.train.epochs < 0) r.error("'" + where + "epochs' must be >= 0");
  if (spec.train.batch_size < 1) r.error("'" + where + "batch_size' must be >= 1");
  if (!(spec.train.learning_rate > 0.0)) r.error("'" + where + "learning_rate' must be > 0");
  for (double lr : spec.lr_grid) {
    if (!(lr > 0.0)) r.error("'" + where + "lr_grid' entries must be > 0");
  }
}

json classifier_json(const ClassifierSpec& spec) {
  return {{"hidden", spec.hidden},
          {"epochs", spec.train.epochs},
          {"batch_size", spec.train.batch_size},
          {"optimizer", to_string(spec.train.optimizer)},
          {"learning_rate", spec.train.learning_rate},
          {"lr_grid", spec.lr_grid}};
}

void read_benchmark(Reader& r, const json& obj, BenchmarkConfig& b) {
  const std::string w = "benchmark.";
  if (!obj.is_object()) {
    r.error("missing required field 'benchmark' (expected an object)");
    return;
  }
  r.check_keys(obj, w, {"name", "kind", "domains", "class_means", "variances", "shifts", "angles",
                        "flip_domains", "n_train", "n_val", "n_test"});
  r.read(obj, w, "name", b.name, "a string", false);
  std::string kind;
  if (r.read(obj, w, "kind", kind, "a string", true)) {
    if (kind == "covariate_shift" || kind == "conditional_flip" || kind == "rotation") {
      b.kind = recipe_kind_from_string(kind);
    } else {
      r.error("field 'benchmark.kind' must be one of covariate_shift, conditional_flip, rotation; got '" +
              kind + "'");
    }
  }
  r.read(obj, w, "class_means", b.class_means, "a list of equal-length number lists", true);
  r.read(obj, w, "variances", b.variances, "a list of positive numbers", true);
  r.read(obj, w, "shifts", b.shifts, "a list of number lists", false);
  r.read(obj, w, "angles", b.angles, "a list of numbers (radians)", false);
  r.read(obj, w, "flip_domains", b.flip_domains, "a list of domain indices", false);
  r.read(obj, w, "n_train", b.sizes.train, "an integer", false);
  r.read(obj, w, "n_val", b.sizes.val, "an integer", false);
  r.read(obj, w, "n_test", b.sizes.test, "an integer", false);

  const bool has_domains = r.read(obj, w, "domains", b.domains, "an integer", false);
  if (!has_domains) {
    if (b.kind == RecipeKind::rotation) b.domains = static_cast<int>(b.angles.size());
    else b.domains = static_cast<int>(b.shifts.size());
  }

  const int C = b.num_classes();
  const int d = b.dim();
  if (obj.contains("class_means")) {
    if (C < 2) r.error("'benchmark.class_means' needs at least 2 classes");
    for (const auto& row : b.class_means) {
      if (static_cast<int>(row.size()) != d || d < 1) {
        r.error("'benchmark.class_means' rows must all have the same positive length");
        break;
      }
    }
  }
  if (obj.contains("variances")) {
    if (static_cast<int>(b.variances.size()) != d) {
      r.error("'benchmark.variances' must have one entry per feature (" + std::to_string(d) + ")");
    }
    for (double v : b.variances) {
      if (!(v > 0.0)) {
        r.error("'benchmark.variances' entries must be > 0");
        break;
      }
    }
  }
  if (b.domains < 1) r.error("'benchmark.domains' must be >= 1");
  if (b.kind == RecipeKind::covariate_shift && static_cast<int>(b.shifts.size()) != b.domains) {
    r.error("'benchmark.shifts' needs one shift per domain for covariate_shift");
  }
  if (b.kind == RecipeKind::conditional_flip && !b.shifts.empty() &&
      static_cast<int>(b.shifts.size()) != b.domains) {
    r.error("'benchmark.shifts' must be empty or have one shift per domain");
  }
  for (const auto& s : b.shifts) {
    if (static_cast<int>(s.size()) != d) {
      r.error("'benchmark.shifts' rows must have length " + std::to_string(d));
      break;
    }
  }
  if (b.kind == RecipeKind::rotation) {
    if (static_cast<int>(b.angles.size()) != b.domains) {
      r.error("'benchmark.angles' needs one angle per domain for rotation");
    }
    if (d < 2) r.error("rotation benchmarks need at least 2 features");
  }
  for (int f : b.flip_domains) {
    if (f < 0 || f >= b.domains) {
      r.error("'benchmark.flip_domains' entry " + std::to_string(f) + " outside [0, " +
              std::to_string(b.domains) + ")");
    }
  }
  if (b.sizes.train < 5 * std::max(C, 1)) {
    r.error("'benchmark.n_train' must be >= 5 per class");
  }
  if (b.sizes.val < 0) r.error("'benchmark.n_val' must be >= 0");
  if (b.sizes.test < 1) r.error("'benchmark.n_test' must be >= 1");
}

void read_strategy(Reader& r, const json& entry, std::size_t index, const ClassifierSpec& defaults,
                   StrategyConfig& s) {
  const std::string w = "strategies[" + std::to_string(index) + "].";
  s.classifier = defaults;
  if (entry.is_string()) {
    s.name = entry.get<std::string>();
  } else if (entry.is_object()) {
    std::set<std::string> allowed = {"name", "lambda", "fisher_samples", "buffer_per_class",
                                     "buffer_budget", "fresh_experts", "centroids", "neighbors"};
    allowed.insert(kClassifierKeys.begin(), kClassifierKeys.end());
    r.check_keys(entry, w, allowed);
    r.read(entry, w, "name", s.name, "a string", true);
    r.read(entry, w, "lambda", s.ewc_lambda, "a number", false);
    r.read(entry, w, "fisher_samples", s.fisher_samples, "an integer", false);
    r.read(entry, w, "buffer_per_class", s.buffer_per_class, "an integer", false);
    r.read(entry, w, "buffer_budget", s.buffer_budget, "an integer", false);
    r.read(entry, w, "fresh_experts", s.fresh_experts, "a boolean", false);
    r.read(entry, w, "centroids", s.centroids, "an integer", false);
    r.read(entry, w, "neighbors", s.neighbors, "an integer", false);
    read_classifier(r, entry, w, s.classifier);
  } else {
    r.error("'" + w.substr(0, w.size() - 1) + "' must be a strategy name or an object");
    return;
  }
  if (!s.name.empty() && !is_strategy_name(s.name)) {
    r.error("unknown strategy '" + s.name + "' in " + w.substr(0, w.size() - 1) +
            " (valid: " + valid_strategy_list() + ")");
  }
  if (s.ewc_lambda < 0.0) r.error("'" + w + "lambda' must be >= 0, got " + std::to_string(s.ewc_lambda));
  if (s.fisher_samples < 1) r.error("'" + w + "fisher_samples' must be >= 1");
  if (s.buffer_per_class < 1) r.error("'" + w + "buffer_per_class' must be >= 1");
  if (s.buffer_budget < 0) r.error("'" + w + "buffer_budget' must be >= 0 (0 = per-class quota)");
  if (s.centroids < 1) r.error("'" + w + "centroids' must be >= 1");
  if (s.neighbors < 1) r.error("'" + w + "neighbors' must be >= 1");
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  std::vector<std::string> errors;
  Reader r(errors);
  ExperimentConfig cfg;
  r.check_keys(doc, "", {"benchmark", "generator", "router", "classifier", "strategies", "seeds", "output"});

  read_benchmark(r, doc.contains("benchmark") ? doc["benchmark"] : json(), cfg.benchmark);

  if (doc.contains("generator")) {
    const json& g = doc["generator"];
    const std::string w = "generator.";
    r.check_keys(g, w, {"components", "max_iters", "tolerance", "ridge", "samples_per_class"});
    r.read(g, w, "components", cfg.shared.generator.components, "an integer", false);
    r.read(g, w, "max_iters", cfg.shared.generator.max_iters, "an integer", false);
    r.read(g, w, "tolerance", cfg.shared.generator.tolerance, "a number", false);
    r.read(g, w, "ridge", cfg.shared.generator.ridge, "a number", false);
    r.read(g, w, "samples_per_class", cfg.shared.synthetic_per_class, "an integer", false);
    if (cfg.shared.generator.components < 1) r.error("'generator.components' must be >= 1");
    if (cfg.shared.generator.max_iters < 0) r.error("'generator.max_iters' must be >= 0");
    if (!(cfg.shared.generator.tolerance > 0.0)) r.error("'generator.tolerance' must be > 0");
    if (!(cfg.shared.generator.ridge > 0.0)) r.error("'generator.ridge' must be > 0");
    if (cfg.shared.synthetic_per_class < 1) r.error("'generator.samples_per_class' must be >= 1");
  }
  if (doc.contains("classifier")) {
    r.check_keys(doc["classifier"], "classifier.", kClassifierKeys);
    read_classifier(r, doc["classifier"], "classifier.", cfg.classifier);
  }
  cfg.shared.router = cfg.classifier;
  cfg.shared.router.lr_grid.clear();
  if (doc.contains("router")) {
    std::set<std::string> keys = kClassifierKeys;
    keys.erase("lr_grid");
    r.check_keys(doc["router"], "router.", keys);
    read_classifier(r, doc["router"], "router.", cfg.shared.router);
  }

  if (!doc.contains("strategies")) {
    r.error("missing required field 'strategies' (expected a non-empty list)");
  } else if (!doc["strategies"].is_array() || doc["strategies"].empty()) {
    r.error("field 'strategies' must be a non-empty list");
  } else {
    std::size_t i = 0;
    for (const auto& entry : doc["strategies"]) {
      StrategyConfig s;
      read_strategy(r, entry, i++, cfg.classifier, s);
      cfg.strategies.push_back(std::move(s));
    }
  }

  if (r.read(doc, "", "seeds", cfg.seeds, "a non-empty list of 64-bit unsigned integers", true) &&
      cfg.seeds.empty()) {
    r.error("field 'seeds' must be a non-empty list");
  }
  r.read(doc, "", "output", cfg.output_dir, "a string", false);

  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json to_json(const BenchmarkConfig& b) {
  return {{"name", b.name},
          {"kind", to_string(b.kind)},
          {"domains", b.domains},
          {"class_means", b.class_means},
          {"variances", b.variances},
          {"shifts", b.shifts},
          {"angles", b.angles},
          {"flip_domains", b.flip_domains},
          {"n_train", b.sizes.train},
          {"n_val", b.sizes.val},
          {"n_test", b.sizes.test}};
}

json to_json(const SharedConfig& s) {
  return {{"components", s.generator.components},
          {"max_iters", s.generator.max_iters},
          {"tolerance", s.generator.tolerance},
          {"ridge", s.generator.ridge},
          {"samples_per_class", s.synthetic_per_class}};
}

json to_json(const StrategyConfig& s) {
  json j = classifier_json(s.classifier);
  j["name"] = s.name;
  j["lambda"] = s.ewc_lambda;
  j["fisher_samples"] = s.fisher_samples;
  j["buffer_per_class"] = s.buffer_per_class;
  j["buffer_budget"] = s.buffer_budget;
  j["fresh_experts"] = s.fresh_experts;
  j["centroids"] = s.centroids;
  j["neighbors"] = s.neighbors;
  return j;
}

json to_json(const ExperimentConfig& cfg) {
  json strategies = json::array();
  for (const auto& s : cfg.strategies) strategies.push_back(to_json(s));
  json router = classifier_json(cfg.shared.router);
  router.erase("lr_grid");
  return {{"benchmark", to_json(cfg.benchmark)},
          {"generator", to_json(cfg.shared)},
          {"classifier", classifier_json(cfg.classifier)},
          {"router", router},
          {"strategies", strategies},
          {"seeds", cfg.seeds},
          {"output", cfg.output_dir}};
}

std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace dilab
