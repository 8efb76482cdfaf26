#include "dilab/gmm.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include "dilab/error.hpp"
#include "dilab/kmeans.hpp"
#include "dilab/rng.hpp"

namespace dilab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2 pi)

double log_normal_diag(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                       const Eigen::Ref<const Eigen::RowVectorXd>& mean,
                       const Eigen::Ref<const Eigen::RowVectorXd>& var) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double diff = x(j) - mean(j);
    acc += kLog2Pi + std::log(var(j)) + diff * diff / var(j);
  }
  return -0.5 * acc;
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// log pi_k + log N(x_i; mu_k, var_k) for every point and component.
Matrix log_joint(const Matrix& x, const ClassMixture& mix) {
  Matrix out(x.rows(), mix.components());
  for (int k = 0; k < mix.components(); ++k) {
    const double lw = std::log(mix.weights(k));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i, k) = lw + log_normal_diag(x.row(i), mix.means.row(k), mix.variances.row(k));
    }
  }
  return out;
}

Eigen::RowVectorXd data_variance(const Matrix& x, double ridge) {
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().mean();
  return var.cwiseMax(ridge);
}

// E-step: fills responsibilities and returns the mean log-likelihood.
double expectation(const Matrix& x, const ClassMixture& mix, Matrix& resp) {
  resp = log_joint(x, mix);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double lse = log_sum_exp(resp.row(i));
    total += lse;
    resp.row(i) = (resp.row(i).array() - lse).exp().matrix();
  }
  return total / static_cast<double>(x.rows());
}

void maximization(const Matrix& x, const Matrix& resp, double ridge, Rng& rng,
                  const Eigen::RowVectorXd& fallback_var, ClassMixture& mix, EmTrace& trace) {
  const double n = static_cast<double>(x.rows());
  const int K = mix.components();
  for (int k = 0; k < K; ++k) {
    const double nk = resp.col(k).sum();
    if (nk < 1e-10) {
      const auto pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(x.rows())));
      mix.means.row(k) = x.row(pick);
      mix.variances.row(k) = fallback_var;
      mix.weights(k) = 1.0 / n;
      ++trace.reseeds;
      continue;
    }
    Eigen::RowVectorXd mean = (resp.col(k).transpose() * x) / nk;
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      var += resp(i, k) * (x.row(i) - mean).array().square().matrix();
    }
    var /= nk;
    mix.means.row(k) = mean;
    mix.variances.row(k) = var.cwiseMax(ridge);
    mix.weights(k) = nk / n;
  }
  mix.weights /= mix.weights.sum();
}

ClassMixture fit_class(const Matrix& x, const FitConfig& cfg, std::uint64_t seed, EmTrace& trace) {
  Rng rng(seed);
  const int K = cfg.components;
  const auto seeds = kmeans_pp_seed(x, K, rng);
  const Eigen::RowVectorXd var0 = data_variance(x, cfg.ridge);

  ClassMixture mix;
  mix.weights = Vector::Constant(K, 1.0 / K);
  mix.means.resize(K, x.cols());
  mix.variances.resize(K, x.cols());
  for (int k = 0; k < K; ++k) {
    mix.means.row(k) = x.row(seeds[static_cast<std::size_t>(k)]);
    mix.variances.row(k) = var0;
  }

  Matrix resp;
  double ll = expectation(x, mix, resp);
  trace.log_likelihood.push_back(ll);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    maximization(x, resp, cfg.ridge, rng, var0, mix, trace);
    const double next = expectation(x, mix, resp);
    trace.log_likelihood.push_back(next);
    if (next - ll < cfg.tolerance) {
      trace.converged = true;
      break;
    }
    ll = next;
  }
  return mix;
}

}  // namespace

double GmmGenerator::log_density(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label) const {
  const ClassMixture& mix = classes.at(static_cast<std::size_t>(label));
  Eigen::RowVectorXd terms(mix.components());
  for (int k = 0; k < mix.components(); ++k) {
    terms(k) = std::log(mix.weights(k)) +
               log_normal_diag(x, mix.means.row(k), mix.variances.row(k));
  }
  return log_sum_exp(terms);
}

std::uint64_t fingerprint(const FitConfig& cfg) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "gmm|K=%d|iters=%d|tol=%.17g|ridge=%.17g|seed=%llu",
                cfg.components, cfg.max_iters, cfg.tolerance, cfg.ridge,
                static_cast<unsigned long long>(cfg.seed));
  return fnv1a64(buf);
}

GmmFit fit_em(const LabeledSet& data, int num_classes, const FitConfig& cfg) {
  if (cfg.components < 1) throw ValidationError("GMM needs at least one component per class");
  if (!(cfg.tolerance > 0.0)) throw ValidationError("EM tolerance must be positive");
  if (num_classes < 1) throw ValidationError("GMM needs at least one class");

  GmmFit fit;
  fit.generator.dim = data.dim();
  fit.generator.fingerprint = fingerprint(cfg);
  for (int c = 0; c < num_classes; ++c) {
    const auto rows = data.rows_with_label(c);
    if (static_cast<int>(rows.size()) < cfg.components) {
      throw ValidationError("class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                            " samples, fewer than K=" + std::to_string(cfg.components) +
                            "; use a smaller component count");
    }
    const LabeledSet subset = data.select(rows);
    EmTrace trace;
    fit.generator.classes.push_back(
        fit_class(subset.features, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(c)), trace));
    fit.traces.push_back(std::move(trace));
  }
  return fit;
}

double log_likelihood(const GmmGenerator& gen, const LabeledSet& samples) {
  if (samples.dim() != gen.dim) {
    throw ShapeError("generator has dim " + std::to_string(gen.dim) + ", samples have " +
                     std::to_string(samples.dim()));
  }
  if (samples.empty()) throw ValidationError("log_likelihood of an empty sample set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const int y = samples.labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= gen.num_classes()) throw ValidationError("sample label outside generator classes");
    total += gen.log_density(samples.features.row(i), y);
  }
  return total / static_cast<double>(samples.size());
}

SyntheticBuffer sample(const GmmGenerator& gen, int n_per_class, int domain_id,
                       std::uint64_t seed) {
  if (n_per_class < 1) throw ValidationError("n_per_class must be at least 1");
  Rng rng(seed);
  SyntheticBuffer buf;
  buf.domain_id = domain_id;
  buf.origin = derive_seed(derive_seed(gen.fingerprint, seed),
                           static_cast<std::uint64_t>(n_per_class) * 1000003ULL +
                               static_cast<std::uint64_t>(domain_id));
  const Eigen::Index total = static_cast<Eigen::Index>(n_per_class) * gen.num_classes();
  buf.data.features.resize(total, gen.dim);
  buf.data.labels.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (int c = 0; c < gen.num_classes(); ++c) {
    const ClassMixture& mix = gen.classes[static_cast<std::size_t>(c)];
    for (int i = 0; i < n_per_class; ++i) {
      const double u = rng.uniform();
      int k = mix.components() - 1;
      double acc = 0.0;
      for (int j = 0; j < mix.components(); ++j) {
        acc += mix.weights(j);
        if (u < acc) {
          k = j;
          break;
        }
      }
      for (int j = 0; j < gen.dim; ++j) {
        buf.data.features(row, j) = mix.means(k, j) + std::sqrt(mix.variances(k, j)) * rng.normal();
      }
      buf.data.labels.push_back(c);
      ++row;
    }
  }
  return buf;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index cols) {
  const auto n = static_cast<Eigen::Index>(j.size());
  if (n > 0) cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(n, std::max<Eigen::Index>(cols, 0));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw IoError("ragged matrix in document");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

nlohmann::json labeled_set_to_json(const LabeledSet& s) {
  return {{"dim", s.dim()}, {"features", matrix_to_json(s.features)}, {"labels", s.labels}};
}

LabeledSet labeled_set_from_json(const nlohmann::json& j) {
  return LabeledSet(matrix_from_json(j.at("features"), j.at("dim").get<int>()),
                    j.at("labels").get<std::vector<int>>());
}

namespace {
std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

nlohmann::json to_json(const GmmGenerator& gen) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& mix : gen.classes) {
    std::vector<double> w(mix.weights.data(), mix.weights.data() + mix.weights.size());
    classes.push_back({{"weights", w},
                       {"means", matrix_to_json(mix.means)},
                       {"variances", matrix_to_json(mix.variances)}});
  }
  return {{"dim", gen.dim}, {"fingerprint", hex64(gen.fingerprint)}, {"classes", classes}};
}

GmmGenerator generator_from_json(const nlohmann::json& j) {
  GmmGenerator gen;
  gen.dim = j.at("dim").get<int>();
  gen.fingerprint = std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
  for (const auto& c : j.at("classes")) {
    ClassMixture mix;
    auto w = c.at("weights").get<std::vector<double>>();
    mix.weights = Eigen::Map<Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    mix.means = matrix_from_json(c.at("means"), gen.dim);
    mix.variances = matrix_from_json(c.at("variances"), gen.dim);
    if (mix.means.rows() != mix.weights.size() || mix.variances.rows() != mix.weights.size()) {
      throw IoError("generator document: component counts disagree");
    }
    gen.classes.push_back(std::move(mix));
  }
  return gen;
}

nlohmann::json to_json(const SyntheticBuffer& buffer) {
  return {{"domain_id", buffer.domain_id},
          {"origin", hex64(buffer.origin)},
          {"data", labeled_set_to_json(buffer.data)}};
}

SyntheticBuffer synthetic_buffer_from_json(const nlohmann::json& j) {
  SyntheticBuffer b;
  b.domain_id = j.at("domain_id").get<int>();
  b.origin = std::stoull(j.at("origin").get<std::string>(), nullptr, 16);
  b.data = labeled_set_from_json(j.at("data"));
  return b;
}

}  // namespace dilab
