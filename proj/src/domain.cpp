#include "dilab/domain.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "dilab/error.hpp"
#include "dilab/rng.hpp"

namespace dilab {

LabeledSet::LabeledSet(Matrix x, std::vector<int> y) : features(std::move(x)), labels(std::move(y)) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw ShapeError("labeled set: " + std::to_string(features.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
}

void LabeledSet::append(const LabeledSet& other) {
  if (other.empty()) return;
  if (empty() && features.cols() == 0) {
    *this = other;
    return;
  }
  if (other.dim() != dim()) {
    throw ShapeError("cannot append " + std::to_string(other.dim()) + "-dim samples to a " +
                     std::to_string(dim()) + "-dim set");
  }
  Matrix joined(size() + other.size(), dim());
  joined << features, other.features;
  features = std::move(joined);
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

LabeledSet LabeledSet::select(std::span<const Eigen::Index> rows) const {
  LabeledSet out(dim());
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dim());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

std::vector<Eigen::Index> LabeledSet::rows_with_label(int label) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

LabeledSet LabeledSet::from_samples(std::span<const Sample> samples) {
  if (samples.empty()) return LabeledSet{};
  const auto d = samples.front().features.size();
  LabeledSet out(static_cast<int>(d));
  out.features.resize(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != d) throw ShapeError("samples disagree on feature dim");
    out.features.row(static_cast<Eigen::Index>(i)) = samples[i].features.transpose();
    out.labels.push_back(samples[i].label);
  }
  return out;
}

std::vector<Sample> LabeledSet::to_samples() const {
  std::vector<Sample> out;
  out.reserve(labels.size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    out.push_back({features.row(i).transpose(), labels[static_cast<std::size_t>(i)]});
  }
  return out;
}

bool LabeledSet::operator==(const LabeledSet& other) const {
  return labels == other.labels && features.rows() == other.features.rows() &&
         features.cols() == other.features.cols() && features == other.features;
}

std::string_view to_string(SplitKind split) {
  switch (split) {
    case SplitKind::train: return "train";
    case SplitKind::val: return "val";
    case SplitKind::test: return "test";
  }
  return "?";
}

const LabeledSet& DomainDataset::split(SplitKind kind) const {
  switch (kind) {
    case SplitKind::train: return train;
    case SplitKind::val: return val;
    case SplitKind::test: return test;
  }
  return train;
}

std::string_view to_string(RecipeKind kind) {
  switch (kind) {
    case RecipeKind::covariate_shift: return "covariate_shift";
    case RecipeKind::conditional_flip: return "conditional_flip";
    case RecipeKind::rotation: return "rotation";
  }
  return "?";
}

RecipeKind recipe_kind_from_string(std::string_view name) {
  if (name == "covariate_shift") return RecipeKind::covariate_shift;
  if (name == "conditional_flip") return RecipeKind::conditional_flip;
  if (name == "rotation") return RecipeKind::rotation;
  throw ConfigError("unknown benchmark kind '" + std::string(name) +
                    "' (valid: covariate_shift, conditional_flip, rotation)");
}

Matrix DomainRecipe::effective_class_means() const {
  Matrix m = class_means;
  if (angle != 0.0 && dim() >= 2) {
    const double c = std::cos(angle), s = std::sin(angle);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double x = m(i, 0), y = m(i, 1);
      m(i, 0) = c * x - s * y;
      m(i, 1) = s * x + c * y;
    }
  }
  return m;
}

int DomainRecipe::label_for(int latent_class) const {
  return flip ? (latent_class + 1) % num_classes() : latent_class;
}

namespace {

void validate_recipe(const DomainRecipe& r, std::size_t index) {
  const std::string where = "recipe " + std::to_string(index) + ": ";
  if (r.class_means.rows() < 1 || r.class_means.cols() < 1) {
    throw ValidationError(where + "needs at least one class and one feature");
  }
  if (r.variances.size() != r.class_means.cols()) {
    throw ShapeError(where + "variances length must equal feature dim");
  }
  for (Eigen::Index j = 0; j < r.variances.size(); ++j) {
    if (!(r.variances(j) > 0.0)) throw ValidationError(where + "variances must be positive");
  }
  if (r.angle != 0.0 && r.dim() < 2) {
    throw ValidationError(where + "rotation requires at least two features");
  }
  if (r.sizes.train < 5 * r.num_classes()) {
    throw ValidationError(where + "needs at least 5 training samples per class");
  }
  if (r.sizes.val < 0 || r.sizes.test < 0) throw ValidationError(where + "negative split size");
}

LabeledSet draw_split(const DomainRecipe& r, int n, std::uint64_t seed) {
  Rng rng(seed);
  const int classes = r.num_classes();
  std::vector<int> latent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) latent[static_cast<std::size_t>(i)] = i % classes;
  rng.shuffle(std::span<int>(latent));

  const Vector stddev = r.variances.cwiseSqrt();
  const double c = std::cos(r.angle), s = std::sin(r.angle);
  LabeledSet out(r.dim());
  out.features.resize(n, r.dim());
  out.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int k = latent[static_cast<std::size_t>(i)];
    for (int j = 0; j < r.dim(); ++j) {
      out.features(i, j) = r.class_means(k, j) + stddev(j) * rng.normal();
    }
    if (r.angle != 0.0) {
      const double x = out.features(i, 0), y = out.features(i, 1);
      out.features(i, 0) = c * x - s * y;
      out.features(i, 1) = s * x + c * y;
    }
    out.labels[static_cast<std::size_t>(i)] = r.label_for(k);
  }
  return out;
}

}  // namespace

DomainStream build_stream(std::span<const DomainRecipe> recipes, std::uint64_t seed) {
  if (recipes.empty()) throw ConfigError("a stream needs at least one domain recipe");
  std::vector<std::string> violations;
  for (std::size_t t = 1; t < recipes.size(); ++t) {
    if (recipes[t].dim() != recipes[0].dim()) {
      violations.push_back("recipe " + std::to_string(t) + " has feature dim " +
                           std::to_string(recipes[t].dim()) + ", expected " +
                           std::to_string(recipes[0].dim()));
    }
    if (recipes[t].num_classes() != recipes[0].num_classes()) {
      violations.push_back("recipe " + std::to_string(t) + " has " +
                           std::to_string(recipes[t].num_classes()) + " classes, expected " +
                           std::to_string(recipes[0].num_classes()));
    }
  }
  if (!violations.empty()) throw ConfigError(violations);

  DomainStream stream;
  stream.dim = recipes[0].dim();
  stream.num_classes = recipes[0].num_classes();
  for (std::size_t t = 0; t < recipes.size(); ++t) {
    const DomainRecipe& r = recipes[t];
    validate_recipe(r, t);
    const std::uint64_t domain_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    DomainDataset ds;
    ds.domain_id = static_cast<int>(t);
    ds.train = draw_split(r, r.sizes.train, derive_seed(domain_seed, "train"));
    ds.val = draw_split(r, r.sizes.val, derive_seed(domain_seed, "val"));
    ds.test = draw_split(r, r.sizes.test, derive_seed(domain_seed, "test"));
    stream.domains.push_back(std::move(ds));
  }
  return stream;
}

std::vector<DomainRecipe> recipe_covariate_shift(const Matrix& base_means,
                                                 std::span<const Vector> shifts,
                                                 const Vector& variances, SplitSizes sizes) {
  std::vector<DomainRecipe> out;
  for (std::size_t t = 0; t < shifts.size(); ++t) {
    if (shifts[t].size() != base_means.cols()) {
      throw ShapeError("shift " + std::to_string(t) + " has length " +
                       std::to_string(shifts[t].size()) + ", expected " +
                       std::to_string(base_means.cols()));
    }
    DomainRecipe r;
    r.kind = RecipeKind::covariate_shift;
    r.class_means = base_means.rowwise() + shifts[t].transpose();
    r.variances = variances;
    r.sizes = sizes;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DomainRecipe> recipe_rotation(const Matrix& base_means, std::span<const double> angles,
                                          const Vector& variances, SplitSizes sizes) {
  if (base_means.cols() < 2) throw ValidationError("rotation requires at least two features");
  std::vector<DomainRecipe> out;
  for (double a : angles) {
    DomainRecipe r;
    r.kind = RecipeKind::rotation;
    r.class_means = base_means;
    r.variances = variances;
    r.angle = a;
    r.sizes = sizes;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DomainRecipe> recipe_conditional_flip(const Matrix& base_means,
                                                  const Vector& variances, int num_domains,
                                                  const std::set<int>& flip_domains,
                                                  SplitSizes sizes,
                                                  std::span<const Vector> shifts) {
  if (num_domains < 1) throw ConfigError("conditional flip needs at least one domain");
  for (int f : flip_domains) {
    if (f < 0 || f >= num_domains) {
      throw ConfigError("flip domain " + std::to_string(f) + " outside [0, " +
                        std::to_string(num_domains) + ")");
    }
  }
  if (!shifts.empty() && static_cast<int>(shifts.size()) != num_domains) {
    throw ConfigError("conditional flip: expected " + std::to_string(num_domains) +
                      " shifts, got " + std::to_string(shifts.size()));
  }
  std::vector<Vector> zero;
  if (shifts.empty()) {
    zero.assign(static_cast<std::size_t>(num_domains), Vector::Zero(base_means.cols()));
    shifts = zero;
  }
  std::vector<DomainRecipe> out = recipe_covariate_shift(base_means, shifts, variances, sizes);
  for (int t = 0; t < num_domains; ++t) {
    out[static_cast<std::size_t>(t)].kind = RecipeKind::conditional_flip;
    out[static_cast<std::size_t>(t)].flip = flip_domains.count(t) > 0;
  }
  return out;
}

std::array<std::vector<Sample>, 3> split_dataset(std::span<const Sample> samples,
                                                 std::array<double, 3> ratios,
                                                 std::uint64_t seed) {
  if (samples.size() < 3) throw ValidationError("split_dataset needs at least 3 samples");
  for (double r : ratios) {
    if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
  const std::size_t n = samples.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));

  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[1]));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[2]));
  const std::size_t n_train = n - n_val - n_test;

  std::array<std::vector<Sample>, 3> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bucket = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    out[bucket].push_back(samples[perm[i]]);
  }
  return out;
}

void write_stream(std::ostream& out, const DomainStream& stream) {
  out << "domain_id,split,label";
  for (int j = 0; j < stream.dim; ++j) out << ",x" << j;
  out << '\n';
  char buf[64];
  for (const auto& ds : stream.domains) {
    for (SplitKind kind : {SplitKind::train, SplitKind::val, SplitKind::test}) {
      const LabeledSet& s = ds.split(kind);
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        out << ds.domain_id << ',' << to_string(kind) << ',' << s.labels[static_cast<std::size_t>(i)];
        for (int j = 0; j < s.dim(); ++j) {
          std::snprintf(buf, sizeof buf, "%.17g", s.features(i, j));
          out << ',' << buf;
        }
        out << '\n';
      }
    }
  }
}

DomainStream read_stream(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("stream file is empty");
  int dim = 0;
  for (char ch : line) dim += ch == ',';
  dim -= 2;
  if (dim < 1 || line.rfind("domain_id,split,label", 0) != 0) {
    throw IoError("unexpected stream header: " + line);
  }

  std::vector<std::array<std::vector<Sample>, 3>> parts;
  int max_label = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (static_cast<int>(fields.size()) != dim + 3) {
      throw IoError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim + 3) +
                    " fields");
    }
    const int t = std::stoi(fields[0]);
    int split = fields[1] == "train" ? 0 : fields[1] == "val" ? 1 : fields[1] == "test" ? 2 : -1;
    if (t < 0 || split < 0) throw IoError("line " + std::to_string(lineno) + ": bad domain/split");
    Sample s;
    s.label = std::stoi(fields[2]);
    max_label = std::max(max_label, s.label);
    s.features.resize(dim);
    for (int j = 0; j < dim; ++j) s.features(j) = std::stod(fields[static_cast<std::size_t>(j + 3)]);
    if (static_cast<std::size_t>(t) >= parts.size()) parts.resize(static_cast<std::size_t>(t) + 1);
    parts[static_cast<std::size_t>(t)][static_cast<std::size_t>(split)].push_back(std::move(s));
  }

  DomainStream stream;
  stream.dim = dim;
  stream.num_classes = max_label + 1;
  for (std::size_t t = 0; t < parts.size(); ++t) {
    DomainDataset ds;
    ds.domain_id = static_cast<int>(t);
    LabeledSet* splits[3] = {&ds.train, &ds.val, &ds.test};
    for (int k = 0; k < 3; ++k) {
      *splits[k] = parts[t][static_cast<std::size_t>(k)].empty()
                       ? LabeledSet(dim)
                       : LabeledSet::from_samples(parts[t][static_cast<std::size_t>(k)]);
    }
    stream.domains.push_back(std::move(ds));
  }
  return stream;
}

DomainAccess::DomainAccess(const DomainStream& stream, int current)
    : stream_(&stream), current_(current) {
  if (current < 0 || current >= stream.num_domains()) {
    throw ContractError("domain index " + std::to_string(current) + " outside stream");
  }
}

TrainingView DomainAccess::current() const {
  const DomainDataset& ds = (*stream_)[current_];
  return TrainingView{ds.domain_id, ds.train, ds.val};
}

TrainingView DomainAccess::domain(int t) const {
  if (t != current_) {
    throw AccessError("domain " + std::to_string(t) + " is not reachable while training domain " +
                      std::to_string(current_));
  }
  return current();
}

}  // namespace dilab
