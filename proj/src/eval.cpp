#include "dilab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dilab/error.hpp"
#include "dilab/training.hpp"

namespace dilab {

AccuracyMatrix::AccuracyMatrix(int num_domains)
    : T_(num_domains), cells_(static_cast<std::size_t>(num_domains) * num_domains) {
  if (num_domains < 1) throw ValidationError("accuracy matrix needs at least one domain");
}

void AccuracyMatrix::check(int s, int t) const {
  if (s < 0 || t < 0 || s >= T_ || t >= T_) {
    throw ContractError("alpha(" + std::to_string(s + 1) + ", " + std::to_string(t + 1) +
                        ") outside a " + std::to_string(T_) + "-domain matrix");
  }
  if (s > t) {
    throw ContractError("alpha(" + std::to_string(s + 1) + ", " + std::to_string(t + 1) +
                        ") is undefined: domain not yet trained");
  }
}

void AccuracyMatrix::set(int s, int t, double value) {
  check(s, t);
  if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("accuracy must lie in [0, 1]");
  cells_[static_cast<std::size_t>(s) * T_ + t] = value;
}

bool AccuracyMatrix::has(int s, int t) const {
  if (s < 0 || t < 0 || s >= T_ || t >= T_ || s > t) return false;
  return cells_[static_cast<std::size_t>(s) * T_ + t].has_value();
}

double AccuracyMatrix::at(int s, int t) const {
  check(s, t);
  const auto& c = cells_[static_cast<std::size_t>(s) * T_ + t];
  if (!c) {
    throw ContractError("alpha(" + std::to_string(s + 1) + ", " + std::to_string(t + 1) +
                        ") has not been recorded");
  }
  return *c;
}

int AccuracyMatrix::populated() const {
  return static_cast<int>(std::count_if(cells_.begin(), cells_.end(),
                                        [](const auto& c) { return c.has_value(); }));
}

void record_alpha(AccuracyMatrix& m, int s, int t, std::span<const int> predictions,
                  std::span<const int> labels) {
  if (s > t) {
    throw ContractError("alpha(" + std::to_string(s + 1) + ", " + std::to_string(t + 1) +
                        "): cannot evaluate a domain before training on it");
  }
  m.set(s, t, accuracy(predictions, labels));
}

double average_accuracy(const AccuracyMatrix& m, int t) {
  double sum = 0.0;
  for (int s = 0; s <= t; ++s) sum += m.at(s, t);
  return sum / static_cast<double>(t + 1);
}

double backward_transfer(const AccuracyMatrix& m) {
  const int T = m.num_domains();
  if (T < 2) return 0.0;
  double sum = 0.0;
  for (int s = 0; s + 1 < T; ++s) sum += m.at(s, T - 1) - m.at(s, s);
  return sum / static_cast<double>(T - 1);
}

RoutingReport routing_accuracy(std::span<const int> predicted, std::span<const int> true_domains,
                               int num_domains, std::string router_kind) {
  if (predicted.size() != true_domains.size()) throw ShapeError("routing: length mismatch");
  RoutingReport r;
  r.router_kind = std::move(router_kind);
  r.confusion.assign(static_cast<std::size_t>(num_domains),
                     std::vector<long>(static_cast<std::size_t>(num_domains), 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int d = true_domains[i];
    if (d < 0 || d >= num_domains) {
      throw ValidationError("test sample from unseen domain " + std::to_string(d));
    }
    const int p = predicted[i];
    if (p < 0 || p >= num_domains) throw ValidationError("router produced domain " + std::to_string(p));
    ++r.confusion[static_cast<std::size_t>(d)][static_cast<std::size_t>(p)];
  }
  long total = 0, correct = 0;
  for (int d = 0; d < num_domains; ++d) {
    const auto& row = r.confusion[static_cast<std::size_t>(d)];
    const long n = std::accumulate(row.begin(), row.end(), 0L);
    if (n == 0) throw ValidationError("no test samples for domain " + std::to_string(d));
    r.per_domain.push_back(static_cast<double>(row[static_cast<std::size_t>(d)]) / static_cast<double>(n));
    total += n;
    correct += row[static_cast<std::size_t>(d)];
  }
  r.overall = static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

RoutingReport routing_accuracy(const RouterModel& router, const Matrix& features,
                               std::span<const int> true_domains, int num_domains,
                               std::string router_kind) {
  if (router.arity() > num_domains) {
    throw ValidationError("router has " + std::to_string(router.arity()) + " outputs for " +
                          std::to_string(num_domains) + " domains");
  }
  return routing_accuracy(router.route(features), true_domains, num_domains, std::move(router_kind));
}

SymmetricEigen jacobi_eigen(const Matrix& symmetric, int max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  if (symmetric.cols() != n) throw ShapeError("eigen-decomposition needs a square matrix");
  Matrix a = symmetric;
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        // Rotation angle zeroing a(p, q) (Golub & Van Loan, sym.schur2).
        const double tau = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    Vector col = v.col(src);
    Eigen::Index big = 0;
    col.cwiseAbs().maxCoeff(&big);
    if (col(big) < 0.0) col = -col;
    out.vectors.col(k) = col;
  }
  return out;
}

Projection2d pca_project_2d(const Matrix& features) {
  if (features.rows() < 3) throw ValidationError("PCA projection needs at least 3 samples");
  if (features.cols() < 2) throw ValidationError("PCA projection needs at least 2 features");
  const Matrix centred = features.rowwise() - features.colwise().mean();
  const Matrix cov = (centred.transpose() * centred) / static_cast<double>(features.rows() - 1);

  Projection2d out;
  const SymmetricEigen eig = jacobi_eigen(cov);
  out.eigenvalues = eig.values.cwiseMax(0.0);
  const double total = out.eigenvalues.sum();
  if (!(total > 0.0)) {
    out.degenerate = true;
    out.coords = Matrix::Zero(features.rows(), 2);
    out.components = Matrix::Zero(features.cols(), 2);
    return out;
  }
  out.components = eig.vectors.leftCols(2);
  out.coords = centred * out.components;
  out.explained = {out.eigenvalues(0) / total, out.eigenvalues(1) / total};
  return out;
}

}  // namespace dilab
