#include "dilab/kmeans.hpp"

#include <limits>
#include <string>

#include "dilab/error.hpp"

namespace dilab {

std::vector<Eigen::Index> kmeans_pp_seed(const Matrix& points, int k, Rng& rng) {
  const Eigen::Index n = points.rows();
  if (k < 1 || n < k) {
    throw ValidationError("k-means needs at least k=" + std::to_string(k) + " points, got " +
                          std::to_string(n));
  }
  std::vector<Eigen::Index> chosen;
  chosen.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector d2 = (points.rowwise() - points.row(chosen[0])).rowwise().squaredNorm();
  while (static_cast<int>(chosen.size()) < k) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining points coincide with a centre; fall back to uniform.
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    chosen.push_back(pick);
    d2 = d2.cwiseMin((points.rowwise() - points.row(pick)).rowwise().squaredNorm());
  }
  return chosen;
}

KMeansResult lloyd_kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iters,
                          double tol) {
  Rng rng(seed);
  const auto seeds = kmeans_pp_seed(points, k, rng);
  KMeansResult res;
  res.centroids.resize(k, points.cols());
  for (int c = 0; c < k; ++c) res.centroids.row(c) = points.row(seeds[static_cast<std::size_t>(c)]);
  res.assignment.assign(static_cast<std::size_t>(points.rows()), 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    double wcss = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - res.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      res.assignment[static_cast<std::size_t>(i)] = best;
      wcss += best_d;
    }
    res.wcss_trace.push_back(wcss);
    ++res.iterations;

    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const int c = res.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    double moved = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      Eigen::RowVectorXd next = sums.row(c) / counts[static_cast<std::size_t>(c)];
      moved = std::max(moved, (next - res.centroids.row(c)).norm());
      res.centroids.row(c) = next;
    }
    if (moved < tol) break;
  }
  return res;
}

}  // namespace dilab
