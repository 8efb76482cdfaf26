#pragma once

#include <cstdint>
#include <vector>

#include "dilab/classifier.hpp"
#include "dilab/rng.hpp"

namespace dilab {

/// k-means++ seeding: first centre uniform, each next centre drawn with
/// probability proportional to squared distance to the nearest chosen centre.
/// Returns the chosen row indices.
std::vector<Eigen::Index> kmeans_pp_seed(const Matrix& points, int k, Rng& rng);

struct KMeansResult {
  Matrix centroids;                 // k x d
  std::vector<int> assignment;      // per point
  std::vector<double> wcss_trace;   // within-cluster sum of squares after each assignment
  int iterations = 0;
};

/// Lloyd iterations from k-means++ seeds until max centroid movement < tol
/// or max_iters. An empty cluster keeps its previous centroid.
KMeansResult lloyd_kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iters = 100,
                          double tol = 1e-6);

}  // namespace dilab
