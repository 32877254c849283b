#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "sept/pool.hpp"

namespace sept {

struct KMeansModel {
  Eigen::MatrixXf centroids;  // dimension x nlist
  double inertia = 0.0;       // sum of squared distances at the last assignment
  int iterations_run = 0;
  std::vector<double> inertia_history;  // one entry per Lloyd assignment pass

  Eigen::Index nlist() const { return centroids.cols(); }
  Eigen::Index dimension() const { return centroids.rows(); }
};

inline constexpr int kKMeansDefaultMaxIters = 25;
inline constexpr double kKMeansRelTol = 1e-4;

// Lloyd's algorithm with k-means++ seeding, always under squared euclidean
// distance regardless of the pool metric. Deterministic for a given seed.
// Empty clusters are reseeded to the point farthest from its centroid among
// clusters that can spare one. Inertia never increases between iterations.
// Requires 1 <= nlist <= pool.count().
KMeansModel kmeans_train(const EmbeddingPool& pool, Eigen::Index nlist, std::uint64_t seed,
                         int max_iters = kKMeansDefaultMaxIters);

// Index of the euclidean-nearest centroid (lowest index on ties).
Eigen::Index nearest_centroid(const Eigen::MatrixXf& centroids,
                              const Eigen::Ref<const Eigen::VectorXf>& v);

}  // namespace sept
