#include "sept/kmeans.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

#include "sept/error.hpp"
#include "sept/kernels.hpp"
#include "sept/rng.hpp"

namespace sept {

Eigen::Index nearest_centroid(const Eigen::MatrixXf& centroids,
                              const Eigen::Ref<const Eigen::VectorXf>& v) {
  Eigen::Index best = 0;
  double best_dist = l2_sqr_unrolled(v, centroids.col(0));
  for (Eigen::Index c = 1; c < centroids.cols(); ++c) {
    const double dist = l2_sqr_unrolled(v, centroids.col(c));
    if (dist < best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  return best;
}

namespace {

// k-means++: each next centroid is drawn proportionally to the squared
// distance from the nearest centroid picked so far.
Eigen::MatrixXf seed_centroids(const EmbeddingPool& pool, Eigen::Index nlist, Rng& rng) {
  const Eigen::Index n = pool.count();
  const Eigen::Index d = pool.dimension();
  Eigen::MatrixXf centroids(d, nlist);
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);

  const Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.col(0) = pool.vectors.col(first);
  chosen[static_cast<std::size_t>(first)] = 1;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    dist[static_cast<std::size_t>(i)] = l2_sqr_unrolled(pool.vectors.col(i), centroids.col(0));
  }

  for (Eigen::Index c = 1; c < nlist; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!chosen[static_cast<std::size_t>(i)]) total += dist[static_cast<std::size_t>(i)];
    }

    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      Eigen::Index last_positive = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t s = static_cast<std::size_t>(i);
        if (chosen[s] || dist[s] <= 0.0) continue;
        acc += dist[s];
        last_positive = i;
        if (acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = last_positive;  // rounding pushed target past the last step
    }
    if (pick < 0) {
      // Every remaining point coincides with a centroid (duplicates); fall
      // back to a uniform draw among the unchosen.
      std::vector<Eigen::Index> open;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) open.push_back(i);
      }
      pick = open[static_cast<std::size_t>(rng.below(open.size()))];
    }

    centroids.col(c) = pool.vectors.col(pick);
    chosen[static_cast<std::size_t>(pick)] = 1;
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double nd = l2_sqr_unrolled(pool.vectors.col(i), centroids.col(c));
      if (nd < dist[static_cast<std::size_t>(i)]) dist[static_cast<std::size_t>(i)] = nd;
    }
  }
  return centroids;
}

}  // namespace

KMeansModel kmeans_train(const EmbeddingPool& pool, Eigen::Index nlist, std::uint64_t seed,
                         int max_iters) {
  const Eigen::Index n = pool.count();
  const Eigen::Index d = pool.dimension();
  if (nlist < 1) throw ValidationError("nlist must be >= 1");
  if (n < nlist) {
    throw ValidationError("pool of " + std::to_string(n) + " vectors cannot train " +
                          std::to_string(nlist) + " centroids");
  }
  if (max_iters < 1) throw ValidationError("max_iters must be >= 1");

  Rng rng(seed);
  KMeansModel model;
  model.centroids = seed_centroids(pool, nlist, rng);

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n));
  std::vector<double> best_dist(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> members(static_cast<std::size_t>(nlist));
  std::vector<double> cost_old(static_cast<std::size_t>(nlist));
  std::vector<double> cost_new(static_cast<std::size_t>(nlist));

  double prev_inertia = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double bd = l2_sqr_unrolled(pool.vectors.col(i), model.centroids.col(0));
      for (Eigen::Index c = 1; c < nlist; ++c) {
        const double dist = l2_sqr_unrolled(pool.vectors.col(i), model.centroids.col(c));
        if (dist < bd) {
          bd = dist;
          best = c;
        }
      }
      assign[static_cast<std::size_t>(i)] = best;
      best_dist[static_cast<std::size_t>(i)] = bd;
    }

    std::fill(members.begin(), members.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < n; ++i) {
      ++members[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }

    // Reseed empty clusters from the farthest point of a cluster that can
    // spare one. The moved point becomes its cell's exact centroid, so its
    // distance drops to zero and inertia cannot rise.
    for (Eigen::Index c = 0; c < nlist; ++c) {
      if (members[static_cast<std::size_t>(c)] != 0) continue;
      Eigen::Index far = -1;
      double far_dist = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t s = static_cast<std::size_t>(i);
        if (members[static_cast<std::size_t>(assign[s])] < 2) continue;
        if (best_dist[s] > far_dist) {
          far_dist = best_dist[s];
          far = i;
        }
      }
      if (far < 0) throw Error(ErrorCode::internal, "empty cluster with no donor point");
      const std::size_t fs = static_cast<std::size_t>(far);
      --members[static_cast<std::size_t>(assign[fs])];
      model.centroids.col(c) = pool.vectors.col(far);
      assign[fs] = c;
      best_dist[fs] = 0.0;
      members[static_cast<std::size_t>(c)] = 1;
    }

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) inertia += best_dist[static_cast<std::size_t>(i)];
    if (iter > 0 && inertia > prev_inertia) {
      // The guarded update below makes every step non-increasing term group
      // by term group; any residual overshoot can only be double-summation
      // regrouping noise. Clamp that, treat anything larger as a bug.
      if (inertia <= prev_inertia * (1.0 + 1e-9)) {
        inertia = prev_inertia;
      } else {
        throw Error(ErrorCode::internal, "k-means inertia increased: " +
                                             std::to_string(prev_inertia) + " -> " +
                                             std::to_string(inertia));
      }
    }
    model.inertia_history.push_back(inertia);
    model.inertia = inertia;
    model.iterations_run = iter + 1;

    const bool converged =
        inertia == 0.0 || (iter > 0 && prev_inertia - inertia < kKMeansRelTol * prev_inertia);
    prev_inertia = inertia;
    if (converged || iter + 1 == max_iters) break;

    // Candidate means, accumulated sequentially over points in pool order so
    // results do not depend on thread count.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d, nlist);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += pool.vectors.col(i).cast<double>();
    }
    Eigen::MatrixXf candidate(d, nlist);
    for (Eigen::Index c = 0; c < nlist; ++c) {
      candidate.col(c) =
          (sums.col(c) / static_cast<double>(members[static_cast<std::size_t>(c)])).cast<float>();
    }

    // Guarded apply: a float-rounded mean sits a hair off the true minimizer,
    // so compare computed cluster costs and keep the old centroid unless the
    // candidate strictly improves. This keeps inertia non-increasing in
    // floating point, not merely in exact arithmetic.
    std::fill(cost_old.begin(), cost_old.end(), 0.0);
    std::fill(cost_new.begin(), cost_new.end(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(assign[static_cast<std::size_t>(i)]);
      cost_old[c] += best_dist[static_cast<std::size_t>(i)];
      cost_new[c] += l2_sqr_unrolled(pool.vectors.col(i),
                                     candidate.col(static_cast<Eigen::Index>(c)));
    }
    for (Eigen::Index c = 0; c < nlist; ++c) {
      if (cost_new[static_cast<std::size_t>(c)] < cost_old[static_cast<std::size_t>(c)]) {
        model.centroids.col(c) = candidate.col(c);
      }
    }
  }

  return model;
}

}  // namespace sept
