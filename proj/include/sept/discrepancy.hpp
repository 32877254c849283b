#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "sept/mixture.hpp"
#include "sept/pool.hpp"

namespace sept {

// Source = candidate pre-training subset, target = task sample set.
struct DomainSampleSet {
  EmbeddingPool source;
  EmbeddingPool target;
};

struct LinearDomainClassifier {
  Eigen::VectorXd weights;
  double bias = 0.0;
  int epochs_run = 0;
  double learning_rate = 0.0;  // the rate actually used, after any halving
  double final_loss = 0.0;
  std::vector<double> loss_history;  // initial loss plus one entry per epoch
};

struct DiscrepancyEstimate {
  double proxy_a_distance = 0.0;        // 2 * (1 - 2 * min(eps, 1 - eps)), in [0, 2]
  double classifier_holdout_error = 0.0;  // symmetrized, in [0, 0.5]
  std::int64_t n_source = 0;            // samples used per domain after balancing
  std::int64_t n_target = 0;
  std::uint64_t seed = 0;
};

struct LogisticParams {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

struct LogisticBatch {
  Eigen::MatrixXd features;  // dimension x n, one column per sample
  Eigen::VectorXd labels;    // 0 or 1 per sample
};

struct LogisticGradient {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

// Mean logistic loss over the batch, numerically stable for large |score|.
double logistic_loss(const LogisticParams& params, const LogisticBatch& batch);

// Analytic gradient of logistic_loss: mean of (sigmoid(score) - label) * x.
LogisticGradient classifier_gradient(const LogisticParams& params, const LogisticBatch& batch);

// Full-batch gradient descent from zero parameters at a fixed step. The loss
// must not increase between epochs (1e-9 slack); on a violation or non-finite
// loss the rate is halved and training restarts, at most ten times.
LinearDomainClassifier train_domain_classifier(const LogisticBatch& batch, int epochs,
                                               double learning_rate);

// Proxy A-distance between the two domains: balance by subsampling the larger
// domain to the smaller's size (seeded), split train/holdout by one shared
// permutation, train a source=0/target=1 classifier, and map the symmetrized
// holdout error through 2*(1-2*eps). Each domain must contribute >= 20
// samples; train_fraction must leave both splits non-empty.
DiscrepancyEstimate estimate_discrepancy(const DomainSampleSet& sets, double train_fraction,
                                         int epochs, double learning_rate, std::uint64_t seed);

struct LabeledPool {
  EmbeddingPool pool;
  std::vector<std::int32_t> labels;  // class per column, >= 0
};

// Nearest-centroid accuracy on task_test after fitting class centroids on
// task_train, pseudo-labeling `selected` by nearest centroid, and
// re-estimating the centroids once over train + pseudo-labeled points.
// Every class present in task_test needs at least one train sample.
double eval_downstream_proxy(const EmbeddingPool& selected, const LabeledPool& task_train,
                             const LabeledPool& task_test);

// Desk-scale benchmark: a labeled task drawn from one mixture and a candidate
// pool mixing task-distribution samples with distractor_ratio times as many
// samples from an unrelated mixture. Pool ids and task ids are disjoint.
struct BenchmarkConfig {
  Eigen::Index dimension = 16;
  Eigen::Index task_components = 10;
  Eigen::Index distractor_components = 10;
  double stddev = 0.15;
  std::uint64_t task_train_count = 200;
  std::uint64_t task_test_count = 500;
  std::uint64_t pool_task_count = 2000;
  double distractor_ratio = 5.0;
  Metric metric = Metric::cosine;
};

struct SyntheticBenchmark {
  LabeledPool task_train;
  LabeledPool task_test;
  EmbeddingPool pool;
};

SyntheticBenchmark make_synthetic_benchmark(const BenchmarkConfig& config, std::uint64_t seed);

}  // namespace sept
