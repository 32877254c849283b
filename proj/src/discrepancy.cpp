#include "sept/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sept/error.hpp"
#include "sept/kernels.hpp"
#include "sept/rng.hpp"

namespace sept {

namespace {

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + exp(s)) without overflow.
double softplus(double s) {
  return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s)));
}

void validate_batch(const LogisticParams& params, const LogisticBatch& batch) {
  if (batch.features.cols() < 1) throw ValidationError("batch must hold at least one sample");
  if (batch.labels.size() != batch.features.cols()) {
    throw ValidationError("batch has " + std::to_string(batch.labels.size()) + " labels for " +
                          std::to_string(batch.features.cols()) + " samples");
  }
  if (params.weights.size() != batch.features.rows()) {
    throw ValidationError("weight dimension " + std::to_string(params.weights.size()) +
                          " != feature dimension " + std::to_string(batch.features.rows()));
  }
  if (!params.weights.allFinite() || !std::isfinite(params.bias)) {
    throw ValidationError("non-finite classifier parameters");
  }
  if (!batch.features.allFinite()) throw ValidationError("non-finite feature values");
  for (Eigen::Index i = 0; i < batch.labels.size(); ++i) {
    if (batch.labels(i) != 0.0 && batch.labels(i) != 1.0) {
      throw ValidationError("labels must be 0 or 1");
    }
  }
}

double sample_score(const LogisticParams& params, const LogisticBatch& batch, Eigen::Index i) {
  return dot_accum(params.weights, batch.features.col(i)) + params.bias;
}

}  // namespace

double logistic_loss(const LogisticParams& params, const LogisticBatch& batch) {
  validate_batch(params, batch);
  const Eigen::Index n = batch.features.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = sample_score(params, batch, i);
    total += softplus(s) - batch.labels(i) * s;
  }
  return total / static_cast<double>(n);
}

LogisticGradient classifier_gradient(const LogisticParams& params, const LogisticBatch& batch) {
  validate_batch(params, batch);
  const Eigen::Index n = batch.features.cols();
  const Eigen::Index d = batch.features.rows();
  LogisticGradient grad;
  grad.weights = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = sigmoid(sample_score(params, batch, i)) - batch.labels(i);
    grad.weights += g * batch.features.col(i);
    grad.bias += g;
  }
  grad.weights /= static_cast<double>(n);
  grad.bias /= static_cast<double>(n);
  return grad;
}

LinearDomainClassifier train_domain_classifier(const LogisticBatch& batch, int epochs,
                                               double learning_rate) {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");

  const Eigen::Index d = batch.features.rows();
  double rate = learning_rate;
  for (int attempt = 0; attempt <= 10; ++attempt, rate /= 2.0) {
    LogisticParams params;
    params.weights = Eigen::VectorXd::Zero(d);
    params.bias = 0.0;

    LinearDomainClassifier clf;
    clf.learning_rate = rate;
    double loss = logistic_loss(params, batch);
    clf.loss_history.push_back(loss);

    bool monotone = true;
    for (int e = 0; e < epochs; ++e) {
      const LogisticGradient grad = classifier_gradient(params, batch);
      params.weights -= rate * grad.weights;
      params.bias -= rate * grad.bias;
      const double next = logistic_loss(params, batch);
      if (!std::isfinite(next) || next > loss + 1e-9 * std::max(1.0, std::abs(loss))) {
        monotone = false;
        break;
      }
      clf.loss_history.push_back(next);
      loss = next;
    }
    if (!monotone) continue;

    clf.weights = std::move(params.weights);
    clf.bias = params.bias;
    clf.epochs_run = epochs;
    clf.final_loss = loss;
    return clf;
  }
  throw ValidationError("training loss not monotone even after halving the rate to " +
                        std::to_string(rate * 2.0));
}

DiscrepancyEstimate estimate_discrepancy(const DomainSampleSet& sets, double train_fraction,
                                         int epochs, double learning_rate, std::uint64_t seed) {
  const EmbeddingPool& source = sets.source;
  const EmbeddingPool& target = sets.target;
  if (source.count() < 20 || target.count() < 20) {
    throw ValidationError("each domain must contribute at least 20 samples, got " +
                          std::to_string(source.count()) + " and " +
                          std::to_string(target.count()));
  }
  if (source.dimension() != target.dimension()) {
    throw ValidationError("domain dimensions differ: " + std::to_string(source.dimension()) +
                          " vs " + std::to_string(target.dimension()));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie in (0, 1)");
  }

  const Eigen::Index n = std::min(source.count(), target.count());
  Rng rng(seed);

  // Balance by subsampling the larger domain, then split both domains with
  // one shared permutation: identical domains stay identical split by split.
  const auto pick_columns = [&](const EmbeddingPool& pool) {
    std::vector<std::size_t> cols;
    if (pool.count() > n) {
      cols = rng.sample_without_replacement(static_cast<std::size_t>(pool.count()),
                                            static_cast<std::size_t>(n));
    } else {
      cols.resize(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;
    }
    return cols;
  };
  const std::vector<std::size_t> source_cols = pick_columns(source);
  const std::vector<std::size_t> target_cols = pick_columns(target);

  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);

  Eigen::Index train_n = static_cast<Eigen::Index>(train_fraction * static_cast<double>(n));
  train_n = std::max<Eigen::Index>(1, std::min(train_n, n - 1));
  const Eigen::Index holdout_n = n - train_n;

  const Eigen::Index d = source.dimension();
  LogisticBatch train;
  train.features.resize(d, 2 * train_n);
  train.labels.resize(2 * train_n);
  for (Eigen::Index i = 0; i < train_n; ++i) {
    const std::size_t p = perm[static_cast<std::size_t>(i)];
    train.features.col(i) =
        source.vectors.col(static_cast<Eigen::Index>(source_cols[p])).cast<double>();
    train.labels(i) = 0.0;
    train.features.col(train_n + i) =
        target.vectors.col(static_cast<Eigen::Index>(target_cols[p])).cast<double>();
    train.labels(train_n + i) = 1.0;
  }

  const LinearDomainClassifier clf = train_domain_classifier(train, epochs, learning_rate);
  const LogisticParams params{clf.weights, clf.bias};

  std::int64_t mistakes = 0;
  for (Eigen::Index i = 0; i < holdout_n; ++i) {
    const std::size_t p = perm[static_cast<std::size_t>(train_n + i)];
    const double s_src =
        dot_accum(params.weights,
                  source.vectors.col(static_cast<Eigen::Index>(source_cols[p])).cast<double>()) +
        params.bias;
    if (s_src > 0.0) ++mistakes;  // predicted target, truth source
    const double s_tgt =
        dot_accum(params.weights,
                  target.vectors.col(static_cast<Eigen::Index>(target_cols[p])).cast<double>()) +
        params.bias;
    if (!(s_tgt > 0.0)) ++mistakes;  // predicted source, truth target
  }
  const double eps =
      static_cast<double>(mistakes) / (2.0 * static_cast<double>(holdout_n));
  const double sym = std::min(eps, 1.0 - eps);

  DiscrepancyEstimate estimate;
  estimate.classifier_holdout_error = sym;
  estimate.proxy_a_distance = 2.0 * (1.0 - 2.0 * sym);
  estimate.n_source = n;
  estimate.n_target = n;
  estimate.seed = seed;
  return estimate;
}

namespace {

void validate_labeled(const LabeledPool& labeled, const std::string& name) {
  if (labeled.labels.size() != static_cast<std::size_t>(labeled.pool.count())) {
    throw ValidationError(name + " has " + std::to_string(labeled.labels.size()) +
                          " labels for " + std::to_string(labeled.pool.count()) + " vectors");
  }
  for (std::int32_t label : labeled.labels) {
    if (label < 0) throw ValidationError(name + " labels must be >= 0");
  }
}

Eigen::Index nearest_class(const Eigen::MatrixXd& centroids, const std::vector<char>& active,
                           const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = -1;
  double best_dist = 0.0;
  for (Eigen::Index c = 0; c < centroids.cols(); ++c) {
    if (!active[static_cast<std::size_t>(c)]) continue;
    const double dist = l2_sqr_accum(v, centroids.col(c));
    if (best < 0 || dist < best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  return best;
}

}  // namespace

double eval_downstream_proxy(const EmbeddingPool& selected, const LabeledPool& task_train,
                             const LabeledPool& task_test) {
  validate_labeled(task_train, "task_train");
  validate_labeled(task_test, "task_test");
  if (task_train.pool.count() < 1) throw ValidationError("task_train must be non-empty");
  if (task_test.pool.count() < 1) throw ValidationError("task_test must be non-empty");
  const Eigen::Index d = task_train.pool.dimension();
  if (task_test.pool.dimension() != d) {
    throw ValidationError("task_test dimension differs from task_train");
  }
  if (selected.count() > 0 && selected.dimension() != d) {
    throw ValidationError("selected pool dimension differs from task_train");
  }

  std::int32_t max_label = 0;
  for (std::int32_t l : task_train.labels) max_label = std::max(max_label, l);
  for (std::int32_t l : task_test.labels) max_label = std::max(max_label, l);
  const Eigen::Index classes = static_cast<Eigen::Index>(max_label) + 1;

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d, classes);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(classes), 0);
  for (Eigen::Index i = 0; i < task_train.pool.count(); ++i) {
    const auto c = static_cast<std::size_t>(task_train.labels[static_cast<std::size_t>(i)]);
    sums.col(static_cast<Eigen::Index>(c)) += task_train.pool.vectors.col(i).cast<double>();
    ++counts[c];
  }
  std::vector<char> active(static_cast<std::size_t>(classes), 0);
  for (std::size_t c = 0; c < counts.size(); ++c) active[c] = counts[c] > 0;
  for (std::int32_t l : task_test.labels) {
    if (!active[static_cast<std::size_t>(l)]) {
      throw ValidationError("class " + std::to_string(l) + " has zero training samples");
    }
  }

  Eigen::MatrixXd centroids(d, classes);
  for (Eigen::Index c = 0; c < classes; ++c) {
    const std::size_t s = static_cast<std::size_t>(c);
    if (active[s]) centroids.col(c) = sums.col(c) / static_cast<double>(counts[s]);
  }

  // Pseudo-label the selected samples, then re-estimate the centroids once
  // over train plus pseudo-labeled points.
  if (selected.count() > 0) {
    Eigen::MatrixXd aug_sums = sums;
    std::vector<std::int64_t> aug_counts = counts;
    for (Eigen::Index i = 0; i < selected.count(); ++i) {
      const Eigen::VectorXd v = selected.vectors.col(i).cast<double>();
      const Eigen::Index c = nearest_class(centroids, active, v);
      aug_sums.col(c) += v;
      ++aug_counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < classes; ++c) {
      const std::size_t s = static_cast<std::size_t>(c);
      if (active[s]) centroids.col(c) = aug_sums.col(c) / static_cast<double>(aug_counts[s]);
    }
  }

  std::int64_t correct = 0;
  for (Eigen::Index i = 0; i < task_test.pool.count(); ++i) {
    const Eigen::VectorXd v = task_test.pool.vectors.col(i).cast<double>();
    const Eigen::Index c = nearest_class(centroids, active, v);
    if (c == static_cast<Eigen::Index>(task_test.labels[static_cast<std::size_t>(i)])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(task_test.pool.count());
}

SyntheticBenchmark make_synthetic_benchmark(const BenchmarkConfig& config, std::uint64_t seed) {
  if (config.distractor_ratio < 0.0) throw ValidationError("distractor_ratio must be >= 0");
  if (config.task_train_count < 1 || config.task_test_count < 1 || config.pool_task_count < 1) {
    throw ValidationError("benchmark sample counts must be >= 1");
  }

  Rng mean_rng(mix_seed(seed, 0));
  MixtureSpec task;
  task.component_means = random_unit_means(config.dimension, config.task_components, mean_rng);
  task.stddev = config.stddev;
  task.weights.assign(static_cast<std::size_t>(config.task_components),
                      1.0 / static_cast<double>(config.task_components));
  task.metric = config.metric;

  MixtureSpec distractor = task;
  distractor.component_means =
      random_unit_means(config.dimension, config.distractor_components, mean_rng);
  distractor.weights.assign(static_cast<std::size_t>(config.distractor_components),
                            1.0 / static_cast<double>(config.distractor_components));

  // Disjoint id spaces keep the selector's default self-exclusion inert.
  constexpr PoolId kTrainBase = PoolId{1} << 40;
  constexpr PoolId kTestBase = PoolId{1} << 41;

  SyntheticBenchmark bench;
  task.seed = mix_seed(seed, 1);
  MixtureSample train = generate_mixture_pool(task, config.task_train_count, kTrainBase);
  bench.task_train.pool = std::move(train.pool);
  bench.task_train.labels = std::move(train.labels);

  task.seed = mix_seed(seed, 2);
  MixtureSample test = generate_mixture_pool(task, config.task_test_count, kTestBase);
  bench.task_test.pool = std::move(test.pool);
  bench.task_test.labels = std::move(test.labels);

  task.seed = mix_seed(seed, 3);
  MixtureSample pool_task = generate_mixture_pool(task, config.pool_task_count, 0);

  const std::uint64_t distractor_count = static_cast<std::uint64_t>(
      config.distractor_ratio * static_cast<double>(config.pool_task_count));
  bench.pool = std::move(pool_task.pool);
  if (distractor_count > 0) {
    distractor.seed = mix_seed(seed, 4);
    MixtureSample noise =
        generate_mixture_pool(distractor, distractor_count, config.pool_task_count);
    const Eigen::Index base = bench.pool.count();
    bench.pool.vectors.conservativeResize(Eigen::NoChange, base + noise.pool.count());
    bench.pool.vectors.rightCols(noise.pool.count()) = noise.pool.vectors;
    bench.pool.ids.insert(bench.pool.ids.end(), noise.pool.ids.begin(), noise.pool.ids.end());
  }
  return bench;
}

}  // namespace sept
