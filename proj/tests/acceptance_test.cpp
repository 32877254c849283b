// Acceptance gate: nine end-to-end checks, one line each, nonzero exit when
// any of them fails. Tolerances and time budgets are pinned as constants.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "sept/discrepancy.hpp"
#include "sept/exact_search.hpp"
#include "sept/ivf.hpp"
#include "sept/kmeans.hpp"
#include "sept/mixture.hpp"
#include "sept/pool.hpp"
#include "sept/pool_io.hpp"
#include "sept/rng.hpp"
#include "sept/selector.hpp"
#include "sept/sq8.hpp"

#include "support/test_util.hpp"

namespace {

using sept::EmbeddingPool;
using sept::Metric;
using sept::PoolId;
using sept::Rng;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return std::string(buf);
}

// --- criterion 1: selection equals the reference breadth-first merge -------

constexpr int kC1Instances = 200;
constexpr double kC1TimeLimit = 120.0;

bool criterion_selection_oracle(std::string& why) {
  Rng meta(4101);
  for (int trial = 0; trial < kC1Instances; ++trial) {
    const Metric metric = (trial % 2 == 0) ? Metric::cosine : Metric::l2;
    const auto n = static_cast<std::uint64_t>(100 + meta.below(9901));
    const auto d = static_cast<Eigen::Index>(1 + meta.below(64));
    const auto nq = static_cast<std::uint64_t>(1 + meta.below(100));
    const auto k = 1 + meta.below(std::min<std::uint64_t>(1000, n));

    const EmbeddingPool pool = sept_test::random_pool(n, d, metric, 51000 + trial);
    const EmbeddingPool queries =
        sept_test::random_pool(nq, d, metric, 62000 + trial, /*id_base=*/1'000'000'000ull);

    sept::SelectOptions opts;
    opts.exclude = std::unordered_set<PoolId>{};
    const sept::SelectionManifest got =
        sept::select(queries, pool, sept::ExactBackend(pool), sept::SelectionBudget{k}, opts);
    const std::vector<sept_test::ReferenceEntry> want =
        sept_test::reference_merge(queries, pool, k, {});

    if (got.entries.size() != want.size()) {
      why = fmt("trial %d: %zu entries, reference has %zu", trial, got.entries.size(),
                want.size());
      return false;
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
      const auto& g = got.entries[i];
      const auto& w = want[i];
      if (g.pool_id != w.pool_id || g.source_query_id != w.query_id || g.rank != w.rank ||
          g.score != w.score) {
        why = fmt("trial %d entry %zu: got (%llu, %llu, %u, %.9g), reference (%llu, %llu, %u, %.9g)",
                  trial, i, (unsigned long long)g.pool_id, (unsigned long long)g.source_query_id,
                  g.rank, g.score, (unsigned long long)w.pool_id, (unsigned long long)w.query_id,
                  w.rank, w.score);
        return false;
      }
    }
  }
  return true;
}

// --- criterion 2: full-probe rerank reproduces the exact scan --------------

constexpr int kC2Instances = 50;
constexpr double kC2ScoreTol = 1e-6;

bool criterion_full_probe_exact(std::string& why) {
  Rng meta(4202);
  for (int trial = 0; trial < kC2Instances; ++trial) {
    const Metric metric = (trial % 2 == 0) ? Metric::cosine : Metric::l2;
    const auto n = static_cast<std::uint64_t>(200 + meta.below(1801));
    const auto d = static_cast<Eigen::Index>(4 + meta.below(45));
    const auto nlist = static_cast<Eigen::Index>(1 + meta.below(16));
    const auto k = static_cast<Eigen::Index>(1 + meta.below(50));

    const EmbeddingPool pool = sept_test::random_pool(n, d, metric, 70000 + trial);
    const EmbeddingPool queries =
        sept_test::random_pool(8, d, metric, 80000 + trial, /*id_base=*/1'000'000'000ull);

    const sept::IvfIndex index =
        sept::ivf_build(pool, sept::kmeans_train(pool, nlist, 90000 + trial), sept::fit_sq8(pool));
    const sept::RerankContext ctx(pool);
    sept::SearchParams params;
    params.nprobe = index.nlist();
    params.k = k;
    params.rerank = true;

    for (Eigen::Index q = 0; q < queries.count(); ++q) {
      const auto approx = sept::ivf_search(index, queries.vectors.col(q), params, &ctx);
      const auto exact = sept::search_exact(pool, queries.vectors.col(q), k);
      if (approx.hits.size() != exact.hits.size()) {
        why = fmt("trial %d query %ld: %zu hits vs %zu exact", trial, (long)q,
                  approx.hits.size(), exact.hits.size());
        return false;
      }
      for (std::size_t i = 0; i < exact.hits.size(); ++i) {
        if (approx.hits[i].id != exact.hits[i].id ||
            std::abs((double)approx.hits[i].score - (double)exact.hits[i].score) > kC2ScoreTol) {
          why = fmt("trial %d query %ld hit %zu: (%llu, %.9g) vs exact (%llu, %.9g)", trial,
                    (long)q, i, (unsigned long long)approx.hits[i].id, approx.hits[i].score,
                    (unsigned long long)exact.hits[i].id, exact.hits[i].score);
          return false;
        }
      }
    }
  }
  return true;
}

// --- criterion 3: recall on a 100k mixture pool -----------------------------

constexpr std::uint64_t kC3PoolSize = 100'000;
constexpr Eigen::Index kC3Dim = 64;
constexpr Eigen::Index kC3NList = 256;
constexpr double kC3RecallFloor = 0.90;  // at nprobe=16 with rerank
constexpr double kC3TimeLimit = 300.0;

bool criterion_recall(std::string& why) {
  Rng means_rng(4303);
  sept::MixtureSpec spec;
  spec.component_means = sept::random_unit_means(kC3Dim, 32, means_rng);
  spec.stddev = 0.15;
  spec.weights.assign(32, 1.0 / 32.0);
  spec.metric = Metric::cosine;
  spec.seed = 4310;
  const EmbeddingPool pool = sept::generate_mixture_pool(spec, kC3PoolSize).pool;

  spec.seed = 4311;
  const EmbeddingPool queries =
      sept::generate_mixture_pool(spec, 100, /*id_base=*/2'000'000'000ull).pool;

  const sept::IvfIndex index =
      sept::ivf_build(pool, sept::kmeans_train(pool, kC3NList, 4320, /*max_iters=*/10),
                      sept::fit_sq8(pool));

  double prev = -1.0;
  double at16 = 0.0;
  for (const Eigen::Index nprobe : {1, 4, 16, 64}) {
    sept::SearchParams params;
    params.nprobe = nprobe;
    params.k = 10;
    params.rerank = true;
    const double recall = sept::ivf_eval_recall(index, queries, pool, params);
    if (recall < prev) {
      why = fmt("recall fell from %.4f to %.4f at nprobe=%ld", prev, recall, (long)nprobe);
      return false;
    }
    prev = recall;
    if (nprobe == 16) at16 = recall;
  }
  if (at16 < kC3RecallFloor) {
    why = fmt("recall@10 at nprobe=16 is %.4f, need >= %.2f", at16, kC3RecallFloor);
    return false;
  }
  return true;
}

// --- criterion 4: SQ8 reconstruction error bound ----------------------------

constexpr std::uint64_t kC4PoolSize = 10'000;
constexpr double kC4Slack = 1e-7;

bool criterion_sq8_bound(std::string& why) {
  EmbeddingPool pool = sept_test::random_pool(kC4PoolSize, 32, Metric::l2, 4404);
  pool.vectors *= 3.0f;  // widen the per-dimension ranges

  const sept::Sq8Codec codec = sept::fit_sq8(pool);
  std::vector<std::uint8_t> code(codec.dimension());
  Eigen::VectorXf decoded(codec.dimension());
  for (Eigen::Index c = 0; c < pool.count(); ++c) {
    sept::sq8_encode(codec, pool.vectors.col(c), code.data());
    sept::sq8_decode(codec, code.data(), decoded);
    for (Eigen::Index r = 0; r < codec.dimension(); ++r) {
      const double bound =
          ((double)codec.max_per_dim[r] - (double)codec.min_per_dim[r]) / 255.0 / 2.0 + kC4Slack;
      const double err = std::abs((double)decoded[r] - (double)pool.vectors(r, c));
      if (err > bound) {
        why = fmt("vector %ld dim %ld: error %.3g exceeds bound %.3g", (long)c, (long)r, err,
                  bound);
        return false;
      }
    }
  }
  return true;
}

// --- criterion 5: k-means inertia is monotone; k = N reaches zero -----------

constexpr int kC5Runs = 20;

bool criterion_kmeans_monotone(std::string& why) {
  Rng meta(4505);
  for (int run = 0; run < kC5Runs; ++run) {
    const auto n = static_cast<std::uint64_t>(200 + meta.below(2001));
    const auto d = static_cast<Eigen::Index>(8 + meta.below(25));
    const auto nlist = static_cast<Eigen::Index>(1 + meta.below(64));

    const EmbeddingPool pool = sept_test::random_pool(n, d, Metric::l2, 95000 + run);
    const sept::KMeansModel model = sept::kmeans_train(pool, nlist, 96000 + run);
    for (std::size_t i = 1; i < model.inertia_history.size(); ++i) {
      if (model.inertia_history[i] > model.inertia_history[i - 1]) {
        why = fmt("run %d: inertia rose from %.9g to %.9g at pass %zu", run,
                  model.inertia_history[i - 1], model.inertia_history[i], i);
        return false;
      }
    }
  }

  const EmbeddingPool pool = sept_test::random_pool(300, 12, Metric::l2, 97000);
  const sept::KMeansModel full = sept::kmeans_train(pool, pool.count(), 97001);
  if (full.inertia != 0.0) {
    why = fmt("nlist == count left inertia at %.9g, expected 0", full.inertia);
    return false;
  }
  return true;
}

// --- criterion 6: analytic gradient vs central differences ------------------

constexpr int kC6Instances = 100;
constexpr double kC6Step = 1e-4;
constexpr double kC6RelTol = 1e-5;

double loss_at(const sept::LogisticParams& params, const sept::LogisticBatch& batch) {
  return sept::logistic_loss(params, batch);
}

bool criterion_gradient(std::string& why) {
  Rng meta(4606);
  for (int trial = 0; trial < kC6Instances; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + meta.below(16));
    const auto n = static_cast<Eigen::Index>(2 + meta.below(40));

    sept::LogisticBatch batch;
    batch.features.resize(d, n);
    batch.labels.resize(n);
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < d; ++r) batch.features(r, c) = meta.normal();
      batch.labels[c] = (meta.uniform() < 0.5) ? 0.0 : 1.0;
    }
    sept::LogisticParams params;
    params.weights.resize(d);
    for (Eigen::Index r = 0; r < d; ++r) params.weights[r] = 0.5 * meta.normal();
    params.bias = 0.5 * meta.normal();

    const sept::LogisticGradient analytic = sept::classifier_gradient(params, batch);

    for (Eigen::Index r = 0; r <= d; ++r) {  // weights, then the bias at r == d
      sept::LogisticParams lo = params;
      sept::LogisticParams hi = params;
      if (r < d) {
        lo.weights[r] -= kC6Step;
        hi.weights[r] += kC6Step;
      } else {
        lo.bias -= kC6Step;
        hi.bias += kC6Step;
      }
      const double fd = (loss_at(hi, batch) - loss_at(lo, batch)) / (2.0 * kC6Step);
      const double a = (r < d) ? analytic.weights[r] : analytic.bias;
      const double rel = std::abs(a - fd) / std::max(1.0, std::abs(a));
      if (rel > kC6RelTol) {
        why = fmt("trial %d coord %ld: analytic %.9g vs fd %.9g (rel %.3g)", trial, (long)r, a,
                  fd, rel);
        return false;
      }
    }
  }
  return true;
}

// --- criterion 7: paired-seed benchmark, retrieval beats random --------------

constexpr int kC7Pairs = 20;
constexpr std::uint64_t kC7Budget = 1000;
constexpr double kC7WinFraction = 0.95;  // proxy distance must drop in >= this share of pairs
constexpr double kC7TimeLimit = 600.0;

bool criterion_benchmark_direction(std::string& why) {
  int wins = 0;
  double acc_selected = 0.0;
  double acc_random = 0.0;
  for (int pair = 0; pair < kC7Pairs; ++pair) {
    const sept::SyntheticBenchmark bench =
        sept::make_synthetic_benchmark(sept::BenchmarkConfig{}, 48000 + pair);

    const sept::SelectionManifest manifest =
        sept::select(bench.task_train.pool, bench.pool, sept::ExactBackend(bench.pool),
                     sept::SelectionBudget{kC7Budget});
    const EmbeddingPool selected = sept::manifest_subset(manifest, bench.pool);
    const EmbeddingPool random = sept::random_subset(bench.pool, kC7Budget, 49000 + pair);

    const auto pad = [&](const EmbeddingPool& subset) {
      sept::DomainSampleSet sets{subset, bench.task_train.pool};
      return sept::estimate_discrepancy(sets, 0.5, 200, 0.5, 50000 + pair).proxy_a_distance;
    };
    const double pad_selected = pad(selected);
    const double pad_random = pad(random);
    if (pad_selected < pad_random) ++wins;

    acc_selected += sept::eval_downstream_proxy(selected, bench.task_train, bench.task_test);
    acc_random += sept::eval_downstream_proxy(random, bench.task_train, bench.task_test);
  }
  acc_selected /= kC7Pairs;
  acc_random /= kC7Pairs;

  if (wins < (int)std::ceil(kC7WinFraction * kC7Pairs)) {
    why = fmt("proxy distance dropped in only %d of %d pairs", wins, kC7Pairs);
    return false;
  }
  if (acc_selected < acc_random) {
    why = fmt("mean accuracy %.4f (selected) < %.4f (random)", acc_selected, acc_random);
    return false;
  }
  why = fmt("wins %d/%d, accuracy %.4f vs %.4f", wins, kC7Pairs, acc_selected, acc_random);
  return true;
}

// --- criterion 8: the CLI pipeline is byte-reproducible ----------------------

const char* kC8Config =
    "dimension=12\n"
    "components=4\n"
    "stddev=0.3\n"
    "metric=cosine\n"
    "mean.0=1,0,0,0,0,0,0,0,0,0,0,0\n"
    "mean.1=0,1,0,0,0,0,0,0,0,0,0,0\n"
    "mean.2=0,0,1,0,0,0,0,0,0,0,0,0\n"
    "mean.3=0,0,0,1,0,0,0,0,0,0,0,0\n";

bool criterion_cli_reproducible(std::string& why) {
  namespace fs = std::filesystem;
  const std::vector<std::vector<std::string>> commands = {
      {"synth", "--spec", "mix.cfg", "--n", "600", "--seed", "11", "--out", "pool.sept"},
      {"synth", "--spec", "mix.cfg", "--n", "50", "--seed", "12", "--id-base", "2000000",
       "--labels-out", "task_labels.tsv", "--out", "task.sept"},
      {"synth", "--spec", "mix.cfg", "--n", "80", "--seed", "13", "--id-base", "3000000",
       "--labels-out", "test_labels.tsv", "--out", "test.sept"},
      {"index-build", "--pool", "pool.sept", "--nlist", "8", "--seed", "14", "--out",
       "index.sepi"},
      {"query", "--index", "index.sepi", "--pool", "pool.sept", "--queries", "task.sept", "--k",
       "5", "--nprobe", "8", "--rerank"},
      {"select", "--exact", "--queries", "task.sept", "--pool", "pool.sept", "--budget", "100",
       "--out", "m_exact.tsv"},
      {"select", "--index", "index.sepi", "--pool", "pool.sept", "--queries", "task.sept",
       "--nprobe", "8", "--rerank", "--budget", "100", "--out", "m_ivf.tsv"},
      {"eval-recall", "--index", "index.sepi", "--pool", "pool.sept", "--queries", "task.sept",
       "--k", "10", "--nprobe", "1,2,4,8", "--rerank"},
      {"verify", "--manifest", "m_exact.tsv", "--queries", "task.sept", "--pool", "pool.sept"},
      {"eval", "--pool", "pool.sept", "--task", "task.sept", "--task-labels", "task_labels.tsv",
       "--test", "test.sept", "--test-labels", "test_labels.tsv", "--manifest", "m_exact.tsv",
       "--seeds", "2", "--seed", "15", "--out", "report.tsv"},
  };
  const std::vector<std::string> artifacts = {
      "pool.sept",   "task.sept", "test.sept", "task_labels.tsv", "test_labels.tsv",
      "index.sepi",  "m_exact.tsv", "m_ivf.tsv", "report.tsv"};

  const fs::path run_a = sept_test::fresh_dir("accept_a");
  const fs::path run_b = sept_test::fresh_dir("accept_b");
  std::vector<std::string> transcript_a, transcript_b;
  for (const fs::path& dir : {run_a, run_b}) {
    auto& transcript = (dir == run_a) ? transcript_a : transcript_b;
    sept_test::write_file(dir / "mix.cfg", kC8Config);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const sept_test::CliResult r = sept_test::run_process(SEPT_CLI_PATH, commands[i], dir);
      if (r.exit_code != 0) {
        why = fmt("command %zu exited %d in %s: %s", i, r.exit_code, dir.c_str(),
                  r.err.c_str());
        return false;
      }
      transcript.push_back(r.out + "\x1f" + r.err);
    }
  }
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (transcript_a[i] != transcript_b[i]) {
      why = fmt("command %zu produced different output across runs", i);
      return false;
    }
  }
  for (const std::string& name : artifacts) {
    if (sept_test::read_file(run_a / name) != sept_test::read_file(run_b / name)) {
      why = fmt("artifact %s differs across runs", name.c_str());
      return false;
    }
  }
  return true;
}

// --- criterion 9: write -> read -> write is byte-stable ----------------------

constexpr int kC9Instances = 20;

bool criterion_roundtrip(std::string& why) {
  Rng meta(4909);
  for (int trial = 0; trial < kC9Instances; ++trial) {
    const Metric metric = (trial % 2 == 0) ? Metric::cosine : Metric::l2;
    const auto n = static_cast<std::uint64_t>(50 + meta.below(1000));
    const auto d = static_cast<Eigen::Index>(2 + meta.below(32));
    const EmbeddingPool pool = sept_test::random_pool(n, d, metric, 31000 + trial);

    std::ostringstream pool_once;
    sept::write_pool(pool, pool_once);
    std::istringstream pool_in(pool_once.str());
    std::ostringstream pool_twice;
    sept::write_pool(sept::read_pool(pool_in), pool_twice);
    if (pool_once.str() != pool_twice.str()) {
      why = fmt("trial %d: pool bytes changed across a read/write cycle", trial);
      return false;
    }

    const auto nlist = static_cast<Eigen::Index>(1 + meta.below(8));
    const sept::IvfIndex index =
        sept::ivf_build(pool, sept::kmeans_train(pool, nlist, 32000 + trial), sept::fit_sq8(pool));
    std::ostringstream index_once;
    sept::write_index(index, index_once);
    std::istringstream index_in(index_once.str());
    std::ostringstream index_twice;
    sept::write_index(sept::read_index(index_in), index_twice);
    if (index_once.str() != index_twice.str()) {
      why = fmt("trial %d: index bytes changed across a read/write cycle", trial);
      return false;
    }

    const EmbeddingPool queries =
        sept_test::random_pool(1 + meta.below(8), d, metric, 33000 + trial,
                               /*id_base=*/1'000'000'000ull);
    const auto budget = 1 + meta.below(std::min<std::uint64_t>(100, n));
    const sept::SelectionManifest manifest = sept::select(
        queries, pool, sept::ExactBackend(pool), sept::SelectionBudget{budget});
    std::ostringstream manifest_once;
    sept::write_manifest(manifest, manifest_once);
    std::istringstream manifest_in(manifest_once.str());
    std::ostringstream manifest_twice;
    sept::write_manifest(sept::read_manifest(manifest_in), manifest_twice);
    if (manifest_once.str() != manifest_twice.str()) {
      why = fmt("trial %d: manifest bytes changed across a read/write cycle", trial);
      return false;
    }
  }
  return true;
}

struct Criterion {
  const char* name;
  std::function<bool(std::string&)> run;
  double time_limit = 0.0;  // seconds; 0 = untimed
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"selection matches the reference merge on 200 randomized instances",
       criterion_selection_oracle, kC1TimeLimit},
      {"full-probe rerank reproduces the exact top-k on 50 instances", criterion_full_probe_exact,
       0.0},
      {"recall@10 >= 0.90 at nprobe=16 and monotone over the probe sweep (100k pool)",
       criterion_recall, kC3TimeLimit},
      {"SQ8 reconstruction error within half a quantization step (10k pool)", criterion_sq8_bound,
       0.0},
      {"k-means inertia monotone over 20 seeded runs; nlist == count reaches zero",
       criterion_kmeans_monotone, 0.0},
      {"analytic gradient matches central differences on 100 instances", criterion_gradient, 0.0},
      {"selected subsets beat random on proxy distance and downstream accuracy (20 paired seeds)",
       criterion_benchmark_direction, kC7TimeLimit},
      {"the seeded CLI pipeline is byte-identical across two runs", criterion_cli_reproducible,
       0.0},
      {"pool, index, and manifest files are byte-stable across read/write cycles",
       criterion_roundtrip, 0.0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(start);
    if (ok && criteria[i].time_limit > 0.0 && elapsed > criteria[i].time_limit) {
      ok = false;
      detail = fmt("ran %.1fs, limit %.0fs", elapsed, criteria[i].time_limit);
    }
    std::printf("[%zu] %-82s %s (%.1fs)%s%s\n", i + 1, criteria[i].name, ok ? "PASS" : "FAIL",
                elapsed, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures != 0) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
