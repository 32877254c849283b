// sept: retrieval-based selection of pre-training data from embedding pools.
//
// Verbs: ingest, info, index-build, query, select, verify, eval-recall,
// eval, synth. Every command is deterministic given its flags; all errors
// leave on stderr as "ERROR <code>: message" with a matching exit code.

#include <algorithm>
#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "sept/discrepancy.hpp"
#include "sept/error.hpp"
#include "sept/exact_search.hpp"
#include "sept/ivf.hpp"
#include "sept/kmeans.hpp"
#include "sept/mixture.hpp"
#include "sept/pool.hpp"
#include "sept/pool_io.hpp"
#include "sept/rng.hpp"
#include "sept/run_config.hpp"
#include "sept/selector.hpp"
#include "sept/sq8.hpp"

namespace {

using namespace sept;

std::string format_score(float score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(score));
  return buf;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void print_pool_stats(const EmbeddingPool& pool) {
  std::cout << "count=" << pool.count() << "\tdimension=" << pool.dimension()
            << "\tmetric=" << metric_name(pool.metric) << "\n";
}

// ---------------------------------------------------------------------------
// Shared flag plumbing

struct PresetState {
  std::string name;
  PresetValues values;
  bool active = false;
};

void apply_preset(PresetState& preset, Eigen::Index* nlist, bool nlist_set, Eigen::Index* nprobe,
                  bool nprobe_set) {
  if (preset.name.empty()) return;
  preset.values = preset_values(preset.name);
  preset.active = true;
  if (nlist != nullptr && !nlist_set) *nlist = preset.values.nlist;
  if (nprobe != nullptr && !nprobe_set) *nprobe = preset.values.nprobe;
}

void check_preset_dimension(const PresetState& preset, const std::string& what,
                            Eigen::Index dimension) {
  if (!preset.active || preset.values.dimension == 0) return;
  if (dimension != preset.values.dimension) {
    throw ValidationError("preset '" + preset.name + "' pins dimension " +
                          std::to_string(preset.values.dimension) + " but " + what + " has " +
                          std::to_string(dimension));
  }
}

std::string preset_label(const PresetState& preset) {
  return preset.name.empty() ? "-" : preset.name;
}

// ---------------------------------------------------------------------------
// TSV inputs

EmbeddingPool read_tsv_matrix(const std::string& path, Metric metric, PoolId id_base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  EmbeddingPool pool;
  pool.metric = metric;
  std::vector<float> values;
  Eigen::Index dimension = 0;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    Eigen::Index fields = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t tab = line.find('\t', start);
      const std::string item =
          tab == std::string::npos ? line.substr(start) : line.substr(start, tab - start);
      char* end = nullptr;
      errno = 0;
      const float v = std::strtof(item.c_str(), &end);
      if (item.empty() || end != item.c_str() + item.size() || errno != 0 || !std::isfinite(v)) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": bad value '" + item + "'");
      }
      values.push_back(v);
      ++fields;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (dimension == 0) {
      dimension = fields;
    } else if (fields != dimension) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(dimension) + " fields, got " + std::to_string(fields));
    }
    pool.ids.push_back(id_base + rows);
    ++rows;
  }
  if (rows == 0) throw FormatError(path + ": no data rows");

  pool.vectors.resize(dimension, static_cast<Eigen::Index>(rows));
  for (std::uint64_t i = 0; i < rows; ++i) {
    for (Eigen::Index r = 0; r < dimension; ++r) {
      pool.vectors(r, static_cast<Eigen::Index>(i)) =
          values[i * static_cast<std::uint64_t>(dimension) + static_cast<std::uint64_t>(r)];
    }
  }
  return pool;
}

std::unordered_map<PoolId, std::int32_t> read_labels_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::unordered_map<PoolId, std::int32_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected id<TAB>label");
    }
    const std::string id_text = line.substr(0, tab);
    const std::string label_text = line.substr(tab + 1);
    char* end = nullptr;
    errno = 0;
    const PoolId id = std::strtoull(id_text.c_str(), &end, 10);
    if (id_text.empty() || end != id_text.c_str() + id_text.size() || errno != 0) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": bad id '" + id_text + "'");
    }
    errno = 0;
    const long label = std::strtol(label_text.c_str(), &end, 10);
    if (label_text.empty() || end != label_text.c_str() + label_text.size() || errno != 0 ||
        label < 0) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": bad label '" + label_text + "'");
    }
    if (!labels.emplace(id, static_cast<std::int32_t>(label)).second) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": duplicate id " + id_text);
    }
  }
  return labels;
}

LabeledPool attach_labels(EmbeddingPool pool, const std::string& labels_path) {
  const auto labels = read_labels_tsv(labels_path);
  LabeledPool out;
  out.labels.reserve(static_cast<std::size_t>(pool.count()));
  for (PoolId id : pool.ids) {
    const auto it = labels.find(id);
    if (it == labels.end()) {
      throw ValidationError(labels_path + ": missing label for id " + std::to_string(id));
    }
    out.labels.push_back(it->second);
  }
  out.pool = std::move(pool);
  return out;
}

void write_labels_tsv(const std::string& path, const std::vector<PoolId>& ids,
                      const std::vector<std::int32_t>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << '\t' << labels[i] << '\n';
  }
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Commands

struct IngestArgs {
  std::string tsv;
  std::string synth_cfg;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string metric = "cosine";
  std::uint64_t id_base = 0;
  std::string out;
};

int cmd_ingest(const IngestArgs& args) {
  EmbeddingPool pool;
  if (!args.tsv.empty() && !args.synth_cfg.empty()) {
    throw UsageError("pass exactly one of --tsv and --synth");
  }
  if (!args.tsv.empty()) {
    const Metric metric = metric_from_name(args.metric);
    pool = read_tsv_matrix(args.tsv, metric, args.id_base);
    if (metric == Metric::cosine) pool = normalize(pool);
  } else if (!args.synth_cfg.empty()) {
    if (args.n == 0) throw UsageError("--synth needs --n");
    if (!args.seed_set) throw UsageError("--synth needs --seed");
    const MixtureConfig config = load_mixture_config(args.synth_cfg);
    const MixtureSpec spec = resolve_mixture_config(config, args.seed);
    pool = generate_mixture_pool(spec, args.n, args.id_base).pool;
  } else {
    throw UsageError("pass one of --tsv and --synth");
  }
  save_pool(pool, args.out);
  print_pool_stats(pool);
  return 0;
}

int cmd_info(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() != 4) throw FormatError(path + ": shorter than a format magic");
  in.seekg(0);
  if (std::equal(magic, magic + 4, kPoolMagic)) {
    const EmbeddingPool pool = read_pool(in, path);
    print_pool_stats(pool);
    return 0;
  }
  if (std::equal(magic, magic + 4, kIndexMagic)) {
    const IvfIndex index = read_index(in, path);
    std::cout << "nlist=" << index.nlist() << "\tdimension=" << index.dimension
              << "\tmetric=" << metric_name(index.metric) << "\tcount=" << index.indexed_count()
              << "\tinertia=" << format_real(index.kmeans.inertia)
              << "\titerations=" << index.kmeans.iterations_run << "\n";
    return 0;
  }
  throw FormatError(path + ": bad magic, neither a pool nor an index file");
}

struct IndexBuildArgs {
  std::string pool;
  Eigen::Index nlist = 0;
  bool nlist_set = false;
  int max_iters = kKMeansDefaultMaxIters;
  std::uint64_t seed = 0;
  std::string out;
  PresetState preset;
};

int cmd_index_build(IndexBuildArgs& args) {
  apply_preset(args.preset, &args.nlist, args.nlist_set, nullptr, false);
  if (args.nlist < 1) throw UsageError("--nlist (or a preset) is required");

  const EmbeddingPool pool = load_pool(args.pool);
  check_preset_dimension(args.preset, "pool '" + args.pool + "'", pool.dimension());

  std::cout << "# config preset=" << preset_label(args.preset) << " nlist=" << args.nlist
            << " max_iters=" << args.max_iters << " seed=" << args.seed << "\n";

  KMeansModel kmeans = kmeans_train(pool, args.nlist, args.seed, args.max_iters);
  Sq8Codec codec = fit_sq8(pool);
  const IvfIndex index = ivf_build(pool, std::move(kmeans), std::move(codec));
  save_index(index, args.out);

  std::vector<std::size_t> sizes;
  sizes.reserve(index.lists.size());
  std::size_t total = 0, empty = 0;
  for (const InvertedList& list : index.lists) {
    sizes.push_back(list.size());
    total += list.size();
    if (list.size() == 0) ++empty;
  }
  std::sort(sizes.begin(), sizes.end());
  std::cout << "inertia=" << format_real(index.kmeans.inertia)
            << "\titerations=" << index.kmeans.iterations_run << "\n";
  std::cout << "lists\ttotal=" << total << "\tempty=" << empty << "\tmin=" << sizes.front()
            << "\tp50=" << sizes[sizes.size() / 2] << "\tmax=" << sizes.back() << "\n";
  return 0;
}

struct QueryArgs {
  std::string index;
  std::string pool;
  std::string queries;
  Eigen::Index k = 10;
  Eigen::Index nprobe = 1;
  bool nprobe_set = false;
  bool rerank = false;
  bool exact = false;
  PresetState preset;
};

int cmd_query(QueryArgs& args) {
  apply_preset(args.preset, nullptr, false, &args.nprobe, args.nprobe_set);
  const EmbeddingPool queries = load_pool(args.queries);
  check_preset_dimension(args.preset, "queries '" + args.queries + "'", queries.dimension());

  std::cout << "# config preset=" << preset_label(args.preset)
            << " mode=" << (args.exact ? "exact" : "ivf") << " k=" << args.k
            << " nprobe=" << (args.exact ? 0 : args.nprobe) << " rerank=" << (args.rerank ? 1 : 0)
            << "\n";

  std::vector<RankedList> lists;
  if (args.exact) {
    if (args.pool.empty()) throw UsageError("--exact needs --pool");
    const EmbeddingPool pool = load_pool(args.pool);
    check_preset_dimension(args.preset, "pool '" + args.pool + "'", pool.dimension());
    lists = search_exact_batch(pool, queries, args.k);
  } else {
    if (args.index.empty()) throw UsageError("pass --index or --exact");
    const IvfIndex index = load_index(args.index);
    check_preset_dimension(args.preset, "index '" + args.index + "'", index.dimension);
    if (queries.metric != index.metric) {
      throw ValidationError("query metric does not match index metric");
    }
    SearchParams params;
    params.k = args.k;
    params.nprobe = args.nprobe;
    params.rerank = args.rerank;
    std::optional<EmbeddingPool> pool;
    std::optional<RerankContext> ctx;
    if (args.rerank) {
      if (args.pool.empty()) throw UsageError("--rerank needs --pool");
      pool.emplace(load_pool(args.pool));
      if (pool->metric != index.metric) {
        throw ValidationError("pool metric does not match index metric");
      }
      ctx.emplace(*pool);
    }
    for (Eigen::Index q = 0; q < queries.count(); ++q) {
      lists.push_back(ivf_search(index, queries.vectors.col(q), params, ctx ? &*ctx : nullptr,
                                 queries.ids[static_cast<std::size_t>(q)]));
    }
  }

  for (const RankedList& list : lists) {
    for (std::size_t rank = 0; rank < list.hits.size(); ++rank) {
      std::cout << list.query_id << '\t' << rank << '\t' << list.hits[rank].id << '\t'
                << format_score(list.hits[rank].score) << "\n";
    }
  }
  return 0;
}

struct SelectArgs {
  std::string queries;
  std::string pool;
  std::string index;
  bool exact = false;
  std::uint64_t budget = 0;
  Eigen::Index nprobe = 1;
  bool nprobe_set = false;
  bool rerank = false;
  bool allow_short = false;
  std::string out;
  PresetState preset;
};

int cmd_select(SelectArgs& args) {
  apply_preset(args.preset, nullptr, false, &args.nprobe, args.nprobe_set);
  const EmbeddingPool queries = load_pool(args.queries);
  const EmbeddingPool pool = load_pool(args.pool);
  check_preset_dimension(args.preset, "queries '" + args.queries + "'", queries.dimension());
  check_preset_dimension(args.preset, "pool '" + args.pool + "'", pool.dimension());

  std::cout << "# config preset=" << preset_label(args.preset)
            << " mode=" << (args.exact ? "exact" : "ivf") << " budget=" << args.budget
            << " nprobe=" << (args.exact ? 0 : args.nprobe) << " rerank=" << (args.rerank ? 1 : 0)
            << " allow_short=" << (args.allow_short ? 1 : 0) << "\n";

  SelectOptions opts;
  opts.allow_short = args.allow_short;
  SelectionBudget budget{args.budget};

  SelectionManifest manifest;
  std::optional<IvfIndex> index;
  if (args.exact) {
    const ExactBackend backend(pool);
    manifest = select(queries, pool, backend, budget, opts);
  } else {
    if (args.index.empty()) throw UsageError("pass --index or --exact");
    index.emplace(load_index(args.index));
    check_preset_dimension(args.preset, "index '" + args.index + "'", index->dimension);
    if (index->metric != pool.metric) {
      throw ValidationError("pool metric does not match index metric");
    }
    const IvfBackend backend(*index, args.nprobe, args.rerank, &pool);
    manifest = select(queries, pool, backend, budget, opts);
  }

  save_manifest(manifest, args.out);
  if (manifest.entries.size() < budget.k) {
    std::cerr << "WARNING: selected " << manifest.entries.size() << " of " << budget.k
              << " requested\n";
  }
  std::cout << "selected=" << manifest.entries.size() << "\tbudget=" << budget.k
            << "\tdigest=" << manifest.config_digest << "\n";
  return 0;
}

int cmd_verify(const std::string& manifest_path, const std::string& queries_path,
               const std::string& pool_path) {
  const SelectionManifest manifest = load_manifest(manifest_path);
  const EmbeddingPool queries = load_pool(queries_path);
  const EmbeddingPool pool = load_pool(pool_path);
  if (!verify_manifest(manifest, queries, pool)) {
    throw Error(ErrorCode::verify, "manifest '" + manifest_path + "' does not match recomputation");
  }
  std::cout << "verify=PASS\tentries=" << manifest.entries.size() << "\n";
  return 0;
}

struct EvalRecallArgs {
  std::string index;
  std::string pool;
  std::string queries;
  Eigen::Index k = 10;
  std::string nprobe_list = "1";
  bool rerank = false;
  PresetState preset;
};

int cmd_eval_recall(EvalRecallArgs& args) {
  // The preset's nprobe does not override an explicit sweep list; it only
  // stands in when the flag is absent.
  std::vector<Eigen::Index> probes;
  {
    std::size_t start = 0;
    const std::string& text = args.nprobe_list;
    while (start <= text.size()) {
      const std::size_t comma = text.find(',', start);
      const std::string item =
          comma == std::string::npos ? text.substr(start) : text.substr(start, comma - start);
      char* end = nullptr;
      errno = 0;
      const long v = std::strtol(item.c_str(), &end, 10);
      if (item.empty() || end != item.c_str() + item.size() || errno != 0 || v < 1) {
        throw UsageError("bad nprobe list entry '" + item + "'");
      }
      probes.push_back(static_cast<Eigen::Index>(v));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }

  const IvfIndex index = load_index(args.index);
  const EmbeddingPool pool = load_pool(args.pool);
  const EmbeddingPool queries = load_pool(args.queries);
  check_preset_dimension(args.preset, "index '" + args.index + "'", index.dimension);
  if (pool.metric != index.metric || queries.metric != index.metric) {
    throw ValidationError("pool/query metric does not match index metric");
  }

  std::cout << "# config preset=" << preset_label(args.preset) << " k=" << args.k
            << " rerank=" << (args.rerank ? 1 : 0) << "\n";
  std::cout << "nprobe\trerank\trecall\n";
  for (Eigen::Index nprobe : probes) {
    SearchParams params;
    params.k = args.k;
    params.nprobe = nprobe;
    params.rerank = args.rerank;
    const double recall = ivf_eval_recall(index, queries, pool, params);
    std::cout << nprobe << '\t' << (args.rerank ? 1 : 0) << '\t' << format_real(recall) << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::string pool;
  std::string task;
  std::string task_labels;
  std::string test;
  std::string test_labels;
  std::string manifest;
  std::string method;  // empty or "random"
  std::uint64_t budget = 0;
  int seeds = 1;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  int epochs = 300;
  double lr = 0.5;
  std::string out;
};

int cmd_eval(const EvalArgs& args) {
  if (args.manifest.empty() == args.method.empty()) {
    throw UsageError("pass exactly one of --manifest and --method random");
  }
  if (!args.method.empty() && args.method != "random") {
    throw UsageError("the only supported --method is 'random'");
  }
  if (args.seeds < 1) throw UsageError("--seeds must be >= 1");

  const EmbeddingPool pool = load_pool(args.pool);
  const LabeledPool task = attach_labels(load_pool(args.task), args.task_labels);
  const LabeledPool test = attach_labels(load_pool(args.test), args.test_labels);

  std::optional<SelectionManifest> manifest;
  std::optional<EmbeddingPool> selected;
  std::uint64_t baseline_n = args.budget;
  if (!args.manifest.empty()) {
    manifest = load_manifest(args.manifest);
    selected = manifest_subset(*manifest, pool);
    baseline_n = manifest->entries.size();
  }
  if (baseline_n == 0) {
    throw UsageError(args.manifest.empty() ? "--method random needs --budget"
                                           : "manifest holds no entries");
  }

  // The random baseline draws from the same candidate set the selector sees:
  // the pool minus ids it shares with the task set.
  std::vector<Eigen::Index> eligible;
  {
    std::unordered_set<PoolId> task_ids(task.pool.ids.begin(), task.pool.ids.end());
    for (Eigen::Index i = 0; i < pool.count(); ++i) {
      if (!task_ids.count(pool.ids[static_cast<std::size_t>(i)])) eligible.push_back(i);
    }
  }
  if (baseline_n > eligible.size()) {
    throw ValidationError("baseline size " + std::to_string(baseline_n) + " exceeds the " +
                          std::to_string(eligible.size()) + " eligible pool vectors");
  }

  std::ofstream out(args.out, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + args.out + "' for writing");
  out << "# sept-eval v1\n";
  out << "# config seeds=" << args.seeds << " seed=" << args.seed << " n=" << baseline_n
      << " train_fraction=" << format_real(args.train_fraction) << " epochs=" << args.epochs
      << " lr=" << format_real(args.lr) << "\n";
  out << "seed\tmethod\tproxy_a_distance\taccuracy\n";

  const double sept_accuracy =
      selected ? eval_downstream_proxy(*selected, task, test) : 0.0;
  for (int s = 0; s < args.seeds; ++s) {
    const std::uint64_t run_seed = mix_seed(args.seed, static_cast<std::uint64_t>(s));
    if (selected) {
      const DiscrepancyEstimate est = estimate_discrepancy(
          {*selected, task.pool}, args.train_fraction, args.epochs, args.lr, run_seed);
      out << run_seed << "\tsept\t" << format_real(est.proxy_a_distance) << '\t'
          << format_real(sept_accuracy) << "\n";
    }

    Rng rng(mix_seed(run_seed, 1));
    const auto picked = rng.sample_without_replacement(eligible.size(),
                                                       static_cast<std::size_t>(baseline_n));
    std::vector<Eigen::Index> columns;
    columns.reserve(picked.size());
    for (std::size_t p : picked) columns.push_back(eligible[p]);
    const EmbeddingPool baseline = subset_by_columns(pool, columns);

    const DiscrepancyEstimate est = estimate_discrepancy(
        {baseline, task.pool}, args.train_fraction, args.epochs, args.lr, run_seed);
    const double accuracy = eval_downstream_proxy(baseline, task, test);
    out << run_seed << "\trandom\t" << format_real(est.proxy_a_distance) << '\t'
        << format_real(accuracy) << "\n";
  }
  out.flush();
  if (!out) throw IoError("write to '" + args.out + "' failed");
  std::cout << "report=" << args.out << "\trows=" << (args.seeds * (selected ? 2 : 1)) << "\n";
  return 0;
}

struct SynthArgs {
  std::string spec;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::uint64_t id_base = 0;
  std::string out;
  std::string labels_out;
};

int cmd_synth(const SynthArgs& args) {
  const MixtureConfig config = load_mixture_config(args.spec);
  const MixtureSpec spec = resolve_mixture_config(config, args.seed);
  const MixtureSample sample = generate_mixture_pool(spec, args.n, args.id_base);
  save_pool(sample.pool, args.out);
  if (!args.labels_out.empty()) {
    write_labels_tsv(args.labels_out, sample.pool.ids, sample.labels);
  }
  print_pool_stats(sample.pool);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval-based selection of pre-training data from embedding pools"};
  app.require_subcommand(1);

  // ingest
  IngestArgs ingest;
  CLI::App* c_ingest = app.add_subcommand("ingest", "build a pool file from TSV or a mixture config");
  c_ingest->add_option("--tsv", ingest.tsv, "TSV of float rows, one vector per line");
  c_ingest->add_option("--synth", ingest.synth_cfg, "mixture config (key=value)");
  c_ingest->add_option("--n", ingest.n, "sample count for --synth");
  auto* ingest_seed = c_ingest->add_option("--seed", ingest.seed, "generator seed for --synth");
  c_ingest->add_option("--metric", ingest.metric, "cosine or l2 (TSV mode)")
      ->check(CLI::IsMember({"cosine", "l2"}));
  c_ingest->add_option("--id-base", ingest.id_base, "first assigned id");
  c_ingest->add_option("--out", ingest.out, "pool file to write")->required();

  // info
  std::string info_path;
  CLI::App* c_info = app.add_subcommand("info", "describe a pool or index file");
  c_info->add_option("path", info_path, "pool or index file")->required();

  // index-build
  IndexBuildArgs ib;
  CLI::App* c_ib = app.add_subcommand("index-build", "train and build an IVF-SQ8 index");
  c_ib->add_option("--pool", ib.pool, "pool file")->required();
  auto* ib_nlist = c_ib->add_option("--nlist", ib.nlist, "number of coarse cells");
  c_ib->add_option("--max-iters", ib.max_iters, "k-means iteration cap");
  c_ib->add_option("--seed", ib.seed, "k-means seed")->required();
  c_ib->add_option("--out", ib.out, "index file to write")->required();
  c_ib->add_option("--preset", ib.preset.name, "named preset (paper-default)");

  // query
  QueryArgs query;
  CLI::App* c_query = app.add_subcommand("query", "top-k search for each query vector");
  c_query->add_option("--index", query.index, "index file");
  c_query->add_option("--pool", query.pool, "pool file (exact mode and rerank)");
  c_query->add_option("--queries", query.queries, "query pool file")->required();
  c_query->add_option("--k", query.k, "results per query")->required();
  auto* query_nprobe = c_query->add_option("--nprobe", query.nprobe, "cells to scan");
  c_query->add_flag("--rerank", query.rerank, "re-score candidates against --pool");
  c_query->add_flag("--exact", query.exact, "exact scan instead of the index");
  c_query->add_option("--preset", query.preset.name, "named preset (paper-default)");

  // select
  SelectArgs sel;
  CLI::App* c_select = app.add_subcommand("select", "select a pre-training subset for a task");
  c_select->add_option("--queries", sel.queries, "task pool file")->required();
  c_select->add_option("--pool", sel.pool, "candidate pool file")->required();
  c_select->add_option("--index", sel.index, "index file");
  c_select->add_flag("--exact", sel.exact, "exact backend instead of the index");
  c_select->add_option("--budget", sel.budget, "selection budget K")->required();
  auto* sel_nprobe = c_select->add_option("--nprobe", sel.nprobe, "cells to scan");
  c_select->add_flag("--rerank", sel.rerank, "re-score candidates against the pool");
  c_select->add_flag("--allow-short", sel.allow_short, "accept fewer than K");
  c_select->add_option("--out", sel.out, "manifest file to write")->required();
  c_select->add_option("--preset", sel.preset.name, "named preset (paper-default)");

  // verify
  std::string verify_manifest_path, verify_queries, verify_pool;
  CLI::App* c_verify = app.add_subcommand("verify", "recompute a manifest and compare");
  c_verify->add_option("--manifest", verify_manifest_path, "manifest file")->required();
  c_verify->add_option("--queries", verify_queries, "task pool file")->required();
  c_verify->add_option("--pool", verify_pool, "candidate pool file")->required();

  // eval-recall
  EvalRecallArgs er;
  CLI::App* c_er = app.add_subcommand("eval-recall", "recall against the exact oracle");
  c_er->add_option("--index", er.index, "index file")->required();
  c_er->add_option("--pool", er.pool, "pool file")->required();
  c_er->add_option("--queries", er.queries, "query pool file")->required();
  c_er->add_option("--k", er.k, "depth of both rankings")->required();
  c_er->add_option("--nprobe", er.nprobe_list, "comma-separated nprobe sweep");
  c_er->add_flag("--rerank", er.rerank, "re-score candidates against the pool");
  c_er->add_option("--preset", er.preset.name, "named preset (paper-default)");

  // eval
  EvalArgs ev;
  CLI::App* c_eval = app.add_subcommand("eval", "discrepancy and downstream-proxy report");
  c_eval->add_option("--pool", ev.pool, "candidate pool file")->required();
  c_eval->add_option("--task", ev.task, "task pool file")->required();
  c_eval->add_option("--task-labels", ev.task_labels, "task labels TSV")->required();
  c_eval->add_option("--test", ev.test, "test pool file")->required();
  c_eval->add_option("--test-labels", ev.test_labels, "test labels TSV")->required();
  c_eval->add_option("--manifest", ev.manifest, "manifest to evaluate");
  c_eval->add_option("--method", ev.method, "baseline-only mode: random");
  c_eval->add_option("--budget", ev.budget, "baseline size for --method random");
  c_eval->add_option("--seeds", ev.seeds, "number of paired runs");
  c_eval->add_option("--seed", ev.seed, "base seed")->required();
  c_eval->add_option("--train-fraction", ev.train_fraction, "domain-classifier train split");
  c_eval->add_option("--epochs", ev.epochs, "domain-classifier epochs");
  c_eval->add_option("--lr", ev.lr, "domain-classifier learning rate");
  c_eval->add_option("--out", ev.out, "report TSV to write")->required();

  // synth
  SynthArgs synth;
  CLI::App* c_synth = app.add_subcommand("synth", "sample a pool from a mixture config");
  c_synth->add_option("--spec", synth.spec, "mixture config (key=value)")->required();
  c_synth->add_option("--n", synth.n, "sample count")->required();
  c_synth->add_option("--seed", synth.seed, "generator seed")->required();
  c_synth->add_option("--id-base", synth.id_base, "first assigned id");
  c_synth->add_option("--out", synth.out, "pool file to write")->required();
  c_synth->add_option("--labels-out", synth.labels_out, "component labels TSV to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR " << static_cast<int>(sept::ErrorCode::usage) << ": " << e.what() << "\n";
    return static_cast<int>(sept::ErrorCode::usage);
  }

  try {
    ingest.seed_set = ingest_seed->count() > 0;
    ib.nlist_set = ib_nlist->count() > 0;
    query.nprobe_set = query_nprobe->count() > 0;
    sel.nprobe_set = sel_nprobe->count() > 0;

    if (c_ingest->parsed()) return cmd_ingest(ingest);
    if (c_info->parsed()) return cmd_info(info_path);
    if (c_ib->parsed()) return cmd_index_build(ib);
    if (c_query->parsed()) return cmd_query(query);
    if (c_select->parsed()) return cmd_select(sel);
    if (c_verify->parsed()) return cmd_verify(verify_manifest_path, verify_queries, verify_pool);
    if (c_er->parsed()) return cmd_eval_recall(er);
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_synth->parsed()) return cmd_synth(synth);
    std::cerr << "ERROR " << static_cast<int>(sept::ErrorCode::usage) << ": no command\n";
    return static_cast<int>(sept::ErrorCode::usage);
  } catch (const sept::Error& e) {
    std::cerr << "ERROR " << static_cast<int>(e.code()) << ": " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ERROR " << static_cast<int>(sept::ErrorCode::internal) << ": " << e.what()
              << "\n";
    return static_cast<int>(sept::ErrorCode::internal);
  }
}
