#include "sept/selector.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sept/error.hpp"

namespace sept {

RankedList ExactBackend::top(const Eigen::Ref<const Eigen::VectorXf>& query, PoolId query_id,
                             Eigen::Index depth) const {
  RankedList out;
  out.query_id = query_id;
  if (pool_.count() == 0) return out;
  return search_exact(pool_, query, std::min(depth, pool_.count()), query_id);
}

IvfBackend::IvfBackend(const IvfIndex& index, Eigen::Index nprobe, bool rerank,
                       const EmbeddingPool* pool)
    : index_(index), nprobe_(nprobe), rerank_(rerank) {
  if (rerank_ && pool == nullptr) {
    throw ValidationError("rerank backend needs the pool to re-score against");
  }
  if (pool != nullptr) ctx_.emplace(*pool);
}

RankedList IvfBackend::top(const Eigen::Ref<const Eigen::VectorXf>& query, PoolId query_id,
                           Eigen::Index depth) const {
  SearchParams params;
  params.nprobe = nprobe_;
  params.k = depth;
  params.rerank = rerank_;
  return ivf_search(index_, query, params, ctx_ ? &*ctx_ : nullptr, query_id);
}

std::string IvfBackend::descriptor() const {
  return "ivf:nlist=" + std::to_string(index_.nlist()) + ",nprobe=" + std::to_string(nprobe_) +
         ",rerank=" + (rerank_ ? std::string("1") : std::string("0"));
}

namespace {

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return std::string(buf, 16);
}

std::string run_descriptor(const EmbeddingPool& queries, const EmbeddingPool& pool,
                           const SearchBackend& backend, SelectionBudget budget,
                           std::size_t excluded) {
  std::ostringstream os;
  os << "backend=" << backend.descriptor() << ";metric=" << metric_name(pool.metric)
     << ";dim=" << pool.dimension() << ";pool=" << pool.count() << ";queries=" << queries.count()
     << ";k=" << budget.k << ";exclude=" << excluded;
  return os.str();
}

}  // namespace

SelectionManifest select(const EmbeddingPool& queries, const EmbeddingPool& pool,
                         const SearchBackend& backend, SelectionBudget budget,
                         const SelectOptions& opts) {
  const std::uint64_t k = budget.k;
  if (k > 0 && queries.count() == 0) {
    throw ValidationError("selection with nonzero budget needs at least one query");
  }
  if (queries.count() > 0 && pool.count() > 0) {
    if (queries.dimension() != pool.dimension()) {
      throw ValidationError("query dimension " + std::to_string(queries.dimension()) +
                            " != pool dimension " + std::to_string(pool.dimension()));
    }
    if (queries.metric != pool.metric) {
      throw ValidationError("query pool metric does not match candidate pool metric");
    }
  }

  std::unordered_set<PoolId> exclude;
  if (opts.exclude) {
    exclude = *opts.exclude;
  } else {
    std::unordered_set<PoolId> pool_ids(pool.ids.begin(), pool.ids.end());
    for (PoolId qid : queries.ids) {
      if (pool_ids.count(qid)) exclude.insert(qid);
    }
  }

  std::uint64_t retrievable = 0;
  for (PoolId id : pool.ids) {
    if (!exclude.count(id)) ++retrievable;
  }
  if (k > retrievable && !opts.allow_short) {
    throw ValidationError("budget " + std::to_string(k) + " exceeds the " +
                          std::to_string(retrievable) + " retrievable pool vectors");
  }

  SelectionManifest manifest;
  manifest.budget = budget;
  manifest.config_digest = fnv1a_hex(run_descriptor(queries, pool, backend, budget, exclude.size()));

  const Eigen::Index nq = queries.count();
  const Eigen::Index cap =
      static_cast<Eigen::Index>(std::min<std::uint64_t>(k, static_cast<std::uint64_t>(pool.count())));
  if (k == 0 || cap == 0) {
    if (k > 0 && !opts.allow_short) {
      throw ValidationError("budget " + std::to_string(k) + " exceeds the 0 retrievable pool vectors");
    }
    return manifest;
  }

  // Ranked lists are pulled lazily: an initial guess of 2 * ceil(k / |Q|)
  // per query, doubled whenever the merge outruns it, never past min(k, n).
  std::vector<RankedList> lists(static_cast<std::size_t>(nq));
  std::vector<Eigen::Index> requested(static_cast<std::size_t>(nq), 0);
  const Eigen::Index init_depth = std::min<Eigen::Index>(
      cap, static_cast<Eigen::Index>(
               std::max<std::uint64_t>(1, 2 * ((k + static_cast<std::uint64_t>(nq) - 1) /
                                               static_cast<std::uint64_t>(nq)))));

  const auto ensure_depth = [&](Eigen::Index qi, Eigen::Index need) {
    const std::size_t s = static_cast<std::size_t>(qi);
    while (static_cast<Eigen::Index>(lists[s].hits.size()) < need) {
      if (requested[s] >= cap) return;                                          // depth cap
      if (requested[s] > 0 &&
          static_cast<Eigen::Index>(lists[s].hits.size()) < requested[s]) {
        return;  // backend ran dry below the requested depth
      }
      Eigen::Index next = requested[s] == 0 ? init_depth : requested[s] * 2;
      next = std::min(cap, std::max(next, need));
      lists[s] = backend.top(queries.vectors.col(qi), queries.ids[s], next);
      requested[s] = next;
    }
  };

  std::unordered_set<PoolId> admitted;
  admitted.reserve(static_cast<std::size_t>(k));
  for (std::uint64_t j = 0; j < k && manifest.entries.size() < k; ++j) {
    bool any_list_this_deep = false;
    for (Eigen::Index qi = 0; qi < nq && manifest.entries.size() < k; ++qi) {
      ensure_depth(qi, static_cast<Eigen::Index>(j) + 1);
      const auto& hits = lists[static_cast<std::size_t>(qi)].hits;
      if (j >= hits.size()) continue;
      any_list_this_deep = true;
      const SearchHit& h = hits[j];
      if (exclude.count(h.id) || admitted.count(h.id)) continue;
      admitted.insert(h.id);
      manifest.entries.push_back({h.id, queries.ids[static_cast<std::size_t>(qi)],
                                  static_cast<std::uint32_t>(j), h.score});
    }
    if (!any_list_this_deep) break;
  }

  if (manifest.entries.size() < k && !opts.allow_short) {
    throw ValidationError("selection found " + std::to_string(manifest.entries.size()) +
                          " of the requested " + std::to_string(k) + " vectors");
  }
  return manifest;
}

bool verify_manifest(const SelectionManifest& manifest, const EmbeddingPool& queries,
                     const EmbeddingPool& pool, const SelectOptions& opts) {
  const auto pool_index = build_id_index(pool);
  std::unordered_set<PoolId> query_ids(queries.ids.begin(), queries.ids.end());
  for (const ManifestEntry& e : manifest.entries) {
    if (!pool_index.count(e.pool_id)) {
      throw ValidationError("manifest references pool id " + std::to_string(e.pool_id) +
                            " absent from the pool");
    }
    if (!query_ids.count(e.source_query_id)) {
      throw ValidationError("manifest references query id " + std::to_string(e.source_query_id) +
                            " absent from the query set");
    }
  }

  SelectOptions redo = opts;
  redo.allow_short = true;
  const ExactBackend backend(pool);
  const SelectionManifest fresh = select(queries, pool, backend, manifest.budget, redo);

  if (fresh.entries.size() != manifest.entries.size()) return false;
  for (std::size_t i = 0; i < fresh.entries.size(); ++i) {
    const ManifestEntry& a = manifest.entries[i];
    const ManifestEntry& b = fresh.entries[i];
    if (a.pool_id != b.pool_id || a.source_query_id != b.source_query_id || a.rank != b.rank ||
        a.score != b.score) {
      return false;
    }
  }
  return true;
}

std::size_t write_manifest(const SelectionManifest& manifest, std::ostream& out) {
  if (manifest.config_digest.size() != 16) {
    throw ValidationError("manifest config digest must be 16 hex characters");
  }
  std::size_t written = 0;
  const auto put = [&](const std::string& line) {
    out << line << '\n';
    if (!out) throw IoError("manifest write failed");
    written += line.size() + 1;
  };
  put("# sept-manifest v1");
  put("# budget " + std::to_string(manifest.budget.k));
  put("# config " + manifest.config_digest);
  char row[128];
  for (const ManifestEntry& e : manifest.entries) {
    std::snprintf(row, sizeof(row), "%" PRIu64 "\t%" PRIu64 "\t%" PRIu32 "\t%.9g", e.pool_id,
                  e.source_query_id, e.rank, static_cast<double>(e.score));
    put(row);
  }
  return written;
}

namespace {

[[noreturn]] void manifest_error(const std::string& what, std::size_t line_no,
                                 const std::string& message) {
  throw FormatError("manifest parse error at " + what + ":" + std::to_string(line_no) + ": " +
                    message);
}

}  // namespace

SelectionManifest read_manifest(std::istream& in, const std::string& what) {
  SelectionManifest manifest;
  std::string line;
  std::size_t line_no = 0;

  const auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  };

  if (!next_line() || line != "# sept-manifest v1") {
    manifest_error(what, 1, "missing '# sept-manifest v1' header");
  }
  if (!next_line() || line.rfind("# budget ", 0) != 0) {
    manifest_error(what, 2, "missing '# budget' header");
  }
  {
    const std::string value = line.substr(9);
    char* end = nullptr;
    errno = 0;
    const unsigned long long k = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size() || errno != 0) {
      manifest_error(what, 2, "bad budget '" + value + "'");
    }
    manifest.budget.k = k;
  }
  if (!next_line() || line.rfind("# config ", 0) != 0) {
    manifest_error(what, 3, "missing '# config' header");
  }
  manifest.config_digest = line.substr(9);
  if (manifest.config_digest.size() != 16 ||
      manifest.config_digest.find_first_not_of("0123456789abcdef") != std::string::npos) {
    manifest_error(what, 3, "config digest must be 16 lowercase hex characters");
  }

  std::unordered_set<PoolId> seen;
  while (next_line()) {
    std::array<std::string, 4> field;
    std::size_t start = 0, f = 0;
    for (; f < 4; ++f) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        field[f] = line.substr(start);
        start = std::string::npos;
        ++f;
        break;
      }
      field[f] = line.substr(start, tab - start);
      start = tab + 1;
    }
    if (f != 4 || start != std::string::npos) {
      manifest_error(what, line_no, "expected 4 tab-separated fields");
    }

    ManifestEntry e;
    char* end = nullptr;
    errno = 0;
    e.pool_id = std::strtoull(field[0].c_str(), &end, 10);
    if (field[0].empty() || end != field[0].c_str() + field[0].size() || errno != 0) {
      manifest_error(what, line_no, "bad pool id '" + field[0] + "'");
    }
    errno = 0;
    e.source_query_id = std::strtoull(field[1].c_str(), &end, 10);
    if (field[1].empty() || end != field[1].c_str() + field[1].size() || errno != 0) {
      manifest_error(what, line_no, "bad query id '" + field[1] + "'");
    }
    errno = 0;
    const unsigned long long rank = std::strtoull(field[2].c_str(), &end, 10);
    if (field[2].empty() || end != field[2].c_str() + field[2].size() || errno != 0 ||
        rank > 0xffffffffull) {
      manifest_error(what, line_no, "bad rank '" + field[2] + "'");
    }
    e.rank = static_cast<std::uint32_t>(rank);
    errno = 0;
    e.score = std::strtof(field[3].c_str(), &end);
    if (field[3].empty() || end != field[3].c_str() + field[3].size() || errno != 0 ||
        !std::isfinite(e.score)) {
      manifest_error(what, line_no, "bad score '" + field[3] + "'");
    }
    if (!seen.insert(e.pool_id).second) {
      throw ValidationError(what + ":" + std::to_string(line_no) + ": pool id " +
                            std::to_string(e.pool_id) + " selected twice");
    }
    manifest.entries.push_back(e);
  }
  if (manifest.entries.size() > manifest.budget.k) {
    throw ValidationError(what + ": manifest holds " + std::to_string(manifest.entries.size()) +
                          " entries, more than its budget " + std::to_string(manifest.budget.k));
  }
  return manifest;
}

std::size_t save_manifest(const SelectionManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::size_t n = write_manifest(manifest, out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
  return n;
}

SelectionManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_manifest(in, path);
}

EmbeddingPool manifest_subset(const SelectionManifest& manifest, const EmbeddingPool& pool) {
  const auto pool_index = build_id_index(pool);
  std::vector<Eigen::Index> columns;
  columns.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    const auto it = pool_index.find(e.pool_id);
    if (it == pool_index.end()) {
      throw ValidationError("manifest references pool id " + std::to_string(e.pool_id) +
                            " absent from the pool");
    }
    columns.push_back(it->second);
  }
  return subset_by_columns(pool, columns);
}

}  // namespace sept
