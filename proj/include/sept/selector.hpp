#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "sept/exact_search.hpp"
#include "sept/ivf.hpp"
#include "sept/pool.hpp"

namespace sept {

struct SelectionBudget {
  std::uint64_t k = 0;
};

struct ManifestEntry {
  PoolId pool_id = 0;
  PoolId source_query_id = 0;
  std::uint32_t rank = 0;  // 0-based depth in the source query's ranked list
  float score = 0.0f;
};

struct SelectionManifest {
  std::vector<ManifestEntry> entries;  // admission order
  SelectionBudget budget;              // requested k; entries may be fewer
  std::string config_digest;           // 16 hex chars, fnv1a-64 of the run configuration
};

// Ranked-list provider for the selector: exact scan or IVF.
class SearchBackend {
 public:
  virtual ~SearchBackend() = default;

  // Top `depth` hits for the query; may return fewer when the reachable
  // candidate set is smaller.
  virtual RankedList top(const Eigen::Ref<const Eigen::VectorXf>& query, PoolId query_id,
                         Eigen::Index depth) const = 0;

  // Stable one-line description; feeds the manifest config digest.
  virtual std::string descriptor() const = 0;
};

class ExactBackend final : public SearchBackend {
 public:
  explicit ExactBackend(const EmbeddingPool& pool) : pool_(pool) {}
  RankedList top(const Eigen::Ref<const Eigen::VectorXf>& query, PoolId query_id,
                 Eigen::Index depth) const override;
  std::string descriptor() const override { return "exact"; }

 private:
  const EmbeddingPool& pool_;
};

class IvfBackend final : public SearchBackend {
 public:
  // `pool` is required when reranking; pass nullptr to score from codes only.
  IvfBackend(const IvfIndex& index, Eigen::Index nprobe, bool rerank,
             const EmbeddingPool* pool = nullptr);
  RankedList top(const Eigen::Ref<const Eigen::VectorXf>& query, PoolId query_id,
                 Eigen::Index depth) const override;
  std::string descriptor() const override;

 private:
  const IvfIndex& index_;
  Eigen::Index nprobe_;
  bool rerank_;
  std::optional<RerankContext> ctx_;
};

struct SelectOptions {
  // Pool ids barred from selection. Unset -> the ids occurring in both the
  // query set and the pool (so task samples never select themselves).
  std::optional<std::unordered_set<PoolId>> exclude;
  // Accept a manifest smaller than the budget instead of failing.
  bool allow_short = false;
};

// Breadth-first merge of the per-query ranked lists: depth 0 of every query
// in input order, then depth 1, and so on, admitting unseen ids until the
// budget fills. Ranked lists are pulled lazily (doubling depth) from the
// backend. Deterministic given inputs.
SelectionManifest select(const EmbeddingPool& queries, const EmbeddingPool& pool,
                         const SearchBackend& backend, SelectionBudget budget,
                         const SelectOptions& opts = {});

// Recomputes the selection with an exact backend and compares entry by entry
// (ids, ranks, bit-exact scores). Throws ValidationError when the manifest
// references ids absent from the pool or queries.
bool verify_manifest(const SelectionManifest& manifest, const EmbeddingPool& queries,
                     const EmbeddingPool& pool, const SelectOptions& opts = {});

// Manifest file: two '#' header lines (budget, config digest), then one
// TSV row per entry: pool_id, query_id, rank, score. Scores print with nine
// significant digits, which round-trips float32 exactly.
std::size_t write_manifest(const SelectionManifest& manifest, std::ostream& out);
SelectionManifest read_manifest(std::istream& in, const std::string& what = "manifest stream");
std::size_t save_manifest(const SelectionManifest& manifest, const std::string& path);
SelectionManifest load_manifest(const std::string& path);

// Pool of the selected vectors, in manifest order.
EmbeddingPool manifest_subset(const SelectionManifest& manifest, const EmbeddingPool& pool);

}  // namespace sept
