#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sept/exact_search.hpp"
#include "sept/kmeans.hpp"
#include "sept/pool.hpp"
#include "sept/sq8.hpp"

namespace sept {

struct InvertedList {
  std::vector<PoolId> ids;
  std::vector<std::uint8_t> codes;  // ids.size() * dimension bytes, SQ8

  std::size_t size() const { return ids.size(); }
};

// IVF index with 8-bit scalar-quantized residual-free storage. Coarse
// assignment is always euclidean; result scores follow the pool metric.
struct IvfIndex {
  Metric metric = Metric::cosine;
  Eigen::Index dimension = 0;
  KMeansModel kmeans;
  Sq8Codec codec;
  std::vector<InvertedList> lists;

  Eigen::Index nlist() const { return kmeans.nlist(); }
  std::uint64_t indexed_count() const;
};

struct SearchParams {
  Eigen::Index nprobe = 1;
  Eigen::Index k = 10;
  bool rerank = false;
};

// Index file, little-endian throughout:
//
//   magic      4 bytes "SEPI"
//   version    u32 1
//   metric     u8
//   dimension  u32
//   nlist      u32
//   inertia    f64
//   iterations u32
//   centroids  nlist * dimension * f32
//   codec      dimension * f32 mins, dimension * f32 maxes
//   lists      nlist entries: count u64, count * u64 ids, count * dimension u8 codes
inline constexpr char kIndexMagic[4] = {'S', 'E', 'P', 'I'};
inline constexpr std::uint32_t kIndexFormatVersion = 1;

// Exact candidates re-scored during rerank come from here. Building the id
// map costs one pass over the pool; reuse one context across searches.
struct RerankContext {
  const EmbeddingPool* pool = nullptr;
  std::unordered_map<PoolId, Eigen::Index> column_of;

  explicit RerankContext(const EmbeddingPool& p) : pool(&p), column_of(build_id_index(p)) {}
};

// Every pool vector goes to the inverted list of its euclidean-nearest
// centroid, quantized with `codec`. Pool may be empty (all lists empty).
IvfIndex ivf_build(const EmbeddingPool& pool, KMeansModel kmeans, Sq8Codec codec);

// Scans the nprobe nearest cells, scoring decoded vectors under the index
// metric. With rerank, the 4k best approximate candidates are re-scored
// exactly against `rerank_ctx` (required then), making result scores
// bit-identical to search_exact on the candidate set. Returns at most k hits
// (fewer iff the probed cells hold fewer). nprobe larger than nlist is
// clamped to nlist.
RankedList ivf_search(const IvfIndex& index, const Eigen::Ref<const Eigen::VectorXf>& query,
                      const SearchParams& params, const RerankContext* rerank_ctx = nullptr,
                      PoolId query_id = 0);

// Convenience overload building a one-shot rerank context from `pool`.
RankedList ivf_search(const IvfIndex& index, const Eigen::Ref<const Eigen::VectorXf>& query,
                      const SearchParams& params, const EmbeddingPool& pool, PoolId query_id = 0);

// Mean over queries of |approx top-k ∩ exact top-k| / k, the exact side
// computed with search_exact on `pool`. Requires 1 <= k <= pool.count() and
// at least one query.
double ivf_eval_recall(const IvfIndex& index, const EmbeddingPool& queries,
                       const EmbeddingPool& pool, const SearchParams& params);

std::size_t write_index(const IvfIndex& index, std::ostream& out);
IvfIndex read_index(std::istream& in, const std::string& what = "index stream");
std::size_t save_index(const IvfIndex& index, const std::string& path);
IvfIndex load_index(const std::string& path);

}  // namespace sept
