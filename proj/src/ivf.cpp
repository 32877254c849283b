#include "sept/ivf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "sept/binary_io.hpp"
#include "sept/error.hpp"
#include "sept/kernels.hpp"

namespace sept {

std::uint64_t IvfIndex::indexed_count() const {
  std::uint64_t total = 0;
  for (const auto& list : lists) total += list.ids.size();
  return total;
}

IvfIndex ivf_build(const EmbeddingPool& pool, KMeansModel kmeans, Sq8Codec codec) {
  const Eigen::Index d = kmeans.dimension();
  if (codec.dimension() != d) {
    throw ValidationError("codec dimension " + std::to_string(codec.dimension()) +
                          " != centroid dimension " + std::to_string(d));
  }
  if (pool.count() > 0 && pool.dimension() != d) {
    throw ValidationError("pool dimension " + std::to_string(pool.dimension()) +
                          " != centroid dimension " + std::to_string(d));
  }
  if (kmeans.nlist() < 1) throw ValidationError("index needs at least one centroid");

  const Eigen::Index n = pool.count();
  std::vector<Eigen::Index> cell(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    cell[static_cast<std::size_t>(i)] = nearest_centroid(kmeans.centroids, pool.vectors.col(i));
  }

  IvfIndex index;
  index.metric = pool.metric;
  index.dimension = d;
  index.kmeans = std::move(kmeans);
  index.codec = std::move(codec);
  index.lists.resize(static_cast<std::size_t>(index.kmeans.nlist()));

  std::vector<std::size_t> counts(index.lists.size(), 0);
  for (Eigen::Index i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(cell[static_cast<std::size_t>(i)])];
  for (std::size_t c = 0; c < index.lists.size(); ++c) {
    index.lists[c].ids.reserve(counts[c]);
    index.lists[c].codes.reserve(counts[c] * static_cast<std::size_t>(d));
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    InvertedList& list = index.lists[static_cast<std::size_t>(cell[static_cast<std::size_t>(i)])];
    list.ids.push_back(pool.ids[static_cast<std::size_t>(i)]);
    const std::size_t at = list.codes.size();
    list.codes.resize(at + static_cast<std::size_t>(d));
    sq8_encode(index.codec, pool.vectors.col(i), list.codes.data() + at);
  }
  return index;
}

namespace {

struct ProbeCell {
  double dist;
  Eigen::Index cell;
};

// Scores one SQ8 code against the prepared query without materializing the
// decoded vector. Same decode arithmetic as sq8_decode, fused per dimension;
// strict sequential accumulation keeps results thread- and run-stable.
double score_code(Metric metric, const std::vector<double>& query, const std::vector<double>& lo,
                  const std::vector<double>& step, const std::uint8_t* code) {
  const std::size_t d = query.size();
  double acc = 0.0;
  if (metric == Metric::cosine) {
    for (std::size_t r = 0; r < d; ++r) {
      const double dec =
          static_cast<double>(static_cast<float>(lo[r] + static_cast<double>(code[r]) * step[r]));
      acc += query[r] * dec;
    }
  } else {
    for (std::size_t r = 0; r < d; ++r) {
      const double dec =
          static_cast<double>(static_cast<float>(lo[r] + static_cast<double>(code[r]) * step[r]));
      const double diff = query[r] - dec;
      acc -= diff * diff;
    }
  }
  return acc;
}

}  // namespace

RankedList ivf_search(const IvfIndex& index, const Eigen::Ref<const Eigen::VectorXf>& query,
                      const SearchParams& params, const RerankContext* rerank_ctx,
                      PoolId query_id) {
  if (query.size() != index.dimension) {
    throw ValidationError("query dimension " + std::to_string(query.size()) +
                          " != index dimension " + std::to_string(index.dimension));
  }
  if (params.k < 1) throw ValidationError("k must be >= 1");
  if (params.nprobe < 1) throw ValidationError("nprobe must be >= 1");
  if (params.rerank && (rerank_ctx == nullptr || rerank_ctx->pool == nullptr)) {
    throw ValidationError("rerank requested without a pool to re-score against");
  }
  for (Eigen::Index r = 0; r < query.size(); ++r) {
    if (!std::isfinite(query(r))) throw ValidationError("non-finite query component");
  }

  const Eigen::Index nlist = index.nlist();
  const Eigen::Index nprobe = std::min(params.nprobe, nlist);

  // Coarse ranking is always euclidean, independent of the score metric.
  std::vector<ProbeCell> cells(static_cast<std::size_t>(nlist));
  for (Eigen::Index c = 0; c < nlist; ++c) {
    cells[static_cast<std::size_t>(c)] = {l2_sqr_unrolled(query, index.kmeans.centroids.col(c)), c};
  }
  std::partial_sort(cells.begin(), cells.begin() + nprobe, cells.end(),
                    [](const ProbeCell& a, const ProbeCell& b) {
                      if (a.dist != b.dist) return a.dist < b.dist;
                      return a.cell < b.cell;
                    });

  const Eigen::Index d = index.dimension;
  std::vector<double> q(static_cast<std::size_t>(d));
  std::vector<double> lo(static_cast<std::size_t>(d));
  std::vector<double> step(static_cast<std::size_t>(d));
  for (Eigen::Index r = 0; r < d; ++r) {
    q[static_cast<std::size_t>(r)] = static_cast<double>(query(r));
    const double mn = static_cast<double>(index.codec.min_per_dim(r));
    const double range = static_cast<double>(index.codec.max_per_dim(r)) - mn;
    lo[static_cast<std::size_t>(r)] = mn;
    step[static_cast<std::size_t>(r)] = range > 0.0 ? range / 255.0 : 0.0;
  }

  std::vector<SearchHit> hits;
  for (Eigen::Index p = 0; p < nprobe; ++p) {
    const InvertedList& list = index.lists[static_cast<std::size_t>(cells[static_cast<std::size_t>(p)].cell)];
    for (std::size_t e = 0; e < list.ids.size(); ++e) {
      const double score = score_code(index.metric, q, lo, step,
                                      list.codes.data() + e * static_cast<std::size_t>(d));
      hits.push_back({list.ids[e], static_cast<float>(score)});
    }
  }

  RankedList out;
  out.query_id = query_id;
  const std::size_t k = static_cast<std::size_t>(params.k);
  if (!params.rerank) {
    const std::size_t keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      hit_before);
    hits.resize(keep);
    out.hits = std::move(hits);
    return out;
  }

  // Rerank: re-score the 4k best approximate candidates exactly, with the
  // same kernel search_exact uses, then cut to k.
  const std::size_t shortlist = std::min(4 * k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(shortlist), hits.end(),
                    hit_before);
  hits.resize(shortlist);

  const EmbeddingPool& pool = *rerank_ctx->pool;
  if (pool.dimension() != d) {
    throw ValidationError("rerank pool dimension " + std::to_string(pool.dimension()) +
                          " != index dimension " + std::to_string(d));
  }
  for (SearchHit& h : hits) {
    const auto it = rerank_ctx->column_of.find(h.id);
    if (it == rerank_ctx->column_of.end()) {
      throw ValidationError("indexed id " + std::to_string(h.id) + " missing from rerank pool");
    }
    h.score = static_cast<float>(metric_score(index.metric, query, pool.vectors.col(it->second)));
  }
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    hit_before);
  hits.resize(keep);
  out.hits = std::move(hits);
  return out;
}

RankedList ivf_search(const IvfIndex& index, const Eigen::Ref<const Eigen::VectorXf>& query,
                      const SearchParams& params, const EmbeddingPool& pool, PoolId query_id) {
  RerankContext ctx(pool);
  return ivf_search(index, query, params, &ctx, query_id);
}

double ivf_eval_recall(const IvfIndex& index, const EmbeddingPool& queries,
                       const EmbeddingPool& pool, const SearchParams& params) {
  if (queries.count() < 1) throw ValidationError("recall needs at least one query");
  if (params.k < 1 || params.k > pool.count()) {
    throw ValidationError("k = " + std::to_string(params.k) + " out of range [1, " +
                          std::to_string(pool.count()) + "]");
  }
  RerankContext ctx(pool);
  const Eigen::Index nq = queries.count();
  std::vector<double> per_query(static_cast<std::size_t>(nq));
#pragma omp parallel for schedule(static)
  for (Eigen::Index qi = 0; qi < nq; ++qi) {
    const RankedList exact = search_exact(pool, queries.vectors.col(qi), params.k);
    const RankedList approx = ivf_search(index, queries.vectors.col(qi), params, &ctx);
    std::unordered_set<PoolId> truth;
    truth.reserve(exact.hits.size());
    for (const SearchHit& h : exact.hits) truth.insert(h.id);
    std::size_t overlap = 0;
    for (const SearchHit& h : approx.hits) overlap += truth.count(h.id);
    per_query[static_cast<std::size_t>(qi)] =
        static_cast<double>(overlap) / static_cast<double>(params.k);
  }
  double total = 0.0;
  for (double r : per_query) total += r;
  return total / static_cast<double>(nq);
}

std::size_t write_index(const IvfIndex& index, std::ostream& out) {
  if (index.dimension < 1) throw ValidationError("index dimension must be >= 1");
  if (index.nlist() < 1) throw ValidationError("index has no centroids");
  if (static_cast<Eigen::Index>(index.lists.size()) != index.nlist()) {
    throw ValidationError("index has " + std::to_string(index.lists.size()) + " lists but " +
                          std::to_string(index.nlist()) + " centroids");
  }
  if (index.codec.dimension() != index.dimension ||
      index.kmeans.dimension() != index.dimension) {
    throw ValidationError("index component dimensions disagree");
  }

  LeWriter w(out);
  w.bytes(kIndexMagic, 4);
  w.u32(kIndexFormatVersion);
  w.u8(static_cast<std::uint8_t>(index.metric));
  w.u32(static_cast<std::uint32_t>(index.dimension));
  w.u32(static_cast<std::uint32_t>(index.nlist()));
  w.f64(index.kmeans.inertia);
  w.u32(static_cast<std::uint32_t>(index.kmeans.iterations_run));
  w.f32_array(index.kmeans.centroids.data(),
              static_cast<std::size_t>(index.dimension) * static_cast<std::size_t>(index.nlist()));
  w.f32_array(index.codec.min_per_dim.data(), static_cast<std::size_t>(index.dimension));
  w.f32_array(index.codec.max_per_dim.data(), static_cast<std::size_t>(index.dimension));
  for (const InvertedList& list : index.lists) {
    if (list.codes.size() != list.ids.size() * static_cast<std::size_t>(index.dimension)) {
      throw ValidationError("inverted list code bytes do not match id count");
    }
    w.u64(list.ids.size());
    w.u64_array(list.ids.data(), list.ids.size());
    w.bytes(list.codes.data(), list.codes.size());
  }
  return w.written();
}

IvfIndex read_index(std::istream& in, const std::string& what) {
  LeReader r(in, what);

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kIndexMagic, 4) != 0) {
    throw FormatError(what + ": bad magic, not an index file");
  }
  const std::uint32_t version = r.u32();
  if (version != kIndexFormatVersion) {
    throw FormatError(what + ": unsupported index version " + std::to_string(version));
  }
  const std::uint8_t metric_tag = r.u8();
  if (metric_tag > 1) {
    throw FormatError(what + ": unknown metric tag " + std::to_string(metric_tag));
  }
  const std::uint32_t dimension = r.u32();
  const std::uint32_t nlist = r.u32();
  if (dimension == 0) throw FormatError(what + ": dimension 0");
  if (nlist == 0) throw FormatError(what + ": nlist 0");

  IvfIndex index;
  index.metric = static_cast<Metric>(metric_tag);
  index.dimension = static_cast<Eigen::Index>(dimension);
  index.kmeans.inertia = r.f64();
  index.kmeans.iterations_run = static_cast<int>(r.u32());
  index.kmeans.centroids.resize(index.dimension, static_cast<Eigen::Index>(nlist));
  r.f32_array(index.kmeans.centroids.data(), static_cast<std::size_t>(dimension) * nlist);
  index.codec.min_per_dim.resize(index.dimension);
  index.codec.max_per_dim.resize(index.dimension);
  r.f32_array(index.codec.min_per_dim.data(), dimension);
  r.f32_array(index.codec.max_per_dim.data(), dimension);

  index.lists.resize(nlist);
  std::unordered_set<PoolId> seen;
  for (std::uint32_t c = 0; c < nlist; ++c) {
    const std::uint64_t count = r.u64();
    if (count > (std::numeric_limits<std::size_t>::max() / 2) / std::max<std::uint64_t>(dimension, 1)) {
      throw FormatError(what + ": list " + std::to_string(c) + " count " + std::to_string(count) +
                        " too large");
    }
    InvertedList& list = index.lists[c];
    list.ids.resize(count);
    r.u64_array(list.ids.data(), list.ids.size());
    list.codes.resize(count * dimension);
    r.bytes(list.codes.data(), list.codes.size());
    for (PoolId id : list.ids) {
      if (!seen.insert(id).second) {
        throw ValidationError(what + ": id " + std::to_string(id) +
                              " appears in more than one inverted list");
      }
    }
  }
  if (!r.at_end()) {
    throw FormatError(what + ": trailing bytes after inverted lists at byte offset " +
                      std::to_string(r.offset()));
  }
  for (Eigen::Index rr = 0; rr < index.dimension; ++rr) {
    if (!std::isfinite(index.codec.min_per_dim(rr)) || !std::isfinite(index.codec.max_per_dim(rr)) ||
        index.codec.min_per_dim(rr) > index.codec.max_per_dim(rr)) {
      throw ValidationError(what + ": quantizer range invalid at dimension " + std::to_string(rr));
    }
  }
  return index;
}

std::size_t save_index(const IvfIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::size_t n = write_index(index, out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
  return n;
}

IvfIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_index(in, path);
}

}  // namespace sept
