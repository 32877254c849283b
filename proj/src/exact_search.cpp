#include "sept/exact_search.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sept/error.hpp"
#include "sept/kernels.hpp"

namespace sept {

RankedList search_exact(const EmbeddingPool& pool, const Eigen::Ref<const Eigen::VectorXf>& query,
                        Eigen::Index k, PoolId query_id) {
  const Eigen::Index n = pool.count();
  if (k < 1 || k > n) {
    throw ValidationError("k = " + std::to_string(k) + " out of range [1, " + std::to_string(n) +
                          "]");
  }
  if (query.size() != pool.dimension()) {
    throw ValidationError("query dimension " + std::to_string(query.size()) +
                          " != pool dimension " + std::to_string(pool.dimension()));
  }
  for (Eigen::Index r = 0; r < query.size(); ++r) {
    if (!std::isfinite(query(r))) throw ValidationError("non-finite query component");
  }

  RankedList out;
  out.query_id = query_id;
  out.hits.resize(static_cast<std::size_t>(n));
  const Metric metric = pool.metric;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    out.hits[static_cast<std::size_t>(i)] = {
        pool.ids[static_cast<std::size_t>(i)],
        static_cast<float>(metric_score(metric, query, pool.vectors.col(i)))};
  }

  std::partial_sort(out.hits.begin(), out.hits.begin() + k, out.hits.end(), hit_before);
  out.hits.resize(static_cast<std::size_t>(k));
  return out;
}

std::vector<RankedList> search_exact_batch(const EmbeddingPool& pool, const EmbeddingPool& queries,
                                           Eigen::Index k) {
  if (queries.dimension() != pool.dimension()) {
    throw ValidationError("query pool dimension " + std::to_string(queries.dimension()) +
                          " != pool dimension " + std::to_string(pool.dimension()));
  }
  if (queries.metric != pool.metric) {
    throw ValidationError("query pool metric does not match pool metric");
  }
  std::vector<RankedList> lists(static_cast<std::size_t>(queries.count()));
  for (Eigen::Index q = 0; q < queries.count(); ++q) {
    lists[static_cast<std::size_t>(q)] =
        search_exact(pool, queries.vectors.col(q), k, queries.ids[static_cast<std::size_t>(q)]);
  }
  return lists;
}

}  // namespace sept
