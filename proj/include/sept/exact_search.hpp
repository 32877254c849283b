#pragma once

#include <vector>

#include <Eigen/Core>

#include "sept/pool.hpp"
#include "sept/types.hpp"

namespace sept {

struct SearchHit {
  PoolId id = 0;
  float score = 0.0f;
};

struct RankedList {
  PoolId query_id = 0;
  std::vector<SearchHit> hits;  // score descending, id ascending on ties
};

// Strict total order on hits: score descending, id ascending. Pool ids are
// unique, so any comparison-based sort yields the same permutation.
inline bool hit_before(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

// Exact top-k under the pool metric. Scores accumulate in double and are
// rounded once to float. 1 <= k <= pool.count().
RankedList search_exact(const EmbeddingPool& pool, const Eigen::Ref<const Eigen::VectorXf>& query,
                        Eigen::Index k, PoolId query_id = 0);

// One ranked list per query column, in query order.
std::vector<RankedList> search_exact_batch(const EmbeddingPool& pool, const EmbeddingPool& queries,
                                           Eigen::Index k);

}  // namespace sept
