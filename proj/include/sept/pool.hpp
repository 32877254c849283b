#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "sept/types.hpp"

namespace sept {

// Id-addressed collection of fixed-dimension float32 embeddings. Column i of
// `vectors` is the embedding of ids[i]. A cosine pool holds unit vectors.
struct EmbeddingPool {
  Metric metric = Metric::cosine;
  std::vector<PoolId> ids;
  Eigen::MatrixXf vectors;  // dimension x count, one column per id

  Eigen::Index dimension() const { return vectors.rows(); }
  Eigen::Index count() const { return vectors.cols(); }
};

// Tolerance for the cosine unit-norm invariant, |norm - 1| <= kUnitNormTol.
inline constexpr double kUnitNormTol = 1e-5;

// Checks every pool invariant (id/column agreement, unique ids, finite
// values, unit norms for cosine). Throws ValidationError on the first
// violation, naming offending ids.
void validate_pool(const EmbeddingPool& pool);

// Copy of `pool` with every vector scaled to unit L2 norm (computed in
// double, rounded once to float). Idempotent within 1e-7 per component.
// Throws ValidationError listing the ids of zero vectors, if any.
EmbeddingPool normalize(const EmbeddingPool& pool);

// id -> column index. Pool ids must be unique.
std::unordered_map<PoolId, Eigen::Index> build_id_index(const EmbeddingPool& pool);

// Pool assembled from the given columns of `pool`, order preserved.
EmbeddingPool subset_by_columns(const EmbeddingPool& pool, const std::vector<Eigen::Index>& columns);

// Seeded uniform sample of n distinct vectors, in sampled order.
EmbeddingPool random_subset(const EmbeddingPool& pool, std::uint64_t n, std::uint64_t seed);

}  // namespace sept
