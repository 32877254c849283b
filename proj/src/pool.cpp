#include "sept/pool.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "sept/error.hpp"
#include "sept/rng.hpp"

namespace sept {

const char* metric_name(Metric m) {
  return m == Metric::cosine ? "cosine" : "l2";
}

Metric metric_from_name(const std::string& name) {
  if (name == "cosine") return Metric::cosine;
  if (name == "l2") return Metric::l2;
  throw ValidationError("unknown metric '" + name + "' (expected cosine or l2)");
}

namespace {

std::string id_list(const std::vector<PoolId>& ids) {
  std::string s;
  const std::size_t shown = std::min<std::size_t>(ids.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) s += ", ";
    s += std::to_string(ids[i]);
  }
  if (ids.size() > shown) s += ", ... (" + std::to_string(ids.size()) + " total)";
  return s;
}

}  // namespace

void validate_pool(const EmbeddingPool& pool) {
  const Eigen::Index n = pool.count();
  if (static_cast<std::size_t>(n) != pool.ids.size()) {
    throw ValidationError("pool has " + std::to_string(pool.ids.size()) + " ids but " +
                          std::to_string(n) + " vector columns");
  }
  if (n > 0 && pool.dimension() == 0) {
    throw ValidationError("pool vectors have dimension 0");
  }

  {
    std::unordered_set<PoolId> seen;
    seen.reserve(static_cast<std::size_t>(n));
    for (PoolId id : pool.ids) {
      if (!seen.insert(id).second) {
        throw ValidationError("duplicate pool id " + std::to_string(id));
      }
    }
  }

  const Eigen::Index d = pool.dimension();
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    for (Eigen::Index r = 0; r < d; ++r) {
      const float v = pool.vectors(r, i);
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite component in vector for id " +
                              std::to_string(pool.ids[i]));
      }
      norm_sq += static_cast<double>(v) * static_cast<double>(v);
    }
    if (pool.metric == Metric::cosine && std::abs(std::sqrt(norm_sq) - 1.0) > kUnitNormTol) {
      throw ValidationError("cosine pool vector for id " + std::to_string(pool.ids[i]) +
                            " has norm " + std::to_string(std::sqrt(norm_sq)) +
                            ", expected 1 within " + std::to_string(kUnitNormTol));
    }
  }
}

EmbeddingPool normalize(const EmbeddingPool& pool) {
  EmbeddingPool out;
  out.metric = pool.metric;
  out.ids = pool.ids;
  out.vectors.resize(pool.dimension(), pool.count());

  std::vector<PoolId> zero_ids;
  const Eigen::Index d = pool.dimension();
  for (Eigen::Index i = 0; i < pool.count(); ++i) {
    double norm_sq = 0.0;
    for (Eigen::Index r = 0; r < d; ++r) {
      const double v = static_cast<double>(pool.vectors(r, i));
      norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {
      zero_ids.push_back(pool.ids[i]);
      continue;
    }
    for (Eigen::Index r = 0; r < d; ++r) {
      const double scaled = static_cast<double>(pool.vectors(r, i)) / norm;
      const float f = static_cast<float>(scaled);
      if (!std::isfinite(f)) {
        throw ValidationError("normalization overflowed for id " + std::to_string(pool.ids[i]));
      }
      out.vectors(r, i) = f;
    }
  }
  if (!zero_ids.empty()) {
    throw ValidationError("cannot normalize zero vector(s) for id(s): " + id_list(zero_ids));
  }
  return out;
}

std::unordered_map<PoolId, Eigen::Index> build_id_index(const EmbeddingPool& pool) {
  std::unordered_map<PoolId, Eigen::Index> index;
  index.reserve(static_cast<std::size_t>(pool.count()));
  for (Eigen::Index i = 0; i < pool.count(); ++i) {
    if (!index.emplace(pool.ids[static_cast<std::size_t>(i)], i).second) {
      throw ValidationError("duplicate pool id " +
                            std::to_string(pool.ids[static_cast<std::size_t>(i)]));
    }
  }
  return index;
}

EmbeddingPool subset_by_columns(const EmbeddingPool& pool,
                                const std::vector<Eigen::Index>& columns) {
  EmbeddingPool out;
  out.metric = pool.metric;
  out.ids.reserve(columns.size());
  out.vectors.resize(pool.dimension(), static_cast<Eigen::Index>(columns.size()));
  Eigen::Index j = 0;
  for (Eigen::Index c : columns) {
    if (c < 0 || c >= pool.count()) {
      throw ValidationError("column index " + std::to_string(c) + " out of range for pool of " +
                            std::to_string(pool.count()));
    }
    out.ids.push_back(pool.ids[static_cast<std::size_t>(c)]);
    out.vectors.col(j++) = pool.vectors.col(c);
  }
  return out;
}

EmbeddingPool random_subset(const EmbeddingPool& pool, std::uint64_t n, std::uint64_t seed) {
  if (n > static_cast<std::uint64_t>(pool.count())) {
    throw ValidationError("cannot sample " + std::to_string(n) + " vectors from pool of " +
                          std::to_string(pool.count()));
  }
  Rng rng(seed);
  const auto picked =
      rng.sample_without_replacement(static_cast<std::size_t>(pool.count()), static_cast<std::size_t>(n));
  std::vector<Eigen::Index> columns;
  columns.reserve(picked.size());
  for (std::size_t p : picked) columns.push_back(static_cast<Eigen::Index>(p));
  return subset_by_columns(pool, columns);
}

}  // namespace sept
