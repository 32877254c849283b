#include "sept/sq8.hpp"

#include <cmath>
#include <string>

#include "sept/error.hpp"

namespace sept {

Sq8Codec fit_sq8(const EmbeddingPool& pool) {
  if (pool.count() == 0) throw ValidationError("cannot fit quantizer on empty pool");
  Sq8Codec codec;
  codec.min_per_dim = pool.vectors.rowwise().minCoeff();
  codec.max_per_dim = pool.vectors.rowwise().maxCoeff();
  return codec;
}

void sq8_encode(const Sq8Codec& codec, const Eigen::Ref<const Eigen::VectorXf>& v,
                std::uint8_t* code) {
  const Eigen::Index d = codec.dimension();
  if (v.size() != d) {
    throw ValidationError("vector dimension " + std::to_string(v.size()) +
                          " != codec dimension " + std::to_string(d));
  }
  for (Eigen::Index r = 0; r < d; ++r) {
    const double lo = static_cast<double>(codec.min_per_dim(r));
    const double range = static_cast<double>(codec.max_per_dim(r)) - lo;
    if (range <= 0.0) {
      code[r] = 0;
      continue;
    }
    double t = (static_cast<double>(v(r)) - lo) / range * 255.0;
    if (t < 0.0) t = 0.0;
    if (t > 255.0) t = 255.0;
    code[r] = static_cast<std::uint8_t>(std::lround(t));
  }
}

void sq8_decode(const Sq8Codec& codec, const std::uint8_t* code, Eigen::Ref<Eigen::VectorXf> out) {
  const Eigen::Index d = codec.dimension();
  if (out.size() != d) {
    throw ValidationError("output dimension " + std::to_string(out.size()) +
                          " != codec dimension " + std::to_string(d));
  }
  for (Eigen::Index r = 0; r < d; ++r) {
    const double lo = static_cast<double>(codec.min_per_dim(r));
    const double range = static_cast<double>(codec.max_per_dim(r)) - lo;
    if (range <= 0.0) {
      out(r) = codec.min_per_dim(r);
      continue;
    }
    out(r) = static_cast<float>(lo + static_cast<double>(code[r]) * range / 255.0);
  }
}

}  // namespace sept
