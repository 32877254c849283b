#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "sept/pool.hpp"

namespace sept {

// Per-dimension 8-bit scalar quantizer. Dimension r maps linearly from
// [min(r), max(r)] onto codes 0..255; a degenerate dimension (min == max)
// always encodes to 0 and decodes to min exactly.
struct Sq8Codec {
  Eigen::VectorXf min_per_dim;
  Eigen::VectorXf max_per_dim;

  Eigen::Index dimension() const { return min_per_dim.size(); }
};

// Per-dimension extremes over the pool. Pool must be non-empty.
Sq8Codec fit_sq8(const EmbeddingPool& pool);

// Encodes one vector; code must hold dimension() bytes. Values outside the
// fitted range clamp to the nearest end. Arithmetic runs in double, so for
// any v within range, |decode(encode(v)) - v| <= (max-min)/255/2 plus one
// float rounding.
void sq8_encode(const Sq8Codec& codec, const Eigen::Ref<const Eigen::VectorXf>& v,
                std::uint8_t* code);

// Decodes dimension() bytes into out.
void sq8_decode(const Sq8Codec& codec, const std::uint8_t* code, Eigen::Ref<Eigen::VectorXf> out);

}  // namespace sept
