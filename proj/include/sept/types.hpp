#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

namespace sept {

using PoolId = std::uint64_t;

// Wire tag values are part of the on-disk formats; do not renumber.
enum class Metric : std::uint8_t {
  cosine = 0,  // inner product over unit vectors, higher is better
  l2 = 1,      // negated squared euclidean distance, higher is better
};

const char* metric_name(Metric m);
Metric metric_from_name(const std::string& name);

}  // namespace sept
