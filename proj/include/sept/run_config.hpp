#pragma once

#include <string>

#include <Eigen/Core>

#include "sept/error.hpp"

namespace sept {

// Values a named preset pins. Unset fields stay zero and impose nothing.
struct PresetValues {
  Eigen::Index nlist = 0;
  Eigen::Index nprobe = 0;
  Eigen::Index dimension = 0;
};

// "paper-default" pins the production-scale retrieval configuration:
// nlist=16384, nprobe=256, dimension=768. Nothing else.
inline PresetValues preset_values(const std::string& name) {
  if (name == "paper-default") {
    PresetValues v;
    v.nlist = 16384;
    v.nprobe = 256;
    v.dimension = 768;
    return v;
  }
  throw ValidationError("unknown preset '" + name + "'");
}

}  // namespace sept
