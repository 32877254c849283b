#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sept/pool.hpp"
#include "sept/rng.hpp"

namespace sept {

// Isotropic Gaussian mixture over embedding space; the desk-scale stand-in
// for a real feature extractor's output distribution.
struct MixtureSpec {
  Eigen::MatrixXf component_means;  // dimension x components
  double stddev = 1.0;              // shared isotropic, > 0
  std::vector<double> weights;      // simplex over components
  std::uint64_t seed = 0;
  Metric metric = Metric::cosine;

  Eigen::Index dimension() const { return component_means.rows(); }
  Eigen::Index components() const { return component_means.cols(); }
};

struct MixtureSample {
  EmbeddingPool pool;
  std::vector<std::int32_t> labels;  // component index per column
};

// Seeded i.i.d. draws; component per sample drawn from the weights, then
// mean + stddev * N(0, I). Cosine samples are unit-normalized. Ids run
// id_base, id_base+1, ...
MixtureSample generate_mixture_pool(const MixtureSpec& spec, std::uint64_t n, PoolId id_base = 0);

// Plain-text key=value mixture description:
//
//   dimension=16
//   components=10
//   stddev=0.15
//   metric=cosine            # optional, default cosine
//   weights=uniform          # optional; or comma list summing to 1
//   mean.0=1,0,0,...         # optional; all components or none
//
// '#' comments and blank lines are ignored. When means are omitted they are
// drawn as random unit vectors at resolve time from the run seed.
struct MixtureConfig {
  Eigen::Index dimension = 0;
  Eigen::Index components = 0;
  double stddev = 0.0;
  Metric metric = Metric::cosine;
  std::vector<double> weights;              // empty -> uniform
  std::optional<Eigen::MatrixXf> means;     // explicit means, dimension x components
};

MixtureConfig parse_mixture_config(std::istream& in, const std::string& what = "mixture config");
MixtureConfig load_mixture_config(const std::string& path);

// Fills in random unit means (when unspecified) and the generator seed, both
// derived from `seed`; validates the result.
MixtureSpec resolve_mixture_config(const MixtureConfig& config, std::uint64_t seed);

// Columns drawn i.i.d. gaussian then unit-normalized.
Eigen::MatrixXf random_unit_means(Eigen::Index dimension, Eigen::Index components, Rng& rng);

}  // namespace sept
