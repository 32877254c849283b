#include "sept/mixture.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "sept/error.hpp"

namespace sept {

namespace {

void validate_spec(const MixtureSpec& spec) {
  if (spec.dimension() < 1) throw ValidationError("mixture dimension must be >= 1");
  if (spec.components() < 1) throw ValidationError("mixture needs at least one component");
  if (!(spec.stddev > 0.0)) throw ValidationError("mixture stddev must be > 0");
  if (static_cast<Eigen::Index>(spec.weights.size()) != spec.components()) {
    throw ValidationError("mixture has " + std::to_string(spec.weights.size()) +
                          " weights for " + std::to_string(spec.components()) + " components");
  }
  double sum = 0.0;
  for (double w : spec.weights) {
    if (!(w >= 0.0)) throw ValidationError("mixture weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("mixture weights sum to " + std::to_string(sum) + ", expected 1");
  }
  if (!spec.component_means.allFinite()) {
    throw ValidationError("mixture means must be finite");
  }
}

}  // namespace

MixtureSample generate_mixture_pool(const MixtureSpec& spec, std::uint64_t n, PoolId id_base) {
  validate_spec(spec);
  if (n < 1) throw ValidationError("sample count must be >= 1");

  const Eigen::Index d = spec.dimension();
  MixtureSample sample;
  sample.pool.metric = spec.metric;
  sample.pool.ids.reserve(n);
  sample.pool.vectors.resize(d, static_cast<Eigen::Index>(n));
  sample.labels.reserve(n);

  Rng rng(spec.seed);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::int32_t component = static_cast<std::int32_t>(spec.components() - 1);
    double acc = 0.0;
    for (Eigen::Index c = 0; c < spec.components(); ++c) {
      acc += spec.weights[static_cast<std::size_t>(c)];
      if (u < acc) {
        component = static_cast<std::int32_t>(c);
        break;
      }
    }
    const Eigen::Index col = static_cast<Eigen::Index>(i);
    for (Eigen::Index r = 0; r < d; ++r) {
      const double v = static_cast<double>(spec.component_means(r, component)) +
                       spec.stddev * rng.normal();
      sample.pool.vectors(r, col) = static_cast<float>(v);
    }
    sample.pool.ids.push_back(id_base + i);
    sample.labels.push_back(component);
  }

  if (spec.metric == Metric::cosine) {
    sample.pool = normalize(sample.pool);
  }
  return sample;
}

Eigen::MatrixXf random_unit_means(Eigen::Index dimension, Eigen::Index components, Rng& rng) {
  if (dimension < 1 || components < 1) {
    throw ValidationError("random means need dimension >= 1 and components >= 1");
  }
  Eigen::MatrixXf means(dimension, components);
  for (Eigen::Index c = 0; c < components; ++c) {
    double norm_sq = 0.0;
    do {
      for (Eigen::Index r = 0; r < dimension; ++r) {
        const double g = rng.normal();
        means(r, c) = static_cast<float>(g);
        norm_sq += g * g;
      }
    } while (norm_sq == 0.0);
    const double norm = std::sqrt(norm_sq);
    for (Eigen::Index r = 0; r < dimension; ++r) {
      means(r, c) = static_cast<float>(static_cast<double>(means(r, c)) / norm);
    }
  }
  return means;
}

namespace {

double parse_double(const std::string& text, const std::string& what, std::size_t line_no) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno != 0 || !std::isfinite(v)) {
    throw FormatError(what + ":" + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return v;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what,
                                      std::size_t line_no) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item =
        comma == std::string::npos ? text.substr(start) : text.substr(start, comma - start);
    values.push_back(parse_double(item, what, line_no));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

MixtureConfig parse_config_lines(std::istream& in, const std::string& what) {
  MixtureConfig config;
  bool weights_uniform = false;
  std::map<Eigen::Index, std::vector<double>> means;  // ordered by component index
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> seen_keys;

  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) {
      line.pop_back();
    }
    std::size_t begin = 0;
    while (begin < line.size() && (line[begin] == ' ' || line[begin] == '\t')) ++begin;
    line.erase(0, begin);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(what + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (!seen_keys.insert(key).second) {
      throw FormatError(what + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }

    if (key == "dimension") {
      config.dimension = static_cast<Eigen::Index>(parse_double(value, what, line_no));
    } else if (key == "components") {
      config.components = static_cast<Eigen::Index>(parse_double(value, what, line_no));
    } else if (key == "stddev") {
      config.stddev = parse_double(value, what, line_no);
    } else if (key == "metric") {
      try {
        config.metric = metric_from_name(value);
      } catch (const ValidationError& e) {
        throw FormatError(what + ":" + std::to_string(line_no) + ": " + e.what());
      }
    } else if (key == "weights") {
      if (value == "uniform") {
        weights_uniform = true;
      } else {
        config.weights = parse_double_list(value, what, line_no);
      }
    } else if (key.rfind("mean.", 0) == 0) {
      const std::string index_text = key.substr(5);
      char* end = nullptr;
      errno = 0;
      const unsigned long long idx = std::strtoull(index_text.c_str(), &end, 10);
      if (index_text.empty() || end != index_text.c_str() + index_text.size() || errno != 0) {
        throw FormatError(what + ":" + std::to_string(line_no) + ": bad mean index '" +
                          index_text + "'");
      }
      means[static_cast<Eigen::Index>(idx)] = parse_double_list(value, what, line_no);
    } else {
      throw FormatError(what + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }

  if (!means.empty()) {
    if (config.components == 0) config.components = static_cast<Eigen::Index>(means.size());
    if (static_cast<Eigen::Index>(means.size()) != config.components) {
      throw FormatError(what + ": " + std::to_string(means.size()) + " mean lines for " +
                        std::to_string(config.components) + " components");
    }
    Eigen::MatrixXf m(config.dimension, config.components);
    for (Eigen::Index c = 0; c < config.components; ++c) {
      const auto it = means.find(c);
      if (it == means.end()) {
        throw FormatError(what + ": missing mean." + std::to_string(c));
      }
      if (static_cast<Eigen::Index>(it->second.size()) != config.dimension) {
        throw FormatError(what + ": mean." + std::to_string(c) + " has " +
                          std::to_string(it->second.size()) + " values, expected " +
                          std::to_string(config.dimension));
      }
      for (Eigen::Index r = 0; r < config.dimension; ++r) {
        m(r, c) = static_cast<float>(it->second[static_cast<std::size_t>(r)]);
      }
    }
    config.means = std::move(m);
  }

  if (config.dimension < 1) throw FormatError(what + ": missing or invalid dimension");
  if (config.components < 1) throw FormatError(what + ": missing or invalid components");
  if (!(config.stddev > 0.0)) throw FormatError(what + ": missing or invalid stddev");
  if (weights_uniform && !config.weights.empty()) {
    throw FormatError(what + ": weights given as both 'uniform' and a list");
  }
  if (!config.weights.empty() &&
      static_cast<Eigen::Index>(config.weights.size()) != config.components) {
    throw FormatError(what + ": " + std::to_string(config.weights.size()) + " weights for " +
                      std::to_string(config.components) + " components");
  }
  return config;
}

}  // namespace

MixtureConfig parse_mixture_config(std::istream& in, const std::string& what) {
  return parse_config_lines(in, what);
}

MixtureConfig load_mixture_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_mixture_config(in, path);
}

MixtureSpec resolve_mixture_config(const MixtureConfig& config, std::uint64_t seed) {
  MixtureSpec spec;
  spec.metric = config.metric;
  spec.stddev = config.stddev;
  if (config.means) {
    spec.component_means = *config.means;
  } else {
    Rng rng(mix_seed(seed, 0));
    spec.component_means = random_unit_means(config.dimension, config.components, rng);
  }
  if (config.weights.empty()) {
    spec.weights.assign(static_cast<std::size_t>(config.components),
                        1.0 / static_cast<double>(config.components));
  } else {
    spec.weights = config.weights;
  }
  spec.seed = mix_seed(seed, 1);
  validate_spec(spec);
  return spec;
}

}  // namespace sept
