#include "sept/pool_io.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "sept/binary_io.hpp"
#include "sept/error.hpp"

namespace sept {

std::size_t write_pool(const EmbeddingPool& pool, std::ostream& out) {
  validate_pool(pool);

  LeWriter w(out);
  w.bytes(kPoolMagic, 4);
  w.u32(kPoolFormatVersion);
  w.u8(static_cast<std::uint8_t>(pool.metric));
  w.u32(static_cast<std::uint32_t>(pool.dimension()));
  w.u64(static_cast<std::uint64_t>(pool.count()));
  w.u64_array(pool.ids.data(), pool.ids.size());
  // Column-major dimension x count storage matches the on-disk order exactly:
  // vector i occupies column i, contiguous.
  w.f32_array(pool.vectors.data(),
              static_cast<std::size_t>(pool.dimension()) * static_cast<std::size_t>(pool.count()));
  return w.written();
}

EmbeddingPool read_pool(std::istream& in, const std::string& what) {
  LeReader r(in, what);

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kPoolMagic, 4) != 0) {
    throw FormatError(what + ": bad magic, not a pool file");
  }
  const std::uint32_t version = r.u32();
  if (version != kPoolFormatVersion) {
    throw FormatError(what + ": unsupported pool version " + std::to_string(version));
  }
  const std::uint8_t metric_tag = r.u8();
  if (metric_tag > 1) {
    throw FormatError(what + ": unknown metric tag " + std::to_string(metric_tag));
  }
  const std::uint32_t dimension = r.u32();
  const std::uint64_t count = r.u64();
  if (count > 0 && dimension == 0) {
    throw FormatError(what + ": dimension 0 with nonzero count");
  }
  if (count > static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max()) / std::max(dimension, 1u)) {
    throw FormatError(what + ": count " + std::to_string(count) + " too large");
  }

  EmbeddingPool pool;
  pool.metric = static_cast<Metric>(metric_tag);
  pool.ids.resize(count);
  r.u64_array(pool.ids.data(), pool.ids.size());
  pool.vectors.resize(static_cast<Eigen::Index>(dimension), static_cast<Eigen::Index>(count));
  r.f32_array(pool.vectors.data(), static_cast<std::size_t>(dimension) * count);
  if (!r.at_end()) {
    throw FormatError(what + ": trailing bytes after vector data at byte offset " +
                      std::to_string(r.offset()));
  }

  validate_pool(pool);
  return pool;
}

std::size_t save_pool(const EmbeddingPool& pool, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::size_t n = write_pool(pool, out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
  return n;
}

EmbeddingPool load_pool(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_pool(in, path);
}

}  // namespace sept
