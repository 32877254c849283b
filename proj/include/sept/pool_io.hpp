#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>

#include "sept/pool.hpp"

namespace sept {

// Pool file, little-endian throughout:
//
//   magic     4 bytes  "SEPT"
//   version   u32      1
//   metric    u8       0 = cosine, 1 = l2
//   dimension u32      > 0
//   count     u64
//   ids       count * u64
//   vectors   count * dimension * f32, in id-array order
//
// 21-byte header, 21 + 8n + 4nd bytes total.
inline constexpr char kPoolMagic[4] = {'S', 'E', 'P', 'T'};
inline constexpr std::uint32_t kPoolFormatVersion = 1;
inline constexpr std::size_t kPoolHeaderBytes = 21;

// Validates, then writes. Returns bytes written.
std::size_t write_pool(const EmbeddingPool& pool, std::ostream& out);

// Reads and validates a pool. FormatError on bad magic/version/truncation
// (with byte offset), ValidationError on invariant violations such as a
// non-unit vector in a cosine pool.
EmbeddingPool read_pool(std::istream& in, const std::string& what = "pool stream");

std::size_t save_pool(const EmbeddingPool& pool, const std::string& path);
EmbeddingPool load_pool(const std::string& path);

}  // namespace sept
