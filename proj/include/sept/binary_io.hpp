#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sept/error.hpp"

namespace sept {

// Little-endian primitives over iostreams. The writer counts bytes so format
// code can report exact file sizes; the reader counts bytes so truncation
// errors carry the offending offset.

namespace detail {

template <class T>
T byteswap_int(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return byteswap_int(v);
}

}  // namespace detail

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed at byte offset " + std::to_string(written_));
    written_ += n;
  }

  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    v = detail::to_le(v);
    bytes(&v, 4);
  }
  void u64(std::uint64_t v) {
    v = detail::to_le(v);
    bytes(&v, 8);
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }

  void f32_array(const float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(data, n * 4);
    } else {
      for (std::size_t i = 0; i < n; ++i) f32(data[i]);
    }
  }
  void u64_array(const std::uint64_t* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(data, n * 8);
    } else {
      for (std::size_t i = 0; i < n; ++i) u64(data[i]);
    }
  }

  std::size_t written() const { return written_; }

 private:
  std::ostream& out_;
  std::size_t written_ = 0;
};

class LeReader {
 public:
  LeReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(what_ + ": truncated, wanted " + std::to_string(n) +
                        " bytes at byte offset " + std::to_string(offset_));
    }
    offset_ += n;
  }

  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return detail::to_le(v);
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return detail::to_le(v);
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  void f32_array(float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(data, n * 4);
    } else {
      for (std::size_t i = 0; i < n; ++i) data[i] = f32();
    }
  }
  void u64_array(std::uint64_t* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(data, n * 8);
    } else {
      for (std::size_t i = 0; i < n; ++i) data[i] = u64();
    }
  }

  // True iff the stream holds no further bytes.
  bool at_end() {
    return in_.peek() == std::char_traits<char>::eof();
  }

  std::uint64_t offset() const { return offset_; }
  const std::string& what() const { return what_; }

 private:
  std::istream& in_;
  std::string what_;
  std::uint64_t offset_ = 0;
};

}  // namespace sept
