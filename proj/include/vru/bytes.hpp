#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

namespace vru::bytes {

// Little-endian scalar encoding independent of host byte order.
template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    out.push_back(static_cast<std::uint8_t>((value >> (8 * b)) & 0xffu));
  }
}

template <typename U>
U get_le(const std::uint8_t* p) {
  static_assert(std::is_unsigned_v<U>);
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

template <typename U>
U get_be(const std::uint8_t* p) {
  static_assert(std::is_unsigned_v<U>);
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v = static_cast<U>((v << 8) | p[b]);
  return v;
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_le(out, std::bit_cast<std::uint32_t>(v));
}

inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& data);

}  // namespace vru::bytes
