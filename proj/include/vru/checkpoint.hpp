#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vru/model.hpp"

namespace vru {

// Checkpoint byte layout, all integers little-endian:
//
//   offset    size  field
//   0         4     magic "VRUW"
//   4         4     u32 format version (1)
//   8         8     u64 ArchSpec digest (FNV-1a 64 of the spec document)
//   16        4     u32 spec document length L
//   20        L     spec document (ArchSpec::to_text(), UTF-8)
//   20+L      8     u64 parameter count P
//   28+L      4P    f32 parameters in ModelParams::flatten() order
//
// Nothing follows the parameter block.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const ModelParams<T>& model);
template <typename T>
ModelParams<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

template <typename T>
void save_checkpoint(const ModelParams<T>& model, const std::string& path);
template <typename T>
ModelParams<T> load_checkpoint(const std::string& path);

}  // namespace vru
