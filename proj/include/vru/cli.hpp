#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vru/volume.hpp"

namespace vru {

// Entry point of the `vru` tool. Exit codes: 0 success, 1 runtime failure,
// 2 usage error. Failures print one "error: ..." line on stderr.
int run_cli(int argc, const char* const* argv);

// "32x32x32" or "32,32,32".
std::optional<Dims> parse_dims(const std::string& text);

// Task names used on the command line and in checkpoint file names.
inline constexpr const char* kClassifyTask = "classify";
inline constexpr const char* kSegmentTask = "segment";

// "<plane>-<task>.ckpt"
std::string checkpoint_name(Plane plane, const std::string& task);

}  // namespace vru
