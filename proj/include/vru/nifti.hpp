#pragma once

#include <string>

#include "vru/volume.hpp"

namespace vru {

// Minimal read-only NIfTI-1 support: single-file ("n+1") and header/image
// pairs ("ni1"), either byte order, datatypes uint8, int16 and float32, 3D
// (or 4D with a single frame). scl_slope/scl_inter are applied when the slope
// is nonzero. Compressed files are rejected.
//
// Throws FormatError for malformed headers or truncated data, and
// UnsupportedError for valid files outside that subset.
Volume read_nifti(const std::string& path);

// Voxels with nonzero value become 1.
Mask3 read_nifti_mask(const std::string& path);

}  // namespace vru
