#pragma once

// Native volume format: a little-endian body file plus a JSON sidecar at
// `<path>.json`:
//
//   {
//     "format": "vru-raw", "version": 1,
//     "dims": [X, Y, Z],
//     "axis_order": "x-fastest",
//     "axes": {"x": "left-right", "y": "anterior-posterior", "z": "superior-inferior"},
//     "endianness": "little",
//     "fields": [{"name": "intensity", "dtype": "float32"},
//                {"name": "mask", "dtype": "uint8"}]
//   }
//
// The body holds the listed fields back to back, each X*Y*Z elements in
// x-fastest order. A volume without a mask lists only "intensity"; a mask file
// lists only "mask".

#include <string>

#include "vru/volume.hpp"

namespace vru {

void write_raw(const Volume& v, const std::string& path);
Volume read_raw(const std::string& path);

void write_mask_raw(const Mask3& mask, const std::string& path);
// Reads the "mask" field of any raw file.
Mask3 read_mask_raw(const std::string& path);

// Dispatch on extension: ".nii", ".hdr" and ".img" go to the NIfTI reader,
// everything else to the raw reader. Volumes are returned as stored.
Volume load_volume(const std::string& path);
Mask3 load_mask(const std::string& path);

}  // namespace vru
