#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vru/model.hpp"
#include "vru/training.hpp"
#include "vru/volume.hpp"

namespace vru {

enum class Split { train2d, test2d, test3d };

std::string to_string(Split split);
Split parse_split(const std::string& name);

struct CaseRecord {
  std::string case_id;
  std::string volume_path;
  std::string mask_path;
  Split split = Split::train2d;
  bool operator==(const CaseRecord&) const = default;
};

// Manifest: tab-separated `case_id  volume  mask  split`, one case per line,
// '#' lines are comments. Relative paths are resolved against the manifest's
// directory by read_manifest.
void write_manifest(const std::string& path, std::span<const CaseRecord> records);
std::vector<CaseRecord> read_manifest(const std::string& path);

// Case-level split. round(test3d_ratio * n) cases go to test3d; of the rest,
// round(test2d_ratio * rest) go to test2d and the remainder to train2d.
// Deterministic per seed. Throws on an empty pool or ratios outside (0, 1)
// (test2d_ratio may be 0).
std::vector<Split> split_cases(std::size_t n, double test3d_ratio, std::uint64_t seed,
                               double test2d_ratio = 0.2);

struct SliceEntry {
  std::string case_id;
  Plane plane = Plane::axial;
  std::size_t slice_index = 0;
  bool has_lesion = false;
  bool operator==(const SliceEntry&) const = default;
};

struct SliceDataset {
  std::vector<SliceEntry> entries;
  bool balanced = false;

  std::size_t size() const { return entries.size(); }
  std::size_t lesion_count() const;
  std::size_t normal_count() const { return size() - lesion_count(); }
};

// flags[k] = 1 iff slice k of `plane` has a positive voxel.
std::vector<std::uint8_t> lesion_slice_flags(const Mask3& mask, Plane plane);

void append_slices(SliceDataset& ds, const std::string& case_id, const Mask3& mask, Plane plane);

struct CaseMask {
  std::string case_id;
  Mask3 mask;
};
SliceDataset extract_slices(std::span<const CaseMask> cases, Plane plane);

// Undersamples the majority class to the minority count. Entries keep their
// original order. Throws std::invalid_argument if either class is empty.
SliceDataset balance_for_classification(const SliceDataset& ds, std::uint64_t seed);

struct SliceSplit {
  SliceDataset train;
  SliceDataset test;
};
// Per-class round(test_ratio * class size) entries go to test.
SliceSplit stratified_holdout(const SliceDataset& ds, double test_ratio, std::uint64_t seed);

// Normalized volume with its mask, ready for slicing.
struct LoadedCase {
  std::string case_id;
  Volume volume;
};

// Loads volume and mask, checks dims (ShapeError naming the case) and
// min-max normalizes the intensity.
LoadedCase load_case(const CaseRecord& record);

// Slice padded with zeros at the bottom/right to height x width, as a
// 1 x height x width x 1 tensor.
template <typename T>
Tensor4<T> pad_slice(const Slice2D<float>& s, std::size_t height, std::size_t width);
// Top-left rows x cols window of channel 0 of a 1-batch tensor.
template <typename T>
Slice2D<float> crop_slice(const Tensor4<T>& t, std::size_t rows, std::size_t cols);

// Slice tensors for one plane. Classification sets are balanced per seed;
// segmentation sets hold lesion slices only.
template <typename T>
SampleSet<T> classification_samples(std::span<const LoadedCase> cases, Plane plane, const ArchSpec& spec,
                                    std::uint64_t seed);
template <typename T>
SampleSet<T> segmentation_samples(std::span<const LoadedCase> cases, Plane plane, const ArchSpec& spec);

// Throws ShapeError when a plane's slices do not fit the spec's input.
void check_slice_fit(const Dims& dims, Plane plane, const ArchSpec& spec);

}  // namespace vru
