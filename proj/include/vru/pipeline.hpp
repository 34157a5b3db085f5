#pragma once

// Tri-plane inference: for every slice of every plane a classifier decides
// whether the slice holds a lesion; only gate-open slices are segmented, the
// rest get an all-zero map. Binarized per-plane maps are then fused voxelwise
// by vote.

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "vru/aggregation.hpp"
#include "vru/model.hpp"
#include "vru/volume.hpp"

namespace vru {

// The two slice-level predictors of one plane.
class SliceModels {
 public:
  virtual ~SliceModels() = default;
  virtual Plane plane() const = 0;
  // Lesion probability of a whole slice.
  virtual double classify(const Slice2D<float>& slice) const = 0;
  // Per-pixel lesion probabilities with the slice's own dims.
  virtual Slice2D<float> segment(const Slice2D<float>& slice) const = 0;
  // Throws ShapeError when slices of `dims` do not fit the models.
  virtual void check_dims(const Dims& dims) const { (void)dims; }
};

// Classifier and segmenter networks for one plane. Slices are zero-padded at
// the bottom/right to each model's input size and outputs cropped back.
template <typename T>
class PlaneModelPair final : public SliceModels {
 public:
  PlaneModelPair(Plane plane, ModelParams<T> classifier, ModelParams<T> segmenter);

  Plane plane() const override { return plane_; }
  double classify(const Slice2D<float>& slice) const override;
  Slice2D<float> segment(const Slice2D<float>& slice) const override;
  void check_dims(const Dims& dims) const override;

  const ModelParams<T>& classifier() const { return classifier_; }
  const ModelParams<T>& segmenter() const { return segmenter_; }

 private:
  Plane plane_;
  ModelParams<T> classifier_;
  ModelParams<T> segmenter_;
};

struct PipelineConfig {
  // Gate opens iff classifier probability >= gate_threshold.
  double gate_threshold = 0.5;
  // Segmentation pixel is positive iff probability >= pixel_threshold.
  float pixel_threshold = 0.5f;
  AggregationRule rule{};
  // Combined-classifier mode: a gate-open slice stays positive only with at
  // least this many positive pixels.
  std::size_t min_pixels = 1;
  std::size_t threads = 1;
};

struct SliceOutcome {
  double cls_prob = 0.0;
  bool gate_open = false;
  Slice2D<float> seg;
};

SliceOutcome process_slice(const SliceModels& models, const Slice2D<float>& slice, const PipelineConfig& config);

// Pure decision rule of the combined-classifier mode.
inline bool combine_labels(bool gate_open, std::size_t positive_pixels, std::size_t min_pixels) {
  return gate_open && positive_pixels >= min_pixels;
}

bool act_as_classification(const SliceModels& models, const Slice2D<float>& slice, const PipelineConfig& config);

struct PlaneResult {
  Plane plane = Plane::axial;
  std::vector<double> cls_prob;
  std::vector<std::uint8_t> gate_open;
  std::vector<std::uint8_t> combined_label;
  PlaneStack<float> probabilities;
  PlaneStack<std::uint8_t> votes;
  // No-aggregation baseline: this plane's votes alone, in voxel space.
  Mask3 mask;
  std::size_t segmenter_calls = 0;
  double seconds = 0.0;

  std::size_t gate_open_count() const;
};

struct PipelineResult {
  Dims dims;
  // Indexed by plane: axial, sagittal, coronal.
  std::array<PlaneResult, 3> planes;
  Mask3 aggregated;

  const PlaneResult& plane(Plane p) const { return planes[static_cast<std::size_t>(p)]; }
};

// Runs one plane of an intensity volume that is already normalized.
PlaneResult process_plane(const SliceModels& models, const Volume& normalized, const PipelineConfig& config);

// `models` must hold one entry per plane, in any order. The volume is min-max
// normalized first.
PipelineResult process_volume(std::span<const SliceModels* const> models, const Volume& v,
                              const PipelineConfig& config);

}  // namespace vru
