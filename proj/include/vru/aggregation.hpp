#pragma once

#include <cstddef>
#include <cstdint>

#include "vru/volume.hpp"

namespace vru {

// Per-slice lesion probabilities for one plane, and the threshold that turns
// them into votes.
struct PlanePrediction {
  PlaneStack<float> probabilities;
  float threshold = 0.5f;
};

// Number of planes that must vote lesion for a voxel to be kept; 3 means all
// three planes agree.
struct AggregationRule {
  int vote_threshold = 3;
  void validate() const;
};

// pixel = 1 iff p >= threshold.
PlaneStack<std::uint8_t> binarize(const PlanePrediction& pred);

// Voxel = 1 iff the number of stacks voting 1 at that voxel is at least
// rule.vote_threshold. Each stack is mapped back to voxel space through its
// own plane tag, so argument order does not matter.
Mask3 aggregate_planes(const PlaneStack<std::uint8_t>& a, const PlaneStack<std::uint8_t>& b,
                       const PlaneStack<std::uint8_t>& c, const Dims& dims, AggregationRule rule);

// Single-plane 3D mask (the no-aggregation baseline).
Mask3 per_plane_mask(const PlaneStack<std::uint8_t>& votes, const Dims& dims);

}  // namespace vru
