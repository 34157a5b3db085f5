#pragma once

// Synthetic phantoms: a smooth low-frequency background with ellipsoidal dark
// lesions. The mask is exact ellipsoid membership of voxel centres:
//   sum_a ((p_a - c_a) / r_a)^2 <= 1

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vru/rng.hpp"
#include "vru/volume.hpp"

namespace vru {

struct Ellipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> radii{1.0, 1.0, 1.0};

  bool contains(double x, double y, double z) const;
};

struct SynthSpec {
  std::size_t lesion_count = 1;
  double radius_min = 2.0;
  double radius_max = 4.0;
  // Lesions are darker than the surrounding tissue by this much.
  double lesion_contrast = 0.4;
  double background_amplitude = 0.1;
  std::size_t background_waves = 4;
  double noise_sigma = 0.02;

  void validate() const;
};

// Minimum extent per axis accepted by the generator.
inline constexpr std::size_t kMinSynthDim = 8;

Mask3 ellipsoid_mask(const Dims& dims, std::span<const Ellipsoid> lesions);

// Draws spec.lesion_count ellipsoids fully inside the volume. Throws
// std::invalid_argument when 2 * radius_max + 1 exceeds an axis.
std::vector<Ellipsoid> draw_lesions(Rng& rng, const Dims& dims, const SynthSpec& spec);

Volume synth_volume(std::uint64_t seed, const Dims& dims, std::span<const Ellipsoid> lesions,
                    const SynthSpec& look = {});
Volume synth_volume(std::uint64_t seed, const Dims& dims, const SynthSpec& spec = {});

}  // namespace vru
