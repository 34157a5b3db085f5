#include "vru/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vru {

namespace {

constexpr double kTwoPi = 6.283185307179586;

void check_dims(const Dims& d) {
  if (d.x < kMinSynthDim || d.y < kMinSynthDim || d.z < kMinSynthDim) {
    throw std::invalid_argument("synth: dims " + d.str() + " below the minimum of " +
                                std::to_string(kMinSynthDim) + " per axis");
  }
}

struct Wave {
  std::array<double, 3> freq;
  double phase;
  double weight;
};

}  // namespace

bool Ellipsoid::contains(double x, double y, double z) const {
  const double a = (x - center[0]) / radii[0];
  const double b = (y - center[1]) / radii[1];
  const double c = (z - center[2]) / radii[2];
  return a * a + b * b + c * c <= 1.0;
}

void SynthSpec::validate() const {
  if (!(radius_min > 0.0) || radius_max < radius_min) {
    throw std::invalid_argument("synth: radius range [" + std::to_string(radius_min) + ", " +
                                std::to_string(radius_max) + "] is invalid");
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("synth: noise sigma must be >= 0");
}

Mask3 ellipsoid_mask(const Dims& dims, std::span<const Ellipsoid> lesions) {
  Mask3 m(dims);
  for (const auto& e : lesions) {
    for (auto r : e.radii) {
      if (!(r > 0.0)) throw std::invalid_argument("synth: ellipsoid radius must be positive");
    }
    // Scan only the bounding box.
    auto lo = [](double c, double r) { return static_cast<long>(std::max(0.0, std::floor(c - r))); };
    auto hi = [](double c, double r, std::size_t n) {
      return static_cast<long>(std::min(static_cast<double>(n) - 1.0, std::ceil(c + r)));
    };
    for (long z = lo(e.center[2], e.radii[2]); z <= hi(e.center[2], e.radii[2], dims.z); ++z) {
      for (long y = lo(e.center[1], e.radii[1]); y <= hi(e.center[1], e.radii[1], dims.y); ++y) {
        for (long x = lo(e.center[0], e.radii[0]); x <= hi(e.center[0], e.radii[0], dims.x); ++x) {
          if (e.contains(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z))) {
            m.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)) = 1;
          }
        }
      }
    }
  }
  return m;
}

std::vector<Ellipsoid> draw_lesions(Rng& rng, const Dims& dims, const SynthSpec& spec) {
  spec.validate();
  const std::array<std::size_t, 3> extent{dims.x, dims.y, dims.z};
  for (std::size_t a = 0; a < 3; ++a) {
    if (spec.lesion_count > 0 && 2.0 * spec.radius_max + 1.0 > static_cast<double>(extent[a])) {
      throw std::invalid_argument("synth: lesion radius " + std::to_string(spec.radius_max) +
                                  " does not fit in volume " + dims.str());
    }
  }
  std::vector<Ellipsoid> out;
  for (std::size_t i = 0; i < spec.lesion_count; ++i) {
    Ellipsoid e;
    for (std::size_t a = 0; a < 3; ++a) e.radii[a] = rng.uniform(spec.radius_min, spec.radius_max);
    for (std::size_t a = 0; a < 3; ++a) {
      const double lo = e.radii[a];
      const double hi = static_cast<double>(extent[a]) - 1.0 - e.radii[a];
      e.center[a] = rng.uniform(lo, hi);
    }
    out.push_back(e);
  }
  return out;
}

Volume synth_volume(std::uint64_t seed, const Dims& dims, std::span<const Ellipsoid> lesions,
                    const SynthSpec& look) {
  check_dims(dims);
  look.validate();
  for (const auto& e : lesions) {
    const std::array<std::size_t, 3> extent{dims.x, dims.y, dims.z};
    for (std::size_t a = 0; a < 3; ++a) {
      if (2.0 * e.radii[a] + 1.0 > static_cast<double>(extent[a])) {
        throw std::invalid_argument("synth: lesion radius " + std::to_string(e.radii[a]) +
                                    " does not fit in volume " + dims.str());
      }
    }
  }
  Rng rng(seed);
  std::vector<Wave> waves;
  for (std::size_t w = 0; w < look.background_waves; ++w) {
    Wave wave;
    for (auto& f : wave.freq) f = rng.uniform(-1.5, 1.5);
    wave.phase = rng.uniform(0.0, kTwoPi);
    wave.weight = rng.uniform(0.5, 1.0);
    waves.push_back(wave);
  }
  const double norm = waves.empty() ? 0.0 : look.background_amplitude / static_cast<double>(waves.size());

  Volume v;
  v.intensity = Field3<float>(dims);
  v.mask = ellipsoid_mask(dims, lesions);
  for (std::size_t z = 0; z < dims.z; ++z) {
    for (std::size_t y = 0; y < dims.y; ++y) {
      for (std::size_t x = 0; x < dims.x; ++x) {
        double value = 0.5;
        for (const auto& w : waves) {
          const double t = w.freq[0] * static_cast<double>(x) / static_cast<double>(dims.x) +
                           w.freq[1] * static_cast<double>(y) / static_cast<double>(dims.y) +
                           w.freq[2] * static_cast<double>(z) / static_cast<double>(dims.z);
          value += norm * w.weight * std::cos(kTwoPi * t + w.phase);
        }
        const std::size_t i = dims.index(x, y, z);
        if (v.mask->data[i]) value -= look.lesion_contrast;
        if (look.noise_sigma > 0.0) value += look.noise_sigma * rng.normal();
        v.intensity.data[i] = static_cast<float>(value);
      }
    }
  }
  return v;
}

Volume synth_volume(std::uint64_t seed, const Dims& dims, const SynthSpec& spec) {
  check_dims(dims);
  // Lesion geometry and texture use separate streams so that changing the
  // lesion count does not shift the background.
  Rng geometry(seed ^ 0x9e3779b97f4a7c15ull);
  const auto lesions = draw_lesions(geometry, dims, spec);
  return synth_volume(seed, dims, lesions, spec);
}

}  // namespace vru
