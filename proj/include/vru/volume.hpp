#pragma once

// Volumes and their planar decompositions.
//
// Axis convention: X = left-right, Y = anterior-posterior,
// Z = superior-inferior. Voxels are stored X fastest:
//   index(x, y, z) = x + X * (y + Y * z)
//
// Plane stacks (slices are row-major, first listed axis = rows):
//   axial     Z slices of X x Y   slice k = v[:, :, k]
//   sagittal  X slices of Y x Z   slice k = v[k, :, :]
//   coronal   Y slices of X x Z   slice k = v[:, k, :]

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vru/error.hpp"

namespace vru {

enum class Plane { axial, sagittal, coronal };

inline constexpr std::array<Plane, 3> kAllPlanes{Plane::axial, Plane::sagittal, Plane::coronal};

std::string to_string(Plane plane);
Plane parse_plane(const std::string& name);

struct Dims {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t z = 0;

  std::size_t voxel_count() const { return x * y * z; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + x * (j + y * k); }
  std::string str() const;
  bool operator==(const Dims&) const = default;
};

template <typename T>
struct Field3 {
  Dims dims;
  std::vector<T> data;

  Field3() = default;
  explicit Field3(Dims d, T fill = T{}) : dims(d), data(d.voxel_count(), fill) {}
  Field3(Dims d, std::vector<T> values);

  T& at(std::size_t i, std::size_t j, std::size_t k) { return data[dims.index(i, j, k)]; }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const { return data[dims.index(i, j, k)]; }
  bool operator==(const Field3&) const = default;
};

using Mask3 = Field3<std::uint8_t>;

struct Volume {
  Field3<float> intensity;
  std::optional<Mask3> mask;

  const Dims& dims() const { return intensity.dims; }
  // Throws ShapeError when mask dims differ or mask values are not 0/1.
  void validate() const;
  bool operator==(const Volume&) const = default;
};

template <typename T>
struct Slice2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Slice2D() = default;
  Slice2D(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Slice2D&) const = default;
};

template <typename T>
struct PlaneStack {
  Plane plane = Plane::axial;
  std::vector<Slice2D<T>> slices;
  bool operator==(const PlaneStack&) const = default;
};

// Number of slices, and their (rows, cols), for a plane of a volume.
std::size_t slice_count(const Dims& dims, Plane plane);
std::pair<std::size_t, std::size_t> slice_shape(const Dims& dims, Plane plane);
// Volume index of pixel (r, c) of slice k.
std::size_t voxel_index(const Dims& dims, Plane plane, std::size_t k, std::size_t r, std::size_t c);

template <typename T>
PlaneStack<T> slice_field(const Field3<T>& field, Plane plane);

// Inverse of slice_field; throws ShapeError when the stack does not match dims.
template <typename T>
Field3<T> reassemble(const PlaneStack<T>& stack, const Dims& dims);

PlaneStack<float> slice_volume(const Volume& v, Plane plane);

// Min-max normalized copy in [0, 1]; constant volumes become all zeros. The
// mask is carried over unchanged.
Volume normalize_volume(const Volume& v);

}  // namespace vru
