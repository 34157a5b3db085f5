#include "vru/volume.hpp"

#include <algorithm>

namespace vru {

std::string to_string(Plane plane) {
  switch (plane) {
    case Plane::axial: return "axial";
    case Plane::sagittal: return "sagittal";
    case Plane::coronal: return "coronal";
  }
  return "?";
}

Plane parse_plane(const std::string& name) {
  if (name == "axial") return Plane::axial;
  if (name == "sagittal") return Plane::sagittal;
  if (name == "coronal") return Plane::coronal;
  throw std::invalid_argument("unknown plane '" + name + "' (axial, sagittal, coronal)");
}

std::string Dims::str() const {
  return std::to_string(x) + "x" + std::to_string(y) + "x" + std::to_string(z);
}

template <typename T>
Field3<T>::Field3(Dims d, std::vector<T> values) : dims(d), data(std::move(values)) {
  if (data.size() != dims.voxel_count()) {
    throw ShapeError("field of dims " + dims.str() + " needs " + std::to_string(dims.voxel_count()) +
                     " values, got " + std::to_string(data.size()));
  }
}

void Volume::validate() const {
  if (intensity.data.size() != intensity.dims.voxel_count()) {
    throw ShapeError("volume intensity length does not match dims " + intensity.dims.str());
  }
  if (!mask) return;
  if (mask->dims != intensity.dims) {
    throw ShapeError("mask dims " + mask->dims.str() + " != volume dims " + intensity.dims.str());
  }
  if (mask->data.size() != mask->dims.voxel_count()) {
    throw ShapeError("mask length does not match dims " + mask->dims.str());
  }
  for (auto v : mask->data) {
    if (v > 1) throw ShapeError("mask value " + std::to_string(v) + " is not binary");
  }
}

std::size_t slice_count(const Dims& d, Plane plane) {
  switch (plane) {
    case Plane::axial: return d.z;
    case Plane::sagittal: return d.x;
    case Plane::coronal: return d.y;
  }
  return 0;
}

std::pair<std::size_t, std::size_t> slice_shape(const Dims& d, Plane plane) {
  switch (plane) {
    case Plane::axial: return {d.x, d.y};
    case Plane::sagittal: return {d.y, d.z};
    case Plane::coronal: return {d.x, d.z};
  }
  return {0, 0};
}

std::size_t voxel_index(const Dims& d, Plane plane, std::size_t k, std::size_t r, std::size_t c) {
  switch (plane) {
    case Plane::axial: return d.index(r, c, k);
    case Plane::sagittal: return d.index(k, r, c);
    case Plane::coronal: return d.index(r, k, c);
  }
  return 0;
}

template <typename T>
PlaneStack<T> slice_field(const Field3<T>& field, Plane plane) {
  const Dims& d = field.dims;
  if (field.data.size() != d.voxel_count()) throw ShapeError("field length does not match dims");
  const auto [rows, cols] = slice_shape(d, plane);
  PlaneStack<T> stack;
  stack.plane = plane;
  stack.slices.reserve(slice_count(d, plane));
  for (std::size_t k = 0; k < slice_count(d, plane); ++k) {
    Slice2D<T> s(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) s.at(r, c) = field.data[voxel_index(d, plane, k, r, c)];
    }
    stack.slices.push_back(std::move(s));
  }
  return stack;
}

template <typename T>
Field3<T> reassemble(const PlaneStack<T>& stack, const Dims& dims) {
  const auto [rows, cols] = slice_shape(dims, stack.plane);
  if (stack.slices.size() != slice_count(dims, stack.plane)) {
    throw ShapeError(to_string(stack.plane) + " stack has " + std::to_string(stack.slices.size()) +
                     " slices, dims " + dims.str() + " need " +
                     std::to_string(slice_count(dims, stack.plane)));
  }
  Field3<T> out(dims);
  for (std::size_t k = 0; k < stack.slices.size(); ++k) {
    const auto& s = stack.slices[k];
    if (s.rows != rows || s.cols != cols || s.data.size() != rows * cols) {
      throw ShapeError(to_string(stack.plane) + " slice " + std::to_string(k) + " is " +
                       std::to_string(s.rows) + "x" + std::to_string(s.cols) + ", expected " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out.data[voxel_index(dims, stack.plane, k, r, c)] = s.at(r, c);
    }
  }
  return out;
}

PlaneStack<float> slice_volume(const Volume& v, Plane plane) { return slice_field(v.intensity, plane); }

Volume normalize_volume(const Volume& v) {
  Volume out = v;
  auto& data = out.intensity.data;
  if (data.empty()) return out;
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  const float min = *lo;
  const float range = *hi - *lo;
  if (!(range > 0.0f)) {
    std::fill(data.begin(), data.end(), 0.0f);
    return out;
  }
  for (auto& x : data) x = std::clamp((x - min) / range, 0.0f, 1.0f);
  return out;
}

template struct Field3<float>;
template struct Field3<std::uint8_t>;
template PlaneStack<float> slice_field(const Field3<float>&, Plane);
template PlaneStack<std::uint8_t> slice_field(const Field3<std::uint8_t>&, Plane);
template Field3<float> reassemble(const PlaneStack<float>&, const Dims&);
template Field3<std::uint8_t> reassemble(const PlaneStack<std::uint8_t>&, const Dims&);

}  // namespace vru
