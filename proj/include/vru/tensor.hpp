#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vru/error.hpp"

namespace vru {

struct Shape4 {
  std::size_t batch = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return batch * height * width * channels; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense batch of 2D feature maps in (batch, height, width, channels) order,
/// channels fastest. A default-constructed tensor is an empty placeholder;
/// every other tensor has all shape components >= 1.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{0});
  Tensor4(Shape4 shape, std::vector<T> values);

  const Shape4& shape() const { return shape_; }
  std::size_t batch() const { return shape_.batch; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t offset(std::size_t n, std::size_t y, std::size_t x, std::size_t c) const {
    return ((n * shape_.height + y) * shape_.width + x) * shape_.channels + c;
  }
  T& operator()(std::size_t n, std::size_t y, std::size_t x, std::size_t c) {
    return data_[offset(n, y, x, c)];
  }
  const T& operator()(std::size_t n, std::size_t y, std::size_t x, std::size_t c) const {
    return data_[offset(n, y, x, c)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  // Same data viewed with a different shape of equal element count.
  Tensor4 reshaped(Shape4 shape) const;
  // One batch element as a 1-batch tensor.
  Tensor4 sample(std::size_t n) const;

  template <typename U>
  Tensor4<U> cast() const {
    return Tensor4<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

void validate_shape(const Shape4& shape);

// Stacks 1-batch tensors of identical per-sample shape into one batch.
template <typename T>
Tensor4<T> stack_samples(std::span<const Tensor4<T>> samples);

extern template class Tensor4<float>;
extern template class Tensor4<double>;

}  // namespace vru
