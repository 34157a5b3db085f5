#include "vru/tensor.hpp"

#include <algorithm>

namespace vru {

std::string Shape4::str() const {
  return std::to_string(batch) + "x" + std::to_string(height) + "x" + std::to_string(width) +
         "x" + std::to_string(channels);
}

void validate_shape(const Shape4& shape) {
  if (shape.batch == 0 || shape.height == 0 || shape.width == 0 || shape.channels == 0) {
    throw ShapeError("tensor shape " + shape.str() + " has a zero component");
  }
}

template <typename T>
Tensor4<T>::Tensor4(Shape4 shape, T fill) : shape_(shape) {
  validate_shape(shape);
  data_.assign(shape.size(), fill);
}

template <typename T>
Tensor4<T>::Tensor4(Shape4 shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
  validate_shape(shape);
  if (data_.size() != shape.size()) {
    throw ShapeError("tensor shape " + shape.str() + " needs " + std::to_string(shape.size()) +
                     " values, got " + std::to_string(data_.size()));
  }
}

template <typename T>
Tensor4<T> Tensor4<T>::reshaped(Shape4 shape) const {
  if (shape.size() != data_.size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor4(shape, data_);
}

template <typename T>
Tensor4<T> Tensor4<T>::sample(std::size_t n) const {
  if (n >= shape_.batch) throw ShapeError("batch index out of range");
  const std::size_t per = shape_.height * shape_.width * shape_.channels;
  std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(n * per),
                     data_.begin() + static_cast<std::ptrdiff_t>((n + 1) * per));
  return Tensor4({1, shape_.height, shape_.width, shape_.channels}, std::move(out));
}

template <typename T>
Tensor4<T> stack_samples(std::span<const Tensor4<T>> samples) {
  if (samples.empty()) throw ShapeError("cannot stack an empty sample list");
  const Shape4 first = samples.front().shape();
  std::vector<T> out;
  out.reserve(first.size() * samples.size());
  for (const auto& s : samples) {
    const Shape4& sh = s.shape();
    if (sh.batch != 1 || sh.height != first.height || sh.width != first.width ||
        sh.channels != first.channels) {
      throw ShapeError("cannot stack sample of shape " + sh.str() + " with " + first.str());
    }
    out.insert(out.end(), s.storage().begin(), s.storage().end());
  }
  return Tensor4<T>({samples.size(), first.height, first.width, first.channels}, std::move(out));
}

template class Tensor4<float>;
template class Tensor4<double>;
template Tensor4<float> stack_samples(std::span<const Tensor4<float>>);
template Tensor4<double> stack_samples(std::span<const Tensor4<double>>);

}  // namespace vru
