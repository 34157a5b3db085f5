#pragma once

// Layer primitives with hand-derived backward passes.
//
// Layouts (all row-major, last index fastest):
//   activations  Tensor4   (batch, height, width, channels)
//   standard     weights   (kh, kw, in_channels, out_channels)
//   depthwise    weights   (kh, kw, channels)
//   pointwise    weights   (in_channels, out_channels)
// Convolutions are cross-correlations (no kernel flip).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vru/tensor.hpp"

namespace vru {

enum class KernelKind { standard, depthwise, pointwise };
enum class PadMode { valid, same };
enum class Activation { relu, sigmoid };

std::string to_string(KernelKind kind);
std::string to_string(PadMode pad);

template <typename T>
struct Kernel {
  KernelKind kind = KernelKind::standard;
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::vector<T> weights;
  std::vector<T> bias;  // empty when the layer has no bias

  static Kernel standard(std::size_t kh, std::size_t kw, std::size_t in, std::size_t out,
                         bool with_bias = true);
  static Kernel depthwise(std::size_t kh, std::size_t kw, std::size_t channels,
                          bool with_bias = true);
  static Kernel pointwise(std::size_t in, std::size_t out, bool with_bias = true);

  bool has_bias() const { return !bias.empty(); }
  std::size_t expected_weight_count() const;
  // Throws ShapeError when the invariants of `kind` do not hold.
  void validate() const;
  // Zeroed kernel with the same layout.
  Kernel zeros_like() const;

  template <typename U>
  Kernel<U> cast() const {
    Kernel<U> k;
    k.kind = kind;
    k.kh = kh;
    k.kw = kw;
    k.in_channels = in_channels;
    k.out_channels = out_channels;
    k.weights.assign(weights.begin(), weights.end());
    k.bias.assign(bias.begin(), bias.end());
    return k;
  }

  bool operator==(const Kernel&) const = default;
};

// Trainable parameters of k, bias included.
std::size_t param_count(KernelKind kind, std::size_t kh, std::size_t kw, std::size_t in,
                        std::size_t out, bool with_bias);
template <typename T>
std::size_t param_count(const Kernel<T>& k) {
  return param_count(k.kind, k.kh, k.kw, k.in_channels, k.out_channels, k.has_bias());
}

// Output length and leading pad of one spatial axis.
struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};
// valid: out = (in - k) / stride + 1.
// same:  out = ceil(in / stride), total pad = max((out-1)*stride + k - in, 0),
//        split with the smaller half before.
AxisGeometry axis_geometry(std::size_t in, std::size_t k, std::size_t stride, PadMode pad);

template <typename T>
struct ConvGrad {
  Tensor4<T> input;
  Kernel<T> kernel;
};

template <typename T>
struct SeparableGrad {
  Tensor4<T> input;
  Kernel<T> depthwise;
  Kernel<T> pointwise;
};

template <typename T>
struct PoolResult {
  Tensor4<T> output;
  // Flat input offset of the winning element for every output element.
  std::vector<std::size_t> argmax;
};

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride, PadMode pad);
template <typename T>
ConvGrad<T> conv2d_backward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride,
                            PadMode pad, const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> depthwise_forward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride,
                             PadMode pad);
template <typename T>
ConvGrad<T> depthwise_backward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride,
                               PadMode pad, const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> pointwise_forward(const Tensor4<T>& x, const Kernel<T>& k);
template <typename T>
ConvGrad<T> pointwise_backward(const Tensor4<T>& x, const Kernel<T>& k, const Tensor4<T>& grad_out);

// pointwise_forward(depthwise_forward(x, dk, stride, pad), pk).
template <typename T>
Tensor4<T> separable_forward(const Tensor4<T>& x, const Kernel<T>& dk, const Kernel<T>& pk,
                             std::size_t stride, PadMode pad);
template <typename T>
SeparableGrad<T> separable_backward(const Tensor4<T>& x, const Kernel<T>& dk, const Kernel<T>& pk,
                                    std::size_t stride, PadMode pad, const Tensor4<T>& grad_out);

// Same padding fills with -inf; ties go to the first element in row-major
// window order.
template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& x, std::size_t window, std::size_t stride,
                              PadMode pad = PadMode::same);
template <typename T>
Tensor4<T> maxpool_backward(const Shape4& input_shape, const std::vector<std::size_t>& argmax,
                            const Tensor4<T>& grad_out);

// Scatter form: output spatial = (in - 1) * stride + k. Weights are laid out as
// a standard kernel whose in_channels match x.
template <typename T>
Tensor4<T> transposed_conv_forward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride);
template <typename T>
ConvGrad<T> transposed_conv_backward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride,
                                     const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> upsample2x_nearest(const Tensor4<T>& x);
template <typename T>
Tensor4<T> upsample2x_backward(const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> activation(const Tensor4<T>& x, Activation kind);
// Gradient w.r.t. the activation input x. ReLU'(0) is taken as 0.
template <typename T>
Tensor4<T> activation_backward(const Tensor4<T>& x, Activation kind, const Tensor4<T>& grad_out);

// Fully connected layer on the flattened (height, width, channels) features;
// k is a pointwise kernel with in_channels == height*width*channels.
// Output shape is (batch, 1, 1, out_channels).
template <typename T>
Tensor4<T> dense_forward(const Tensor4<T>& x, const Kernel<T>& k);
template <typename T>
ConvGrad<T> dense_backward(const Tensor4<T>& x, const Kernel<T>& k, const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b);
template <typename T>
void add_in_place(Tensor4<T>& a, const Tensor4<T>& b);

}  // namespace vru
