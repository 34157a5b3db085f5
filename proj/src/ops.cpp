#include "vru/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vru {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::standard: return "standard";
    case KernelKind::depthwise: return "depthwise";
    case KernelKind::pointwise: return "pointwise";
  }
  return "?";
}

std::string to_string(PadMode pad) { return pad == PadMode::valid ? "valid" : "same"; }

std::size_t param_count(KernelKind kind, std::size_t kh, std::size_t kw, std::size_t in,
                        std::size_t out, bool with_bias) {
  switch (kind) {
    case KernelKind::standard: return kh * kw * in * out + (with_bias ? out : 0);
    case KernelKind::depthwise: return kh * kw * in + (with_bias ? in : 0);
    case KernelKind::pointwise: return in * out + (with_bias ? out : 0);
  }
  return 0;
}

template <typename T>
Kernel<T> Kernel<T>::standard(std::size_t kh, std::size_t kw, std::size_t in, std::size_t out,
                              bool with_bias) {
  Kernel k;
  k.kind = KernelKind::standard;
  k.kh = kh;
  k.kw = kw;
  k.in_channels = in;
  k.out_channels = out;
  k.weights.assign(kh * kw * in * out, T{0});
  if (with_bias) k.bias.assign(out, T{0});
  return k;
}

template <typename T>
Kernel<T> Kernel<T>::depthwise(std::size_t kh, std::size_t kw, std::size_t channels, bool with_bias) {
  Kernel k;
  k.kind = KernelKind::depthwise;
  k.kh = kh;
  k.kw = kw;
  k.in_channels = channels;
  k.out_channels = channels;
  k.weights.assign(kh * kw * channels, T{0});
  if (with_bias) k.bias.assign(channels, T{0});
  return k;
}

template <typename T>
Kernel<T> Kernel<T>::pointwise(std::size_t in, std::size_t out, bool with_bias) {
  Kernel k;
  k.kind = KernelKind::pointwise;
  k.in_channels = in;
  k.out_channels = out;
  k.weights.assign(in * out, T{0});
  if (with_bias) k.bias.assign(out, T{0});
  return k;
}

template <typename T>
std::size_t Kernel<T>::expected_weight_count() const {
  return param_count(kind, kh, kw, in_channels, out_channels, false);
}

template <typename T>
void Kernel<T>::validate() const {
  if (kh == 0 || kw == 0 || in_channels == 0 || out_channels == 0) {
    throw ShapeError(to_string(kind) + " kernel has a zero dimension");
  }
  if (kind == KernelKind::depthwise && out_channels != in_channels) {
    throw ShapeError("depthwise kernel must have out_channels == in_channels");
  }
  if (kind == KernelKind::pointwise && (kh != 1 || kw != 1)) {
    throw ShapeError("pointwise kernel must be 1x1");
  }
  if (weights.size() != expected_weight_count()) {
    throw ShapeError(to_string(kind) + " kernel expects " + std::to_string(expected_weight_count()) +
                     " weights, has " + std::to_string(weights.size()));
  }
  if (!bias.empty() && bias.size() != out_channels) {
    throw ShapeError(to_string(kind) + " kernel bias length " + std::to_string(bias.size()) +
                     " != out_channels " + std::to_string(out_channels));
  }
}

template <typename T>
Kernel<T> Kernel<T>::zeros_like() const {
  Kernel k = *this;
  std::fill(k.weights.begin(), k.weights.end(), T{0});
  std::fill(k.bias.begin(), k.bias.end(), T{0});
  return k;
}

AxisGeometry axis_geometry(std::size_t in, std::size_t k, std::size_t stride, PadMode pad) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  if (k == 0) throw ShapeError("window must be >= 1");
  if (pad == PadMode::valid) {
    if (in < k) {
      throw ShapeError("window " + std::to_string(k) + " larger than input " + std::to_string(in));
    }
    return {(in - k) / stride + 1, 0};
  }
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t span = (out - 1) * stride + k;
  const std::size_t total = span > in ? span - in : 0;
  return {out, total / 2};
}

namespace {

template <typename T>
void require_kind(const Kernel<T>& k, KernelKind kind, const char* op) {
  k.validate();
  if (k.kind != kind) {
    throw ShapeError(std::string(op) + " needs a " + to_string(kind) + " kernel, got " +
                     to_string(k.kind));
  }
}

template <typename T>
void require_channels(const Tensor4<T>& x, const Kernel<T>& k, const char* op) {
  if (x.empty()) throw ShapeError(std::string(op) + ": empty input tensor");
  if (x.channels() != k.in_channels) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x.channels()) +
                     " channels, kernel expects " + std::to_string(k.in_channels));
  }
}

template <typename T>
void require_shape(const Tensor4<T>& t, const Shape4& expected, const char* what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": shape " + t.shape().str() + ", expected " +
                     expected.str());
  }
}

// Signed input coordinate of window tap `k` for output `o`; negative or >= in
// means padding.
inline std::ptrdiff_t tap(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad) {
  return static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
}

inline bool inside(std::ptrdiff_t i, std::size_t n) {
  return i >= 0 && static_cast<std::size_t>(i) < n;
}

}  // namespace

// ---------------------------------------------------------------------------
// standard convolution

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride, PadMode pad) {
  require_kind(k, KernelKind::standard, "conv2d");
  require_channels(x, k, "conv2d");
  const auto gy = axis_geometry(x.height(), k.kh, stride, pad);
  const auto gx = axis_geometry(x.width(), k.kw, stride, pad);
  const std::size_t cin = k.in_channels;
  const std::size_t cout = k.out_channels;
  Tensor4<T> out({x.batch(), gy.out, gx.out, cout});

  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < gy.out; ++oy) {
      for (std::size_t ox = 0; ox < gx.out; ++ox) {
        T* o = &out(n, oy, ox, 0);
        for (std::size_t co = 0; co < cout; ++co) o[co] = k.has_bias() ? k.bias[co] : T{0};
        for (std::size_t ky = 0; ky < k.kh; ++ky) {
          const auto iy = tap(oy, ky, stride, gy.pad_before);
          if (!inside(iy, x.height())) continue;
          for (std::size_t kx = 0; kx < k.kw; ++kx) {
            const auto ix = tap(ox, kx, stride, gx.pad_before);
            if (!inside(ix, x.width())) continue;
            const T* xp = &x(n, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), 0);
            const T* wp = &k.weights[(ky * k.kw + kx) * cin * cout];
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T xv = xp[ci];
              const T* wr = wp + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wr[co];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGrad<T> conv2d_backward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride,
                            PadMode pad, const Tensor4<T>& grad_out) {
  require_kind(k, KernelKind::standard, "conv2d_backward");
  require_channels(x, k, "conv2d_backward");
  const auto gy = axis_geometry(x.height(), k.kh, stride, pad);
  const auto gx = axis_geometry(x.width(), k.kw, stride, pad);
  const std::size_t cin = k.in_channels;
  const std::size_t cout = k.out_channels;
  require_shape(grad_out, {x.batch(), gy.out, gx.out, cout}, "conv2d_backward grad_out");

  ConvGrad<T> g{Tensor4<T>(x.shape()), k.zeros_like()};
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < gy.out; ++oy) {
      for (std::size_t ox = 0; ox < gx.out; ++ox) {
        const T* go = &grad_out(n, oy, ox, 0);
        if (k.has_bias()) {
          for (std::size_t co = 0; co < cout; ++co) g.kernel.bias[co] += go[co];
        }
        for (std::size_t ky = 0; ky < k.kh; ++ky) {
          const auto iy = tap(oy, ky, stride, gy.pad_before);
          if (!inside(iy, x.height())) continue;
          for (std::size_t kx = 0; kx < k.kw; ++kx) {
            const auto ix = tap(ox, kx, stride, gx.pad_before);
            if (!inside(ix, x.width())) continue;
            const auto uy = static_cast<std::size_t>(iy);
            const auto ux = static_cast<std::size_t>(ix);
            const T* xp = &x(n, uy, ux, 0);
            T* gxp = &g.input(n, uy, ux, 0);
            const std::size_t base = (ky * k.kw + kx) * cin * cout;
            const T* wp = &k.weights[base];
            T* gwp = &g.kernel.weights[base];
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T xv = xp[ci];
              const T* wr = wp + ci * cout;
              T* gwr = gwp + ci * cout;
              T acc{0};
              for (std::size_t co = 0; co < cout; ++co) {
                acc += go[co] * wr[co];
                gwr[co] += xv * go[co];
              }
              gxp[ci] += acc;
            }
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// depthwise convolution

template <typename T>
Tensor4<T> depthwise_forward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride,
                             PadMode pad) {
  require_kind(k, KernelKind::depthwise, "depthwise");
  require_channels(x, k, "depthwise");
  const auto gy = axis_geometry(x.height(), k.kh, stride, pad);
  const auto gx = axis_geometry(x.width(), k.kw, stride, pad);
  const std::size_t c = k.in_channels;
  Tensor4<T> out({x.batch(), gy.out, gx.out, c});

  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < gy.out; ++oy) {
      for (std::size_t ox = 0; ox < gx.out; ++ox) {
        T* o = &out(n, oy, ox, 0);
        for (std::size_t ch = 0; ch < c; ++ch) o[ch] = k.has_bias() ? k.bias[ch] : T{0};
        for (std::size_t ky = 0; ky < k.kh; ++ky) {
          const auto iy = tap(oy, ky, stride, gy.pad_before);
          if (!inside(iy, x.height())) continue;
          for (std::size_t kx = 0; kx < k.kw; ++kx) {
            const auto ix = tap(ox, kx, stride, gx.pad_before);
            if (!inside(ix, x.width())) continue;
            const T* xp = &x(n, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), 0);
            const T* wp = &k.weights[(ky * k.kw + kx) * c];
            for (std::size_t ch = 0; ch < c; ++ch) o[ch] += xp[ch] * wp[ch];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGrad<T> depthwise_backward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride,
                               PadMode pad, const Tensor4<T>& grad_out) {
  require_kind(k, KernelKind::depthwise, "depthwise_backward");
  require_channels(x, k, "depthwise_backward");
  const auto gy = axis_geometry(x.height(), k.kh, stride, pad);
  const auto gx = axis_geometry(x.width(), k.kw, stride, pad);
  const std::size_t c = k.in_channels;
  require_shape(grad_out, {x.batch(), gy.out, gx.out, c}, "depthwise_backward grad_out");

  ConvGrad<T> g{Tensor4<T>(x.shape()), k.zeros_like()};
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < gy.out; ++oy) {
      for (std::size_t ox = 0; ox < gx.out; ++ox) {
        const T* go = &grad_out(n, oy, ox, 0);
        if (k.has_bias()) {
          for (std::size_t ch = 0; ch < c; ++ch) g.kernel.bias[ch] += go[ch];
        }
        for (std::size_t ky = 0; ky < k.kh; ++ky) {
          const auto iy = tap(oy, ky, stride, gy.pad_before);
          if (!inside(iy, x.height())) continue;
          for (std::size_t kx = 0; kx < k.kw; ++kx) {
            const auto ix = tap(ox, kx, stride, gx.pad_before);
            if (!inside(ix, x.width())) continue;
            const auto uy = static_cast<std::size_t>(iy);
            const auto ux = static_cast<std::size_t>(ix);
            const T* xp = &x(n, uy, ux, 0);
            T* gxp = &g.input(n, uy, ux, 0);
            const std::size_t base = (ky * k.kw + kx) * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
              gxp[ch] += go[ch] * k.weights[base + ch];
              g.kernel.weights[base + ch] += xp[ch] * go[ch];
            }
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// pointwise convolution

template <typename T>
Tensor4<T> pointwise_forward(const Tensor4<T>& x, const Kernel<T>& k) {
  require_kind(k, KernelKind::pointwise, "pointwise");
  require_channels(x, k, "pointwise");
  const std::size_t cin = k.in_channels;
  const std::size_t cout = k.out_channels;
  const std::size_t pixels = x.batch() * x.height() * x.width();
  Tensor4<T> out({x.batch(), x.height(), x.width(), cout});
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* xp = x.data() + p * cin;
    T* o = out.data() + p * cout;
    for (std::size_t co = 0; co < cout; ++co) o[co] = k.has_bias() ? k.bias[co] : T{0};
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T xv = xp[ci];
      const T* wr = &k.weights[ci * cout];
      for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wr[co];
    }
  }
  return out;
}

template <typename T>
ConvGrad<T> pointwise_backward(const Tensor4<T>& x, const Kernel<T>& k, const Tensor4<T>& grad_out) {
  require_kind(k, KernelKind::pointwise, "pointwise_backward");
  require_channels(x, k, "pointwise_backward");
  const std::size_t cin = k.in_channels;
  const std::size_t cout = k.out_channels;
  require_shape(grad_out, {x.batch(), x.height(), x.width(), cout}, "pointwise_backward grad_out");
  const std::size_t pixels = x.batch() * x.height() * x.width();

  ConvGrad<T> g{Tensor4<T>(x.shape()), k.zeros_like()};
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* xp = x.data() + p * cin;
    const T* go = grad_out.data() + p * cout;
    T* gxp = g.input.data() + p * cin;
    if (k.has_bias()) {
      for (std::size_t co = 0; co < cout; ++co) g.kernel.bias[co] += go[co];
    }
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T xv = xp[ci];
      const T* wr = &k.weights[ci * cout];
      T* gwr = &g.kernel.weights[ci * cout];
      T acc{0};
      for (std::size_t co = 0; co < cout; ++co) {
        acc += go[co] * wr[co];
        gwr[co] += xv * go[co];
      }
      gxp[ci] = acc;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// separable convolution

template <typename T>
Tensor4<T> separable_forward(const Tensor4<T>& x, const Kernel<T>& dk, const Kernel<T>& pk,
                             std::size_t stride, PadMode pad) {
  return pointwise_forward(depthwise_forward(x, dk, stride, pad), pk);
}

template <typename T>
SeparableGrad<T> separable_backward(const Tensor4<T>& x, const Kernel<T>& dk, const Kernel<T>& pk,
                                    std::size_t stride, PadMode pad, const Tensor4<T>& grad_out) {
  const Tensor4<T> mid = depthwise_forward(x, dk, stride, pad);
  ConvGrad<T> pg = pointwise_backward(mid, pk, grad_out);
  ConvGrad<T> dg = depthwise_backward(x, dk, stride, pad, pg.input);
  return {std::move(dg.input), std::move(dg.kernel), std::move(pg.kernel)};
}

// ---------------------------------------------------------------------------
// max pooling

template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& x, std::size_t window, std::size_t stride,
                              PadMode pad) {
  if (x.empty()) throw ShapeError("maxpool: empty input tensor");
  const auto gy = axis_geometry(x.height(), window, stride, pad);
  const auto gx = axis_geometry(x.width(), window, stride, pad);
  const std::size_t c = x.channels();
  PoolResult<T> r{Tensor4<T>({x.batch(), gy.out, gx.out, c}), {}};
  r.argmax.resize(r.output.size());

  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < gy.out; ++oy) {
      for (std::size_t ox = 0; ox < gx.out; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_at = 0;
          bool found = false;
          for (std::size_t ky = 0; ky < window; ++ky) {
            const auto iy = tap(oy, ky, stride, gy.pad_before);
            if (!inside(iy, x.height())) continue;
            for (std::size_t kx = 0; kx < window; ++kx) {
              const auto ix = tap(ox, kx, stride, gx.pad_before);
              if (!inside(ix, x.width())) continue;
              const std::size_t at =
                  x.offset(n, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ch);
              if (!found || x[at] > best) {
                best = x[at];
                best_at = at;
                found = true;
              }
            }
          }
          const std::size_t o = r.output.offset(n, oy, ox, ch);
          r.output[o] = best;
          r.argmax[o] = best_at;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor4<T> maxpool_backward(const Shape4& input_shape, const std::vector<std::size_t>& argmax,
                            const Tensor4<T>& grad_out) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool_backward: argmax map has " + std::to_string(argmax.size()) +
                     " entries, grad_out has " + std::to_string(grad_out.size()));
  }
  Tensor4<T> gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= gx.size()) throw ShapeError("maxpool_backward: argmax out of range");
    gx[argmax[i]] += grad_out[i];
  }
  return gx;
}

// ---------------------------------------------------------------------------
// transposed convolution

template <typename T>
Tensor4<T> transposed_conv_forward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride) {
  require_kind(k, KernelKind::standard, "transposed_conv");
  require_channels(x, k, "transposed_conv");
  if (stride == 0) throw ShapeError("transposed_conv: stride must be >= 1");
  const std::size_t cin = k.in_channels;
  const std::size_t cout = k.out_channels;
  const std::size_t oh = (x.height() - 1) * stride + k.kh;
  const std::size_t ow = (x.width() - 1) * stride + k.kw;
  Tensor4<T> out({x.batch(), oh, ow, cout});

  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t iy = 0; iy < x.height(); ++iy) {
      for (std::size_t ix = 0; ix < x.width(); ++ix) {
        const T* xp = &x(n, iy, ix, 0);
        for (std::size_t ky = 0; ky < k.kh; ++ky) {
          for (std::size_t kx = 0; kx < k.kw; ++kx) {
            T* o = &out(n, iy * stride + ky, ix * stride + kx, 0);
            const T* wp = &k.weights[(ky * k.kw + kx) * cin * cout];
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T xv = xp[ci];
              const T* wr = wp + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wr[co];
            }
          }
        }
      }
    }
  }
  if (k.has_bias()) {
    for (std::size_t p = 0; p < out.size(); p += cout) {
      for (std::size_t co = 0; co < cout; ++co) out[p + co] += k.bias[co];
    }
  }
  return out;
}

template <typename T>
ConvGrad<T> transposed_conv_backward(const Tensor4<T>& x, const Kernel<T>& k, std::size_t stride,
                                     const Tensor4<T>& grad_out) {
  require_kind(k, KernelKind::standard, "transposed_conv_backward");
  require_channels(x, k, "transposed_conv_backward");
  if (stride == 0) throw ShapeError("transposed_conv_backward: stride must be >= 1");
  const std::size_t cin = k.in_channels;
  const std::size_t cout = k.out_channels;
  const std::size_t oh = (x.height() - 1) * stride + k.kh;
  const std::size_t ow = (x.width() - 1) * stride + k.kw;
  require_shape(grad_out, {x.batch(), oh, ow, cout}, "transposed_conv_backward grad_out");

  ConvGrad<T> g{Tensor4<T>(x.shape()), k.zeros_like()};
  if (k.has_bias()) {
    for (std::size_t p = 0; p < grad_out.size(); p += cout) {
      for (std::size_t co = 0; co < cout; ++co) g.kernel.bias[co] += grad_out[p + co];
    }
  }
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t iy = 0; iy < x.height(); ++iy) {
      for (std::size_t ix = 0; ix < x.width(); ++ix) {
        const T* xp = &x(n, iy, ix, 0);
        T* gxp = &g.input(n, iy, ix, 0);
        for (std::size_t ky = 0; ky < k.kh; ++ky) {
          for (std::size_t kx = 0; kx < k.kw; ++kx) {
            const T* go = &grad_out(n, iy * stride + ky, ix * stride + kx, 0);
            const std::size_t base = (ky * k.kw + kx) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T xv = xp[ci];
              const T* wr = &k.weights[base + ci * cout];
              T* gwr = &g.kernel.weights[base + ci * cout];
              T acc{0};
              for (std::size_t co = 0; co < cout; ++co) {
                acc += go[co] * wr[co];
                gwr[co] += xv * go[co];
              }
              gxp[ci] += acc;
            }
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// nearest-neighbour upsampling

template <typename T>
Tensor4<T> upsample2x_nearest(const Tensor4<T>& x) {
  if (x.empty()) throw ShapeError("upsample2x: empty input tensor");
  const std::size_t c = x.channels();
  Tensor4<T> out({x.batch(), x.height() * 2, x.width() * 2, c});
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t xx = 0; xx < out.width(); ++xx) {
        const T* src = &x(n, y / 2, xx / 2, 0);
        std::copy(src, src + c, &out(n, y, xx, 0));
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> upsample2x_backward(const Tensor4<T>& grad_out) {
  if (grad_out.height() % 2 != 0 || grad_out.width() % 2 != 0) {
    throw ShapeError("upsample2x_backward: grad_out spatial dims must be even, got " +
                     grad_out.shape().str());
  }
  const std::size_t c = grad_out.channels();
  Tensor4<T> gx({grad_out.batch(), grad_out.height() / 2, grad_out.width() / 2, c});
  for (std::size_t n = 0; n < grad_out.batch(); ++n) {
    for (std::size_t y = 0; y < grad_out.height(); ++y) {
      for (std::size_t xx = 0; xx < grad_out.width(); ++xx) {
        const T* src = &grad_out(n, y, xx, 0);
        T* dst = &gx(n, y / 2, xx / 2, 0);
        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// activations

namespace {

template <typename T>
T sigmoid(T v) {
  if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
  const T e = std::exp(v);
  return e / (T{1} + e);
}

}  // namespace

template <typename T>
Tensor4<T> activation(const Tensor4<T>& x, Activation kind) {
  Tensor4<T> out = x;
  for (auto& v : out.storage()) {
    v = kind == Activation::relu ? (v > T{0} ? v : T{0}) : sigmoid(v);
  }
  return out;
}

template <typename T>
Tensor4<T> activation_backward(const Tensor4<T>& x, Activation kind, const Tensor4<T>& grad_out) {
  require_shape(grad_out, x.shape(), "activation_backward grad_out");
  Tensor4<T> gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (kind == Activation::relu) {
      gx[i] = x[i] > T{0} ? grad_out[i] : T{0};
    } else {
      const T s = sigmoid(x[i]);
      gx[i] = grad_out[i] * s * (T{1} - s);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// dense

template <typename T>
Tensor4<T> dense_forward(const Tensor4<T>& x, const Kernel<T>& k) {
  if (x.empty()) throw ShapeError("dense: empty input tensor");
  const std::size_t features = x.height() * x.width() * x.channels();
  if (features != k.in_channels) {
    throw ShapeError("dense: input has " + std::to_string(features) + " features, kernel expects " +
                     std::to_string(k.in_channels));
  }
  return pointwise_forward(x.reshaped({x.batch(), 1, 1, features}), k);
}

template <typename T>
ConvGrad<T> dense_backward(const Tensor4<T>& x, const Kernel<T>& k, const Tensor4<T>& grad_out) {
  if (x.empty()) throw ShapeError("dense_backward: empty input tensor");
  const std::size_t features = x.height() * x.width() * x.channels();
  ConvGrad<T> g = pointwise_backward(x.reshaped({x.batch(), 1, 1, features}), k, grad_out);
  g.input = g.input.reshaped(x.shape());
  return g;
}

template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
  Tensor4<T> out = a;
  add_in_place(out, b);
  return out;
}

template <typename T>
void add_in_place(Tensor4<T>& a, const Tensor4<T>& b) {
  require_shape(b, a.shape(), "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

#define VRU_INSTANTIATE_OPS(T)                                                                  \
  template struct Kernel<T>;                                                                    \
  template Tensor4<T> conv2d_forward(const Tensor4<T>&, const Kernel<T>&, std::size_t, PadMode); \
  template ConvGrad<T> conv2d_backward(const Tensor4<T>&, const Kernel<T>&, std::size_t, PadMode, \
                                       const Tensor4<T>&);                                      \
  template Tensor4<T> depthwise_forward(const Tensor4<T>&, const Kernel<T>&, std::size_t,       \
                                        PadMode);                                               \
  template ConvGrad<T> depthwise_backward(const Tensor4<T>&, const Kernel<T>&, std::size_t,     \
                                          PadMode, const Tensor4<T>&);                          \
  template Tensor4<T> pointwise_forward(const Tensor4<T>&, const Kernel<T>&);                   \
  template ConvGrad<T> pointwise_backward(const Tensor4<T>&, const Kernel<T>&,                  \
                                          const Tensor4<T>&);                                   \
  template Tensor4<T> separable_forward(const Tensor4<T>&, const Kernel<T>&, const Kernel<T>&,  \
                                        std::size_t, PadMode);                                  \
  template SeparableGrad<T> separable_backward(const Tensor4<T>&, const Kernel<T>&,             \
                                               const Kernel<T>&, std::size_t, PadMode,          \
                                               const Tensor4<T>&);                              \
  template PoolResult<T> maxpool_forward(const Tensor4<T>&, std::size_t, std::size_t, PadMode); \
  template Tensor4<T> maxpool_backward(const Shape4&, const std::vector<std::size_t>&,          \
                                       const Tensor4<T>&);                                      \
  template Tensor4<T> transposed_conv_forward(const Tensor4<T>&, const Kernel<T>&, std::size_t); \
  template ConvGrad<T> transposed_conv_backward(const Tensor4<T>&, const Kernel<T>&,            \
                                                std::size_t, const Tensor4<T>&);                \
  template Tensor4<T> upsample2x_nearest(const Tensor4<T>&);                                    \
  template Tensor4<T> upsample2x_backward(const Tensor4<T>&);                                   \
  template Tensor4<T> activation(const Tensor4<T>&, Activation);                                \
  template Tensor4<T> activation_backward(const Tensor4<T>&, Activation, const Tensor4<T>&);    \
  template Tensor4<T> dense_forward(const Tensor4<T>&, const Kernel<T>&);                       \
  template ConvGrad<T> dense_backward(const Tensor4<T>&, const Kernel<T>&, const Tensor4<T>&);  \
  template Tensor4<T> add(const Tensor4<T>&, const Tensor4<T>&);                                \
  template void add_in_place(Tensor4<T>&, const Tensor4<T>&);

VRU_INSTANTIATE_OPS(float)
VRU_INSTANTIATE_OPS(double)

#undef VRU_INSTANTIATE_OPS

}  // namespace vru
