#pragma once

// Random fixtures, brute-force reference implementations and finite
// differences shared by the unit tests and the acceptance runner. The
// references are written from the definitions (explicit padded buffers,
// gather-form transposed convolution) rather than from the library code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "vru/ops.hpp"
#include "vru/rng.hpp"
#include "vru/tensor.hpp"

namespace vru::testing {

template <typename T>
Tensor4<T> random_tensor(Rng& rng, Shape4 s, double lo = -1.0, double hi = 1.0) {
  Tensor4<T> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Magnitudes in [0.1, 1] with random sign, so nothing sits near a ReLU kink.
template <typename T>
Tensor4<T> away_from_zero(Rng& rng, Shape4 s) {
  Tensor4<T> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double m = rng.uniform(0.1, 1.0);
    t[i] = static_cast<T>(rng.below(2) ? m : -m);
  }
  return t;
}

// Distinct values 0.01 apart in shuffled order; max-pool winners are stable
// under small perturbations.
template <typename T>
Tensor4<T> separated(Rng& rng, Shape4 s) {
  std::vector<std::size_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Tensor4<T> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(0.01 * static_cast<double>(perm[i]));
  return t;
}

template <typename T>
void randomize(Rng& rng, Kernel<T>& k, double scale = 0.5) {
  for (auto& w : k.weights) w = static_cast<T>(rng.uniform(-scale, scale));
  for (auto& b : k.bias) b = static_cast<T>(rng.uniform(-scale, scale));
}

// ---- reference forward ops (double accumulation) ------------------------

struct Pads {
  std::size_t before = 0;
  std::size_t out = 0;
};

inline Pads reference_pads(std::size_t in, std::size_t k, std::size_t s, bool same) {
  if (!same) return {0, in >= k ? (in - k) / s + 1 : 0};
  const std::size_t out = (in + s - 1) / s;
  const long need = static_cast<long>((out - 1) * s + k) - static_cast<long>(in);
  const std::size_t total = need > 0 ? static_cast<std::size_t>(need) : 0;
  return {total / 2, out};
}

// Zero (or `fill`) padded copy as nested vectors [n][y][x][c].
template <typename T>
std::vector<std::vector<std::vector<std::vector<double>>>> padded(const Tensor4<T>& x, std::size_t top,
                                                                  std::size_t left, std::size_t h,
                                                                  std::size_t w, double fill) {
  std::vector<std::vector<std::vector<std::vector<double>>>> p(
      x.batch(), std::vector<std::vector<std::vector<double>>>(
                     h, std::vector<std::vector<double>>(w, std::vector<double>(x.channels(), fill))));
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t i = 0; i < x.height(); ++i) {
      for (std::size_t j = 0; j < x.width(); ++j) {
        for (std::size_t c = 0; c < x.channels(); ++c) p[n][i + top][j + left][c] = static_cast<double>(x(n, i, j, c));
      }
    }
  }
  return p;
}

template <typename T>
Tensor4<double> ref_conv(const Tensor4<T>& x, const Kernel<T>& k, std::size_t s, bool same) {
  const Pads ph = reference_pads(x.height(), k.kh, s, same);
  const Pads pw = reference_pads(x.width(), k.kw, s, same);
  const std::size_t H = (ph.out - 1) * s + k.kh;
  const std::size_t W = (pw.out - 1) * s + k.kw;
  const auto p = padded(x, ph.before, pw.before, std::max(H, x.height() + ph.before),
                        std::max(W, x.width() + pw.before), 0.0);
  Tensor4<double> y({x.batch(), ph.out, pw.out, k.out_channels});
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < ph.out; ++oy) {
      for (std::size_t ox = 0; ox < pw.out; ++ox) {
        for (std::size_t o = 0; o < k.out_channels; ++o) {
          double acc = k.bias.empty() ? 0.0 : static_cast<double>(k.bias[o]);
          for (std::size_t a = 0; a < k.kh; ++a) {
            for (std::size_t b = 0; b < k.kw; ++b) {
              for (std::size_t c = 0; c < k.in_channels; ++c) {
                const double w = static_cast<double>(k.weights[((a * k.kw + b) * k.in_channels + c) * k.out_channels + o]);
                acc += p[n][oy * s + a][ox * s + b][c] * w;
              }
            }
          }
          y(n, oy, ox, o) = acc;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<double> ref_depthwise(const Tensor4<T>& x, const Kernel<T>& k, std::size_t s, bool same) {
  const Pads ph = reference_pads(x.height(), k.kh, s, same);
  const Pads pw = reference_pads(x.width(), k.kw, s, same);
  const std::size_t H = (ph.out - 1) * s + k.kh;
  const std::size_t W = (pw.out - 1) * s + k.kw;
  const auto p = padded(x, ph.before, pw.before, std::max(H, x.height() + ph.before),
                        std::max(W, x.width() + pw.before), 0.0);
  const std::size_t C = x.channels();
  Tensor4<double> y({x.batch(), ph.out, pw.out, C});
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < ph.out; ++oy) {
      for (std::size_t ox = 0; ox < pw.out; ++ox) {
        for (std::size_t c = 0; c < C; ++c) {
          double acc = k.bias.empty() ? 0.0 : static_cast<double>(k.bias[c]);
          for (std::size_t a = 0; a < k.kh; ++a) {
            for (std::size_t b = 0; b < k.kw; ++b) {
              acc += p[n][oy * s + a][ox * s + b][c] * static_cast<double>(k.weights[(a * k.kw + b) * C + c]);
            }
          }
          y(n, oy, ox, c) = acc;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<double> ref_pointwise(const Tensor4<T>& x, const Kernel<T>& k) {
  Tensor4<double> y({x.batch(), x.height(), x.width(), k.out_channels});
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t i = 0; i < x.height(); ++i) {
      for (std::size_t j = 0; j < x.width(); ++j) {
        for (std::size_t o = 0; o < k.out_channels; ++o) {
          double acc = k.bias.empty() ? 0.0 : static_cast<double>(k.bias[o]);
          for (std::size_t c = 0; c < k.in_channels; ++c) {
            acc += static_cast<double>(x(n, i, j, c)) * static_cast<double>(k.weights[c * k.out_channels + o]);
          }
          y(n, i, j, o) = acc;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<double> ref_maxpool(const Tensor4<T>& x, std::size_t window, std::size_t s, bool same) {
  const Pads ph = reference_pads(x.height(), window, s, same);
  const Pads pw = reference_pads(x.width(), window, s, same);
  const double ninf = -std::numeric_limits<double>::infinity();
  const auto p = padded(x, ph.before, pw.before, std::max((ph.out - 1) * s + window, x.height() + ph.before),
                        std::max((pw.out - 1) * s + window, x.width() + pw.before), ninf);
  Tensor4<double> y({x.batch(), ph.out, pw.out, x.channels()});
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < ph.out; ++oy) {
      for (std::size_t ox = 0; ox < pw.out; ++ox) {
        for (std::size_t c = 0; c < x.channels(); ++c) {
          double best = ninf;
          for (std::size_t a = 0; a < window; ++a) {
            for (std::size_t b = 0; b < window; ++b) best = std::max(best, p[n][oy * s + a][ox * s + b][c]);
          }
          y(n, oy, ox, c) = best;
        }
      }
    }
  }
  return y;
}

// Gather form: y[oy, ox, o] = b[o] + sum over (i, a) with i*s + a == oy, etc.
template <typename T>
Tensor4<double> ref_transposed(const Tensor4<T>& x, const Kernel<T>& k, std::size_t s) {
  const std::size_t OH = (x.height() - 1) * s + k.kh;
  const std::size_t OW = (x.width() - 1) * s + k.kw;
  Tensor4<double> y({x.batch(), OH, OW, k.out_channels});
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        for (std::size_t o = 0; o < k.out_channels; ++o) {
          double acc = k.bias.empty() ? 0.0 : static_cast<double>(k.bias[o]);
          for (std::size_t a = 0; a < k.kh; ++a) {
            if (oy < a || (oy - a) % s != 0 || (oy - a) / s >= x.height()) continue;
            for (std::size_t b = 0; b < k.kw; ++b) {
              if (ox < b || (ox - b) % s != 0 || (ox - b) / s >= x.width()) continue;
              for (std::size_t c = 0; c < k.in_channels; ++c) {
                acc += static_cast<double>(x(n, (oy - a) / s, (ox - b) / s, c)) *
                       static_cast<double>(k.weights[((a * k.kw + b) * k.in_channels + c) * k.out_channels + o]);
              }
            }
          }
          y(n, oy, ox, o) = acc;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<double> ref_upsample(const Tensor4<T>& x) {
  Tensor4<double> y({x.batch(), 2 * x.height(), 2 * x.width(), x.channels()});
  for (std::size_t n = 0; n < y.batch(); ++n) {
    for (std::size_t i = 0; i < y.height(); ++i) {
      for (std::size_t j = 0; j < y.width(); ++j) {
        for (std::size_t c = 0; c < y.channels(); ++c) y(n, i, j, c) = static_cast<double>(x(n, i / 2, j / 2, c));
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<double> ref_dense(const Tensor4<T>& x, const Kernel<T>& k) {
  const std::size_t F = x.height() * x.width() * x.channels();
  Tensor4<double> y({x.batch(), 1, 1, k.out_channels});
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t o = 0; o < k.out_channels; ++o) {
      double acc = k.bias.empty() ? 0.0 : static_cast<double>(k.bias[o]);
      for (std::size_t f = 0; f < F; ++f) {
        acc += static_cast<double>(x[n * F + f]) * static_cast<double>(k.weights[f * k.out_channels + o]);
      }
      y(n, 0, 0, o) = acc;
    }
  }
  return y;
}

template <typename T>
Tensor4<double> ref_activation(const Tensor4<T>& x, Activation kind) {
  Tensor4<double> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = static_cast<double>(x[i]);
    y[i] = kind == Activation::relu ? (v > 0.0 ? v : 0.0) : 1.0 / (1.0 + std::exp(-v));
  }
  return y;
}

// max |a - b| / max |b|, or the absolute difference when b is all zeros.
template <typename T>
double max_relative(const Tensor4<T>& a, const Tensor4<double>& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

// ---- finite differences ---------------------------------------------------

// Central differences of f at every coordinate of `values`.
inline std::vector<double> numeric_gradient(std::vector<double>& values, const std::function<double()>& f,
                                            double h = 1e-6) {
  std::vector<double> g(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + h;
    const double up = f();
    values[i] = keep - h;
    const double down = f();
    values[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double norm_relative(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale > 0.0 ? std::sqrt(d) / scale : std::sqrt(d);
}

inline double weighted_sum(const Tensor4<double>& y, const Tensor4<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

}  // namespace vru::testing
