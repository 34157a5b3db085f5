#include "checks.hpp"

#include <array>
#include <limits>

#include "support.hpp"
#include "vru/aggregation.hpp"
#include "vru/metrics.hpp"
#include "vru/model.hpp"
#include "vru/pipeline.hpp"
#include "vru/training.hpp"

namespace vru::testing {

namespace {

using D = double;

struct Geometry {
  std::size_t batch, height, width, in_c, out_c, kh, kw, stride;
  PadMode pad;
  bool bias;
};

// Random conv geometry whose valid-mode output is non-empty.
Geometry random_geometry(Rng& rng, std::size_t max_k = 3) {
  Geometry g{};
  g.batch = 1 + rng.below(2);
  g.kh = 1 + rng.below(max_k);
  g.kw = 1 + rng.below(max_k);
  g.height = g.kh + rng.below(5);
  g.width = g.kw + rng.below(5);
  g.in_c = 1 + rng.below(3);
  g.out_c = 1 + rng.below(3);
  g.stride = 1 + rng.below(2);
  g.pad = rng.below(2) ? PadMode::same : PadMode::valid;
  g.bias = rng.below(4) != 0;
  return g;
}

// Analytic vs central-difference gradient of L = sum(r * f) over every
// coordinate in `coords`, with `analytic` in the same order.
double compare(std::vector<D*> coords, const std::vector<D>& analytic, const std::function<Tensor4<D>()>& f,
               const Tensor4<D>& r) {
  const double h = 1e-6;
  std::vector<D> numeric(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const D keep = *coords[i];
    *coords[i] = keep + h;
    const D up = weighted_sum(f(), r);
    *coords[i] = keep - h;
    const D down = weighted_sum(f(), r);
    *coords[i] = keep;
    numeric[i] = (up - down) / (2.0 * h);
  }
  return norm_relative(analytic, numeric);
}

void collect(std::vector<D*>& coords, std::vector<D>& analytic, Tensor4<D>& x, const Tensor4<D>& gx) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    coords.push_back(&x[i]);
    analytic.push_back(gx[i]);
  }
}

void collect(std::vector<D*>& coords, std::vector<D>& analytic, Kernel<D>& k, const Kernel<D>& gk) {
  for (std::size_t i = 0; i < k.weights.size(); ++i) {
    coords.push_back(&k.weights[i]);
    analytic.push_back(gk.weights[i]);
  }
  for (std::size_t i = 0; i < k.bias.size(); ++i) {
    coords.push_back(&k.bias[i]);
    analytic.push_back(gk.bias[i]);
  }
}

double check_conv(Rng& rng) {
  const Geometry g = random_geometry(rng);
  auto x = random_tensor<D>(rng, {g.batch, g.height, g.width, g.in_c});
  auto k = Kernel<D>::standard(g.kh, g.kw, g.in_c, g.out_c, g.bias);
  randomize(rng, k);
  auto f = [&] { return conv2d_forward(x, k, g.stride, g.pad); };
  const auto r = random_tensor<D>(rng, f().shape());
  const auto grad = conv2d_backward(x, k, g.stride, g.pad, r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, grad.input);
  collect(c, a, k, grad.kernel);
  return compare(c, a, f, r);
}

double check_depthwise(Rng& rng) {
  const Geometry g = random_geometry(rng);
  auto x = random_tensor<D>(rng, {g.batch, g.height, g.width, g.in_c});
  auto k = Kernel<D>::depthwise(g.kh, g.kw, g.in_c, g.bias);
  randomize(rng, k);
  auto f = [&] { return depthwise_forward(x, k, g.stride, g.pad); };
  const auto r = random_tensor<D>(rng, f().shape());
  const auto grad = depthwise_backward(x, k, g.stride, g.pad, r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, grad.input);
  collect(c, a, k, grad.kernel);
  return compare(c, a, f, r);
}

double check_pointwise(Rng& rng) {
  const Geometry g = random_geometry(rng);
  auto x = random_tensor<D>(rng, {g.batch, g.height, g.width, g.in_c});
  auto k = Kernel<D>::pointwise(g.in_c, g.out_c, g.bias);
  randomize(rng, k);
  auto f = [&] { return pointwise_forward(x, k); };
  const auto r = random_tensor<D>(rng, f().shape());
  const auto grad = pointwise_backward(x, k, r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, grad.input);
  collect(c, a, k, grad.kernel);
  return compare(c, a, f, r);
}

double check_separable(Rng& rng) {
  const Geometry g = random_geometry(rng);
  auto x = random_tensor<D>(rng, {g.batch, g.height, g.width, g.in_c});
  auto dk = Kernel<D>::depthwise(g.kh, g.kw, g.in_c, g.bias);
  auto pk = Kernel<D>::pointwise(g.in_c, g.out_c, g.bias);
  randomize(rng, dk);
  randomize(rng, pk);
  auto f = [&] { return separable_forward(x, dk, pk, g.stride, g.pad); };
  const auto r = random_tensor<D>(rng, f().shape());
  const auto grad = separable_backward(x, dk, pk, g.stride, g.pad, r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, grad.input);
  collect(c, a, dk, grad.depthwise);
  collect(c, a, pk, grad.pointwise);
  return compare(c, a, f, r);
}

double check_maxpool(Rng& rng) {
  const std::size_t window = 2 + rng.below(2);
  const std::size_t stride = 1 + rng.below(3);
  const PadMode pad = rng.below(2) ? PadMode::same : PadMode::valid;
  auto x = separated<D>(rng, {1 + rng.below(2), window + rng.below(5), window + rng.below(5), 1 + rng.below(3)});
  auto f = [&] { return maxpool_forward(x, window, stride, pad).output; };
  const auto pr = maxpool_forward(x, window, stride, pad);
  const auto r = random_tensor<D>(rng, pr.output.shape());
  const auto gx = maxpool_backward(x.shape(), pr.argmax, r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, gx);
  return compare(c, a, f, r);
}

double check_transposed(Rng& rng) {
  const Geometry g = random_geometry(rng);
  auto x = random_tensor<D>(rng, {g.batch, 1 + rng.below(4), 1 + rng.below(4), g.in_c});
  auto k = Kernel<D>::standard(g.kh, g.kw, g.in_c, g.out_c, g.bias);
  randomize(rng, k);
  auto f = [&] { return transposed_conv_forward(x, k, g.stride); };
  const auto r = random_tensor<D>(rng, f().shape());
  const auto grad = transposed_conv_backward(x, k, g.stride, r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, grad.input);
  collect(c, a, k, grad.kernel);
  return compare(c, a, f, r);
}

double check_activation(Rng& rng, Activation kind) {
  const Shape4 s{1 + rng.below(2), 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(3)};
  auto x = kind == Activation::relu ? away_from_zero<D>(rng, s) : random_tensor<D>(rng, s, -4.0, 4.0);
  auto f = [&] { return activation(x, kind); };
  const auto r = random_tensor<D>(rng, s);
  const auto gx = activation_backward(x, kind, r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, gx);
  return compare(c, a, f, r);
}

double check_dense(Rng& rng) {
  const Shape4 s{1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3)};
  auto x = random_tensor<D>(rng, s);
  auto k = Kernel<D>::pointwise(s.height * s.width * s.channels, 1 + rng.below(4), rng.below(4) != 0);
  randomize(rng, k);
  auto f = [&] { return dense_forward(x, k); };
  const auto r = random_tensor<D>(rng, f().shape());
  const auto grad = dense_backward(x, k, r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, grad.input);
  collect(c, a, k, grad.kernel);
  return compare(c, a, f, r);
}

double check_upsample(Rng& rng) {
  const Shape4 s{1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(3)};
  auto x = random_tensor<D>(rng, s);
  auto f = [&] { return upsample2x_nearest(x); };
  const auto r = random_tensor<D>(rng, f().shape());
  const auto gx = upsample2x_backward(r);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, x, gx);
  return compare(c, a, f, r);
}

// Loss is a scalar, so r = 1 on a 1-element "output".
double check_bce(Rng& rng) {
  const Shape4 s{1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(4), 1};
  auto p = random_tensor<D>(rng, s, 0.05, 0.95);
  Tensor4<D> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.below(3) == 0 ? rng.uniform() : static_cast<D>(rng.below(2));
  auto f = [&] { return Tensor4<D>({1, 1, 1, 1}, bce_loss(p, t)); };
  const Tensor4<D> one({1, 1, 1, 1}, 1.0);
  const auto gp = bce_grad(p, t);
  std::vector<D*> c;
  std::vector<D> a;
  collect(c, a, p, gp);
  return compare(c, a, f, one);
}

ArchSpec tiny_spec(Rng& rng, ModelKind kind) {
  ArchSpec s = kind == ModelKind::classifier ? ArchSpec::classifier_defaults(8, 8) : ArchSpec::segmenter_defaults(8, 8);
  s.stage_channels = {2, 3};
  s.dense_units = 4;
  s.blocks_per_stage = 1;
  s.use_depthwise = rng.below(2) != 0;
  s.use_separable = rng.below(2) != 0;
  s.decoder_residual = rng.below(2) != 0;
  if (kind == ModelKind::classifier) {
    s.input_height = 5 + rng.below(4);
    s.input_width = 5 + rng.below(4);
  }
  return s;
}

// Distance of the traced forward pass from the nearest ReLU or max-pool
// switch. Ties between zeros from dead ReLUs stay tied under small
// perturbations and are skipped.
double kink_margin(const ModelParams<D>& m, const Trace<D>& tr) {
  double margin = std::numeric_limits<double>::infinity();
  for (const Node& node : m.graph) {
    if (node.lhs < 0) continue;
    const Tensor4<D>& in = tr.values[static_cast<std::size_t>(node.lhs)];
    if (node.op == NodeOp::relu) {
      for (std::size_t i = 0; i < in.size(); ++i) margin = std::min(margin, std::abs(in[i]));
    } else if (node.op == NodeOp::maxpool) {
      const Shape4 s = in.shape();
      const auto gy = axis_geometry(s.height, node.window, node.stride, node.pad);
      const auto gx = axis_geometry(s.width, node.window, node.stride, node.pad);
      for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t oy = 0; oy < gy.out; ++oy) {
          for (std::size_t ox = 0; ox < gx.out; ++ox) {
            for (std::size_t c = 0; c < s.channels; ++c) {
              double best = -std::numeric_limits<double>::infinity();
              double second = best;
              for (std::size_t ky = 0; ky < node.window; ++ky) {
                for (std::size_t kx = 0; kx < node.window; ++kx) {
                  const std::size_t y = oy * node.stride + ky;
                  const std::size_t x = ox * node.stride + kx;
                  if (y < gy.pad_before || x < gx.pad_before) continue;
                  if (y - gy.pad_before >= s.height || x - gx.pad_before >= s.width) continue;
                  const double v = in(b, y - gy.pad_before, x - gx.pad_before, c);
                  if (v > best) {
                    second = best;
                    best = v;
                  } else if (v > second) {
                    second = v;
                  }
                }
              }
              if (best != 0.0 && std::isfinite(second)) margin = std::min(margin, best - second);
            }
          }
        }
      }
    }
  }
  return margin;
}

double check_model(Rng& rng, ModelKind kind) {
  ArchSpec spec;
  ModelParams<D> model;
  Tensor4<D> x;
  Trace<D> trace;
  Tensor4<D> p;
  for (int attempt = 0;; ++attempt) {
    spec = tiny_spec(rng, kind);
    model = build_model<D>(spec, rng.next());
    // Zero initial biases leave exact zeros behind dead ReLUs.
    for (auto& k : model.layers) {
      for (auto& b : k.bias) b = static_cast<D>(rng.uniform(0.05, 0.3));
    }
    const std::size_t n = 1 + rng.below(2);
    x = random_tensor<D>(rng, {n, spec.input_height, spec.input_width, 1});
    trace = Trace<D>{};
    p = forward(model, x, trace);
    if (kink_margin(model, trace) >= 1e-4 || attempt == 100) break;
  }
  Tensor4<D> t(p.shape());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<D>(rng.below(2));

  // Mean BCE over the batch with the fused seed (p - t) / N.
  Tensor4<D> seed(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) seed[i] = (p[i] - t[i]) / static_cast<D>(p.size());
  const ModelGrad<D> g = backward_from_logits(model, trace, seed);

  std::vector<D*> coords;
  std::vector<D> analytic;
  for (std::size_t l = 0; l < model.layers.size(); ++l) collect(coords, analytic, model.layers[l], g.layers[l]);
  // The fused seed differentiates the unclamped loss, written on the logits
  // as softplus(z) - t z.
  auto f = [&] {
    Trace<D> tr;
    forward(model, x, tr);
    const Tensor4<D>& z = tr.values[tr.values.size() - 2];
    D sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      sum += std::max(z[i], 0.0) + std::log1p(std::exp(-std::abs(z[i]))) - t[i] * z[i];
    }
    return Tensor4<D>({1, 1, 1, 1}, sum / static_cast<D>(z.size()));
  };
  return compare(coords, analytic, f, Tensor4<D>({1, 1, 1, 1}, 1.0));
}

// ---- forward oracles (f32) ------------------------------------------------

using F = float;

double oracle_conv(Rng& rng) {
  const Geometry g = random_geometry(rng, 4);
  const auto x = random_tensor<F>(rng, {g.batch, g.height + 2, g.width + 2, g.in_c});
  auto k = Kernel<F>::standard(g.kh, g.kw, g.in_c, g.out_c + 1, g.bias);
  randomize(rng, k);
  return max_relative(conv2d_forward(x, k, g.stride, g.pad), ref_conv(x, k, g.stride, g.pad == PadMode::same));
}

double oracle_depthwise(Rng& rng) {
  const Geometry g = random_geometry(rng, 4);
  const auto x = random_tensor<F>(rng, {g.batch, g.height + 2, g.width + 2, g.in_c + 1});
  auto k = Kernel<F>::depthwise(g.kh, g.kw, g.in_c + 1, g.bias);
  randomize(rng, k);
  return max_relative(depthwise_forward(x, k, g.stride, g.pad),
                      ref_depthwise(x, k, g.stride, g.pad == PadMode::same));
}

double oracle_pointwise(Rng& rng) {
  const Geometry g = random_geometry(rng);
  const auto x = random_tensor<F>(rng, {g.batch, g.height, g.width, g.in_c + 2});
  auto k = Kernel<F>::pointwise(g.in_c + 2, g.out_c + 1, g.bias);
  randomize(rng, k);
  return max_relative(pointwise_forward(x, k), ref_pointwise(x, k));
}

double oracle_separable(Rng& rng) {
  const Geometry g = random_geometry(rng, 4);
  const auto x = random_tensor<F>(rng, {g.batch, g.height + 1, g.width + 1, g.in_c});
  auto dk = Kernel<F>::depthwise(g.kh, g.kw, g.in_c, g.bias);
  auto pk = Kernel<F>::pointwise(g.in_c, g.out_c, g.bias);
  randomize(rng, dk);
  randomize(rng, pk);
  // Reference composes the two references in double.
  const Tensor4<double> mid = ref_depthwise(x, dk, g.stride, g.pad == PadMode::same);
  return max_relative(separable_forward(x, dk, pk, g.stride, g.pad), ref_pointwise(mid, pk.cast<double>()));
}

double oracle_maxpool(Rng& rng) {
  const std::size_t window = 1 + rng.below(3);
  const std::size_t stride = 1 + rng.below(3);
  const bool same = rng.below(2) != 0;
  const auto x = random_tensor<F>(rng, {1 + rng.below(2), window + rng.below(6), window + rng.below(6), 1 + rng.below(3)});
  return max_relative(maxpool_forward(x, window, stride, same ? PadMode::same : PadMode::valid).output,
                      ref_maxpool(x, window, stride, same));
}

double oracle_transposed(Rng& rng) {
  const Geometry g = random_geometry(rng);
  const std::size_t stride = 1 + rng.below(3);
  const auto x = random_tensor<F>(rng, {g.batch, 1 + rng.below(5), 1 + rng.below(5), g.in_c});
  auto k = Kernel<F>::standard(g.kh, g.kw, g.in_c, g.out_c, g.bias);
  randomize(rng, k);
  return max_relative(transposed_conv_forward(x, k, stride), ref_transposed(x, k, stride));
}

double oracle_upsample(Rng& rng) {
  const auto x = random_tensor<F>(rng, {1 + rng.below(2), 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(3)});
  return max_relative(upsample2x_nearest(x), ref_upsample(x));
}

double oracle_dense(Rng& rng) {
  const Shape4 s{1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(3)};
  const auto x = random_tensor<F>(rng, s);
  auto k = Kernel<F>::pointwise(s.height * s.width * s.channels, 1 + rng.below(5), rng.below(4) != 0);
  randomize(rng, k);
  return max_relative(dense_forward(x, k), ref_dense(x, k));
}

double oracle_activation(Rng& rng, Activation kind) {
  const auto x = random_tensor<F>(rng, {1 + rng.below(2), 1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(4)}, -6.0, 6.0);
  return max_relative(activation(x, kind), ref_activation(x, kind));
}

double oracle_add(Rng& rng) {
  const Shape4 s{1 + rng.below(2), 1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(4)};
  const auto a = random_tensor<F>(rng, s);
  const auto b = random_tensor<F>(rng, s);
  Tensor4<double> ref(s);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = static_cast<double>(a[i]) + static_cast<double>(b[i]);
  return max_relative(add(a, b), ref);
}

}  // namespace

std::vector<NamedCheck> gradient_checks() {
  return {
      {"conv2d", check_conv},
      {"depthwise", check_depthwise},
      {"pointwise", check_pointwise},
      {"separable", check_separable},
      {"maxpool", check_maxpool},
      {"transposed_conv", check_transposed},
      {"relu", [](Rng& r) { return check_activation(r, Activation::relu); }},
      {"sigmoid", [](Rng& r) { return check_activation(r, Activation::sigmoid); }},
      {"dense", check_dense},
      {"bce", check_bce},
      {"upsample", check_upsample},
  };
}

std::vector<NamedCheck> model_gradient_checks() {
  return {
      {"classifier", [](Rng& r) { return check_model(r, ModelKind::classifier); }},
      {"segmenter", [](Rng& r) { return check_model(r, ModelKind::segmenter); }},
  };
}

std::vector<NamedCheck> oracle_checks() {
  return {
      {"conv2d", oracle_conv},
      {"depthwise", oracle_depthwise},
      {"pointwise", oracle_pointwise},
      {"separable", oracle_separable},
      {"maxpool", oracle_maxpool},
      {"transposed_conv", oracle_transposed},
      {"upsample", oracle_upsample},
      {"dense", oracle_dense},
      {"relu", [](Rng& r) { return oracle_activation(r, Activation::relu); }},
      {"sigmoid", [](Rng& r) { return oracle_activation(r, Activation::sigmoid); }},
      {"add", oracle_add},
  };
}

double transposed_adjoint_error(Rng& rng) {
  const Geometry g = random_geometry(rng);
  const std::size_t stride = 1 + rng.below(3);
  const auto x = random_tensor<D>(rng, {g.batch, 1 + rng.below(5), 1 + rng.below(5), g.in_c});
  auto k = Kernel<D>::standard(g.kh, g.kw, g.in_c, g.out_c, false);
  randomize(rng, k);
  const auto tx = transposed_conv_forward(x, k, stride);
  const auto y = random_tensor<D>(rng, tx.shape());
  const auto tty = transposed_conv_backward(x, k, stride, y).input;
  double lhs = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) lhs += tx[i] * y[i];
  double rhs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * tty[i];
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  return scale > 0.0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
}

double separable_mismatches(Rng& rng) {
  const Geometry g = random_geometry(rng, 4);
  const auto x = random_tensor<F>(rng, {g.batch, g.height + 1, g.width + 1, g.in_c});
  auto dk = Kernel<F>::depthwise(g.kh, g.kw, g.in_c, g.bias);
  auto pk = Kernel<F>::pointwise(g.in_c, g.out_c, g.bias);
  randomize(rng, dk);
  randomize(rng, pk);
  const auto a = separable_forward(x, dk, pk, g.stride, g.pad);
  const auto b = pointwise_forward(depthwise_forward(x, dk, g.stride, g.pad), pk);
  if (a.shape() != b.shape()) return static_cast<double>(std::max(a.size(), b.size()));
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i] ? 1 : 0;
  return static_cast<double>(diff);
}

namespace {

// Slice k of plane p at (r, c) is voxel (i, j, k') with the plane's own
// axis order, written out independently of the library's index helpers.
std::array<std::size_t, 3> voxel_of(Plane p, std::size_t k, std::size_t r, std::size_t c) {
  switch (p) {
    case Plane::axial:
      return {r, c, k};
    case Plane::sagittal:
      return {k, r, c};
    case Plane::coronal:
      return {r, k, c};
  }
  return {0, 0, 0};
}

std::size_t slices_along(const Dims& d, Plane p) { return p == Plane::axial ? d.z : p == Plane::sagittal ? d.x : d.y; }

PlanePrediction random_prediction(Rng& rng, const Dims& d, Plane p) {
  PlanePrediction pred;
  pred.probabilities.plane = p;
  pred.threshold = static_cast<float>(rng.uniform(0.1, 0.9));
  const double density = rng.uniform();
  const std::size_t rows = p == Plane::sagittal ? d.y : d.x;
  const std::size_t cols = p == Plane::axial ? d.y : d.z;
  for (std::size_t k = 0; k < slices_along(d, p); ++k) {
    Slice2D<float> s(rows, cols);
    for (auto& v : s.data) {
      const std::size_t roll = rng.below(10);
      if (roll == 0) {
        v = pred.threshold;
      } else {
        v = rng.uniform() < density ? static_cast<float>(rng.uniform(pred.threshold, 1.0))
                                    : static_cast<float>(rng.uniform(0.0, pred.threshold) * 0.999);
      }
    }
    pred.probabilities.slices.push_back(std::move(s));
  }
  return pred;
}

std::uint64_t false_positives(const Mask3& m, const Mask3& truth) {
  std::uint64_t fp = 0;
  for (std::size_t i = 0; i < m.data.size(); ++i) fp += m.data[i] && !truth.data[i];
  return fp;
}

// Classifier and segmenter outputs looked up by the slice id stored in pixel
// (0, 0).
class ScriptedModels final : public SliceModels {
 public:
  std::vector<double> probs;
  std::vector<Slice2D<float>> maps;

  Plane plane() const override { return Plane::axial; }
  double classify(const Slice2D<float>& s) const override { return probs.at(id(s)); }
  Slice2D<float> segment(const Slice2D<float>& s) const override { return maps.at(id(s)); }

 private:
  static std::size_t id(const Slice2D<float>& s) { return static_cast<std::size_t>(s.data[0]); }
};

}  // namespace

std::string aggregation_trial(Rng& rng) {
  const Dims d{1 + rng.below(7), 1 + rng.below(7), 1 + rng.below(7)};
  std::array<PlanePrediction, 3> preds;
  std::array<PlaneStack<std::uint8_t>, 3> votes;
  for (std::size_t p = 0; p < 3; ++p) {
    preds[p] = random_prediction(rng, d, kAllPlanes[p]);
    votes[p] = binarize(preds[p]);
  }
  Field3<int> count(d, 0);
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& stack = preds[p].probabilities;
    for (std::size_t k = 0; k < stack.slices.size(); ++k) {
      const auto& s = stack.slices[k];
      for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::size_t c = 0; c < s.cols; ++c) {
          const auto v = voxel_of(stack.plane, k, r, c);
          count.at(v[0], v[1], v[2]) += s.at(r, c) >= preds[p].threshold ? 1 : 0;
        }
      }
    }
  }
  std::array<Mask3, 3> by_t;
  for (int t = 1; t <= 3; ++t) {
    by_t[t - 1] = aggregate_planes(votes[0], votes[1], votes[2], d, AggregationRule{t});
    for (std::size_t i = 0; i < count.data.size(); ++i) {
      if (by_t[t - 1].data[i] != (count.data[i] >= t ? 1 : 0)) {
        return std::string("T=" + std::to_string(t) + " disagrees with the vote count at voxel " + std::to_string(i) +
                    " of " + d.str());
      }
    }
  }
  for (std::size_t i = 0; i < count.data.size(); ++i) {
    if (by_t[2].data[i] > by_t[1].data[i] || by_t[1].data[i] > by_t[0].data[i]) return std::string("T-monotonicity");
  }
  if (aggregate_planes(votes[2], votes[0], votes[1], d, AggregationRule{3}) != by_t[2] ||
      aggregate_planes(votes[1], votes[2], votes[0], d, AggregationRule{3}) != by_t[2]) {
    return std::string("argument order changed the result");
  }
  Mask3 truth(d);
  const double density = rng.uniform();
  for (auto& v : truth.data) v = rng.uniform() < density ? 1 : 0;
  const auto agg_fp = false_positives(by_t[2], truth);
  for (std::size_t p = 0; p < 3; ++p) {
    const Mask3 single = per_plane_mask(votes[p], d);
    if (aggregate_planes(votes[p], votes[p], votes[p], d, AggregationRule{3}) != single) {
      return std::string("tripled plane differs from the single-plane mask");
    }
    if (agg_fp > false_positives(single, truth)) return std::string("aggregated FP exceeds " + to_string(kAllPlanes[p]) + " FP");
  }
  return {};
}

std::string combined_classifier_trial(Rng& rng) {
  const std::size_t n = 1 + rng.below(60);
  const std::size_t hw = 1 + rng.below(4);
  ScriptedModels models;
  std::vector<std::uint8_t> truth(n);
  std::vector<std::uint8_t> cls_label(n);
  std::vector<std::uint8_t> combined(n);
  PipelineConfig cfg;
  cfg.gate_threshold = rng.uniform(0.2, 0.8);
  cfg.pixel_threshold = static_cast<float>(rng.uniform(0.2, 0.8));
  cfg.min_pixels = 1 + rng.below(2);
  const double lesion_rate = rng.below(5) == 0 ? 0.0 : rng.uniform();
  const double empty_rate = rng.uniform(0.0, 0.5);
  bool lesion_slice_rejected = false;
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = rng.uniform() < lesion_rate ? 1 : 0;
    models.probs.push_back(rng.below(8) == 0 ? cfg.gate_threshold : rng.uniform());
    Slice2D<float> map(hw, hw);
    const bool empty = rng.uniform() < empty_rate;
    std::size_t positives = 0;
    for (auto& v : map.data) {
      v = empty ? static_cast<float>(rng.uniform(0.0, cfg.pixel_threshold) * 0.999) : static_cast<float>(rng.uniform());
      positives += v >= cfg.pixel_threshold;
    }
    models.maps.push_back(map);
    const bool gate = models.probs[i] >= cfg.gate_threshold;
    cls_label[i] = gate;
    const bool expected = gate && positives >= cfg.min_pixels;
    Slice2D<float> slice(hw, hw, 0.5f);
    slice.data[0] = static_cast<float>(i);
    combined[i] = act_as_classification(models, slice, cfg);
    if (combined[i] != expected) return std::string("combined label of slice " + std::to_string(i) + " breaks the rule");
    if (truth[i] && gate && !expected) lesion_slice_rejected = true;
  }
  const auto cc = confusion(cls_label, truth);
  const auto cm = confusion(combined, truth);
  if (cm.tp > cc.tp || cm.fp > cc.fp || cm.tn < cc.tn || cm.fn < cc.fn) return std::string("combined counts not dominated");
  const auto mc = classification_metrics(cc);
  const auto mm = classification_metrics(cm);
  if (mm.specificity < mc.specificity) return std::string("specificity dropped");
  if (cc.tp + cc.fn > 0) {
    if (mm.sensitivity > mc.sensitivity) return std::string("sensitivity rose");
    if (!lesion_slice_rejected && mm.sensitivity != mc.sensitivity) return std::string("sensitivity changed without rejections");
    if (lesion_slice_rejected && mm.sensitivity >= mc.sensitivity) return std::string("rejected lesion slice kept sensitivity");
  }
  return {};
}

std::string metric_identity_trial(Rng& rng) {
  const std::size_t n = rng.below(200);
  const double rate = rng.uniform();
  std::vector<std::uint8_t> pred(n), truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = rng.uniform() < rate ? static_cast<std::uint8_t>(1 + rng.below(3)) : 0;
    truth[i] = rng.uniform() < rate ? 1 : 0;
  }
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += pred[i] && truth[i];
    tn += !pred[i] && !truth[i];
    fp += pred[i] && !truth[i];
    fn += !pred[i] && truth[i];
  }
  const ConfusionCounts c = confusion(pred, truth);
  if (c != ConfusionCounts{tp, tn, fp, fn}) return std::string("confusion differs from the direct tally");
  std::vector<std::uint8_t> npred(n), ntruth(n);
  for (std::size_t i = 0; i < n; ++i) {
    npred[i] = !pred[i];
    ntruth[i] = !truth[i];
  }
  if (confusion(npred, ntruth) != ConfusionCounts{tn, tp, fn, fp}) return std::string("label inversion is not symmetric");

  const auto m = classification_metrics(c);
  if (std::abs(dice(c) - m.f1) > 1e-12) return std::string("dice != f1");
  const double values[] = {m.precision, m.recall, m.f1, m.accuracy, m.sensitivity, m.specificity, dice(c)};
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) return std::string("metric outside [0, 1]");
  }
  if (n > 0 && (m.accuracy == 1.0) != (fp == 0 && fn == 0)) return std::string("accuracy == 1 iff no errors");
  auto ratio = [](std::uint64_t a, std::uint64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  const bool empty = tp == 0 && fp == 0 && fn == 0;
  if (m.sensitivity != (empty ? 1.0 : ratio(tp, tp + fn))) return std::string("standard sensitivity");
  if (m.specificity != ratio(tn, tn + fp)) return std::string("standard specificity");
  const auto lit = classification_metrics(c, MetricConvention::literal);
  if (lit.sensitivity != (empty ? 1.0 : ratio(tp, tp + fp))) return std::string("literal sensitivity");
  if (lit.specificity != ratio(tn, tn + fn)) return std::string("literal specificity");
  if (lit.precision != m.precision || lit.recall != m.recall || lit.accuracy != m.accuracy) {
    return std::string("literal flag changed a convention-free metric");
  }
  return {};
}

}  // namespace vru::testing
