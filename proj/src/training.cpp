#include "vru/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vru/error.hpp"
#include "vru/parallel.hpp"
#include "vru/rng.hpp"

namespace vru {

namespace {

template <typename T>
void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": prediction " + a.shape().str() + " vs target " +
                     b.shape().str());
  }
}

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

}  // namespace

template <typename T>
double bce_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
  require_same_shape(pred, target, "bce_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_probability(static_cast<double>(pred[i]));
    const double t = static_cast<double>(target[i]);
    sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(pred.size());
}

template <typename T>
Tensor4<T> bce_grad(const Tensor4<T>& pred, const Tensor4<T>& target) {
  require_same_shape(pred, target, "bce_grad");
  Tensor4<T> g(pred.shape());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_probability(static_cast<double>(pred[i]));
    const double t = static_cast<double>(target[i]);
    g[i] = static_cast<T>((p - t) / (p * (1.0 - p)) / n);
  }
  return g;
}

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: params " + std::to_string(params.size()) + ", grads " +
                     std::to_string(grads.size()) + ", state " + std::to_string(state.m.size()));
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    state.m[i] = b1 * state.m[i] + (T{1} - b1) * g;
    state.v[i] = b2 * state.v[i] + (T{1} - b2) * g * g;
    const double m_hat = static_cast<double>(state.m[i]) / c1;
    const double v_hat = static_cast<double>(state.v[i]) / c2;
    params[i] = static_cast<T>(static_cast<double>(params[i]) -
                               state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
  }
}

bool early_stop_update(EarlyStopState& state, double val_loss) {
  if (val_loss < state.best_val_loss - state.min_delta) {
    state.best_val_loss = val_loss;
    state.epochs_since_improvement = 0;
  } else {
    ++state.epochs_since_improvement;
  }
  return state.epochs_since_improvement >= state.patience;
}

template <typename T>
LossAndGrad<T> loss_and_gradient(const ModelParams<T>& model, const Batch<T>& batch,
                                 std::size_t threads) {
  const std::size_t n = batch.inputs.batch();
  if (batch.targets.batch() != n) {
    throw ShapeError("batch has " + std::to_string(n) + " inputs but " +
                     std::to_string(batch.targets.batch()) + " targets");
  }
  const double total = static_cast<double>(batch.targets.size());
  std::vector<double> losses(n, 0.0);
  std::vector<std::vector<T>> grads(n);

  parallel_for(n, threads, [&](std::size_t s) {
    Trace<T> trace;
    const Tensor4<T> x = batch.inputs.sample(s);
    const Tensor4<T> t = batch.targets.sample(s);
    const Tensor4<T> p = forward(model, x, trace);
    if (p.shape() != t.shape()) {
      throw ShapeError("model output " + p.shape().str() + " does not match target " +
                       t.shape().str());
    }
    double sum = 0.0;
    Tensor4<T> seed(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double pi = clamp_probability(static_cast<double>(p[i]));
      const double ti = static_cast<double>(t[i]);
      sum -= ti * std::log(pi) + (1.0 - ti) * std::log(1.0 - pi);
      // Sigmoid and cross-entropy fused: d/dlogit = p - t.
      seed[i] = static_cast<T>((static_cast<double>(p[i]) - ti) / total);
    }
    losses[s] = sum;
    ModelGrad<T> g = backward_from_logits(model, trace, seed);
    std::vector<T>& flat = grads[s];
    flat.reserve(model.parameter_count());
    for (const auto& k : g.layers) {
      flat.insert(flat.end(), k.weights.begin(), k.weights.end());
      flat.insert(flat.end(), k.bias.begin(), k.bias.end());
    }
  });

  LossAndGrad<T> out;
  out.grad.assign(model.parameter_count(), T{0});
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    loss += losses[s];
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += grads[s][i];
  }
  out.loss = loss / total;
  return out;
}

template <typename T>
double train_epoch(ModelParams<T>& model, std::span<const Batch<T>> batches, AdamState<T>& opt,
                   std::size_t threads) {
  if (batches.empty()) return 0.0;
  double sum = 0.0;
  std::vector<T> params = model.flatten();
  for (const auto& b : batches) {
    LossAndGrad<T> lg = loss_and_gradient(model, b, threads);
    sum += lg.loss;
    adam_step<T>(params, lg.grad, opt);
    model.assign(params);
  }
  return sum / static_cast<double>(batches.size());
}

template <typename T>
std::vector<Batch<T>> make_batches(const SampleSet<T>& set, std::span<const std::size_t> order,
                                   std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (set.inputs.size() != set.targets.size()) {
    throw ShapeError("sample set has mismatched input/target counts");
  }
  std::vector<Batch<T>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<Tensor4<T>> xs;
    std::vector<Tensor4<T>> ts;
    for (std::size_t i = start; i < end; ++i) {
      xs.push_back(set.inputs.at(order[i]));
      ts.push_back(set.targets.at(order[i]));
    }
    out.push_back({stack_samples<T>(xs), stack_samples<T>(ts)});
  }
  return out;
}

template <typename T>
double evaluate_loss(const ModelParams<T>& model, const SampleSet<T>& set, std::size_t batch_size,
                     std::size_t threads) {
  if (set.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  double sum = 0.0;
  double count = 0.0;
  for (const auto& b : make_batches(set, order, batch_size)) {
    const std::size_t n = b.inputs.batch();
    std::vector<double> losses(n, 0.0);
    parallel_for(n, threads, [&](std::size_t s) {
      const Tensor4<T> p = forward(model, b.inputs.sample(s));
      losses[s] = bce_loss(p, b.targets.sample(s)) * static_cast<double>(p.size());
    });
    for (double l : losses) sum += l;
    count += static_cast<double>(b.targets.size());
  }
  return sum / count;
}

template <typename T>
FitLog fit(ModelParams<T>& model, const SampleSet<T>& train, const SampleSet<T>& val,
           const FitConfig& config) {
  FitLog log;
  if (train.size() == 0 || config.max_epochs == 0) return log;
  AdamState<T> opt = AdamState<T>::make(model.parameter_count(), config.learning_rate);
  EarlyStopState stop;
  stop.patience = config.patience;
  stop.min_delta = config.min_delta;
  Rng rng(config.shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    const auto batches = make_batches(train, order, config.batch_size);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_epoch<T>(model, batches, opt, config.threads);
    if (val.size() > 0) rec.val_loss = evaluate_loss(model, val, config.batch_size, config.threads);
    log.epochs.push_back(rec);
    if (val.size() > 0 && std::isfinite(rec.val_loss) && early_stop_update(stop, rec.val_loss)) {
      log.stopped_at = epoch;
      break;
    }
  }
  return log;
}

#define VRU_INSTANTIATE_TRAINING(T)                                                            \
  template double bce_loss(const Tensor4<T>&, const Tensor4<T>&);                              \
  template Tensor4<T> bce_grad(const Tensor4<T>&, const Tensor4<T>&);                          \
  template void adam_step(std::span<T>, std::span<const T>, AdamState<T>&);                    \
  template LossAndGrad<T> loss_and_gradient(const ModelParams<T>&, const Batch<T>&, std::size_t); \
  template double train_epoch(ModelParams<T>&, std::span<const Batch<T>>, AdamState<T>&,       \
                              std::size_t);                                                    \
  template double evaluate_loss(const ModelParams<T>&, const SampleSet<T>&, std::size_t,       \
                                std::size_t);                                                  \
  template std::vector<Batch<T>> make_batches(const SampleSet<T>&, std::span<const std::size_t>, \
                                              std::size_t);                                    \
  template FitLog fit(ModelParams<T>&, const SampleSet<T>&, const SampleSet<T>&, const FitConfig&);

VRU_INSTANTIATE_TRAINING(float)
VRU_INSTANTIATE_TRAINING(double)

#undef VRU_INSTANTIATE_TRAINING

}  // namespace vru
