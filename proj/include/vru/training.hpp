#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vru/model.hpp"
#include "vru/tensor.hpp"

namespace vru {

// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityClamp = 1e-7;

// Mean over all elements of -[t ln p + (1 - t) ln(1 - p)].
template <typename T>
double bce_loss(const Tensor4<T>& pred, const Tensor4<T>& target);

// d(bce_loss)/d(pred): (p - t) / (p (1 - p)) / N on the clamped p.
template <typename T>
Tensor4<T> bce_grad(const Tensor4<T>& pred, const Tensor4<T>& target);

template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  std::vector<T> m;
  std::vector<T> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  static AdamState make(std::size_t parameters, double learning_rate) {
    AdamState s;
    s.m.assign(parameters, T{0});
    s.v.assign(parameters, T{0});
    s.learning_rate = learning_rate;
    return s;
  }
};

// One bias-corrected Adam update in place; increments state.step.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state);

struct EarlyStopState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  std::size_t patience = 10;
  double min_delta = 0.0;
};

// Improvement means val_loss < best - min_delta. Returns true when
// epochs_since_improvement reaches patience.
bool early_stop_update(EarlyStopState& state, double val_loss);

template <typename T>
struct Batch {
  Tensor4<T> inputs;
  Tensor4<T> targets;
};

// Per-sample input/target pairs (1-batch tensors).
template <typename T>
struct SampleSet {
  std::vector<Tensor4<T>> inputs;
  std::vector<Tensor4<T>> targets;
  std::size_t size() const { return inputs.size(); }
};

// Mean BCE over every batch element and pixel, plus its parameter gradient.
// Samples are processed independently on up to `threads` workers and summed
// in sample order, so the result does not depend on the thread count.
template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  std::vector<T> grad;
};
template <typename T>
LossAndGrad<T> loss_and_gradient(const ModelParams<T>& model, const Batch<T>& batch,
                                 std::size_t threads = 1);

// One Adam update per batch. Returns the mean of the pre-update batch losses.
template <typename T>
double train_epoch(ModelParams<T>& model, std::span<const Batch<T>> batches, AdamState<T>& opt,
                   std::size_t threads = 1);

// Mean BCE over a whole sample set, without updating anything.
template <typename T>
double evaluate_loss(const ModelParams<T>& model, const SampleSet<T>& set, std::size_t batch_size,
                     std::size_t threads = 1);

// Splits `order` into consecutive batches of at most batch_size samples.
template <typename T>
std::vector<Batch<T>> make_batches(const SampleSet<T>& set, std::span<const std::size_t> order,
                                   std::size_t batch_size);

struct FitConfig {
  std::size_t max_epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::size_t patience = 10;
  double min_delta = 0.0;
  std::uint64_t shuffle_seed = 0;
  std::size_t threads = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct FitLog {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> stopped_at;
};

// Epoch loop with per-epoch reshuffling and early stopping on validation
// loss. An empty validation set disables early stopping.
template <typename T>
FitLog fit(ModelParams<T>& model, const SampleSet<T>& train, const SampleSet<T>& val,
           const FitConfig& config);

}  // namespace vru
