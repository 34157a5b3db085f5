#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vru/ops.hpp"
#include "vru/tensor.hpp"

namespace vru {

enum class ModelKind { classifier, segmenter };

std::string to_string(ModelKind kind);

struct PoolSpec {
  std::size_t window = 2;
  std::size_t stride = 2;
  bool operator==(const PoolSpec&) const = default;
};

/// Declarative network description.
///
/// Classifier: every stage runs `blocks_per_stage` times
///   conv(k x k) -> depthwise(k x k, optional) -> relu
/// then max-pools; the head is flatten -> dense(dense_units) -> relu ->
/// dense(1) -> sigmoid.
///
/// Segmenter: encoder stage i runs conv(k x k) -> relu, then
/// `blocks_per_stage` separable (or standard, when use_separable is false)
/// convs with relu, and max-pools before the next stage. Each decoder stage
/// upsamples with a 2x2 stride-2 transposed conv plus a nearest-neighbour
/// upsample followed by a pointwise projection, adds the encoder features of
/// the same resolution when decoder_residual is set, and runs
/// `blocks_per_stage` conv -> relu. A pointwise conv and sigmoid produce one
/// probability per pixel.
struct ArchSpec {
  ModelKind kind = ModelKind::classifier;
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  std::size_t in_channels = 1;
  std::vector<std::size_t> stage_channels{16, 32, 64};
  std::size_t blocks_per_stage = 1;
  std::size_t kernel_size = 3;
  bool use_depthwise = true;
  bool use_separable = true;
  bool decoder_residual = true;
  PoolSpec pool{};
  std::size_t dense_units = 64;

  static ArchSpec classifier_defaults(std::size_t height, std::size_t width);
  static ArchSpec segmenter_defaults(std::size_t height, std::size_t width);

  // Throws BuildError naming the offending stage.
  void validate() const;

  // Canonical "key = value" document; parse() accepts '#' comments, blank
  // lines and any key order, and fills unspecified keys from the defaults of
  // the given kind.
  std::string to_text() const;
  static ArchSpec parse(std::string_view text);
  static ArchSpec load(const std::string& path);
  void save(const std::string& path) const;

  // FNV-1a 64 of to_text().
  std::uint64_t digest() const;

  bool operator==(const ArchSpec&) const = default;
};

enum class NodeOp {
  input,
  conv,
  depthwise,
  pointwise,
  dense,
  transposed_conv,
  maxpool,
  upsample,
  relu,
  sigmoid,
  add
};

// One step of the compiled network. `lhs`/`rhs` index earlier nodes; node 0 is
// the network input. `layer` indexes ModelParams::layers for parametric ops.
struct Node {
  NodeOp op = NodeOp::input;
  int lhs = -1;
  int rhs = -1;
  int layer = -1;
  std::size_t stride = 1;
  std::size_t window = 0;
  PadMode pad = PadMode::same;
  std::string label;
};

template <typename T>
struct ModelParams {
  ArchSpec spec;
  std::vector<Kernel<T>> layers;
  std::vector<Node> graph;

  std::size_t parameter_count() const;
  std::vector<T> flatten() const;
  // Inverse of flatten(); throws ShapeError on length mismatch.
  void assign(std::span<const T> values);
  // FNV-1a 64 over the spec document and the parameters rounded to f32.
  std::uint64_t digest() const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> m;
    m.spec = spec;
    m.graph = graph;
    for (const auto& k : layers) m.layers.push_back(k.template cast<U>());
    return m;
  }
};

template <typename T>
struct Trace {
  std::vector<Tensor4<T>> values;
  std::vector<std::vector<std::size_t>> argmax;
};

template <typename T>
struct ModelGrad {
  std::vector<Kernel<T>> layers;
  Tensor4<T> input;
};

// Layer kernels with zeroed weights, plus the compiled graph. Throws
// BuildError for invalid specs.
template <typename T>
ModelParams<T> allocate_model(const ArchSpec& spec);

// He-uniform init for relu-adjacent layers, Glorot-uniform for the sigmoid
// head, zero biases.
template <typename T>
ModelParams<T> build_classifier(const ArchSpec& spec, std::uint64_t seed);
template <typename T>
ModelParams<T> build_segmenter(const ArchSpec& spec, std::uint64_t seed);
template <typename T>
ModelParams<T> build_model(const ArchSpec& spec, std::uint64_t seed);

template <typename T>
void zero_parameters(ModelParams<T>& model);

template <typename T>
std::size_t count_params(const ModelParams<T>& model) {
  return model.parameter_count();
}

// Classifier: (batch, 1, 1, 1) probabilities. Segmenter: (batch, H, W, 1).
template <typename T>
Tensor4<T> forward(const ModelParams<T>& model, const Tensor4<T>& x);
template <typename T>
Tensor4<T> forward(const ModelParams<T>& model, const Tensor4<T>& x, Trace<T>& trace);

// Gradients of sum(grad_output * output) w.r.t. every layer and the input.
template <typename T>
ModelGrad<T> backward(const ModelParams<T>& model, const Trace<T>& trace,
                      const Tensor4<T>& grad_output);
// Same, but seeded at the input of the final sigmoid.
template <typename T>
ModelGrad<T> backward_from_logits(const ModelParams<T>& model, const Trace<T>& trace,
                                  const Tensor4<T>& grad_logits);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace vru
