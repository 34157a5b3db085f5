#include "vru/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "vru/error.hpp"
#include "vru/rng.hpp"

namespace vru {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::classifier ? "classifier" : "segmenter";
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// ArchSpec

ArchSpec ArchSpec::classifier_defaults(std::size_t height, std::size_t width) {
  ArchSpec s;
  s.kind = ModelKind::classifier;
  s.input_height = height;
  s.input_width = width;
  s.stage_channels = {16, 32, 64};
  s.pool = {2, 2};
  return s;
}

ArchSpec ArchSpec::segmenter_defaults(std::size_t height, std::size_t width) {
  ArchSpec s;
  s.kind = ModelKind::segmenter;
  s.input_height = height;
  s.input_width = width;
  s.stage_channels = {16, 32, 64};
  s.pool = {3, 2};
  return s;
}

void ArchSpec::validate() const {
  const std::string who = to_string(kind);
  if (input_height == 0 || input_width == 0) throw BuildError(who + ": input_hw must be >= 1");
  if (in_channels == 0) throw BuildError(who + ": in_channels must be >= 1");
  if (kernel_size == 0) throw BuildError(who + ": kernel_size must be >= 1");
  if (blocks_per_stage == 0) throw BuildError(who + ": blocks_per_stage must be >= 1");
  if (stage_channels.empty()) throw BuildError(who + ": stage_channels must not be empty");
  if (pool.window == 0 || pool.stride == 0) throw BuildError(who + ": pool window/stride must be >= 1");
  for (std::size_t i = 0; i < stage_channels.size(); ++i) {
    if (stage_channels[i] == 0) {
      throw BuildError(who + " stage " + std::to_string(i + 1) + ": zero channels");
    }
    if (i > 0 && stage_channels[i] <= stage_channels[i - 1]) {
      throw BuildError(who + " stage " + std::to_string(i + 1) + ": channels " +
                       std::to_string(stage_channels[i]) + " not greater than stage " +
                       std::to_string(i) + " (" + std::to_string(stage_channels[i - 1]) + ")");
    }
  }
  if (kind == ModelKind::classifier) {
    if (dense_units == 0) throw BuildError("classifier: dense_units must be >= 1");
    return;
  }
  if (stage_channels.size() > 1 && pool.stride != 2) {
    throw BuildError("segmenter: pool stride must be 2 so each decoder stage can double back");
  }
  std::size_t h = input_height;
  std::size_t w = input_width;
  for (std::size_t i = 0; i + 1 < stage_channels.size(); ++i) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw BuildError("segmenter stage " + std::to_string(i + 1) + ": spatial " +
                       std::to_string(h) + "x" + std::to_string(w) +
                       " is odd, residual join after upsampling would mismatch");
    }
    h /= 2;
    w /= 2;
  }
}

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::size_t> parse_counts(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::istringstream in(value);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw FormatError("arch spec: key '" + key + "' has non-count value '" + tok + "'");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw FormatError("arch spec: key '" + key + "' needs true/false, got '" + value + "'");
}

std::size_t parse_single(const std::string& key, const std::string& value) {
  const auto v = parse_counts(key, value);
  if (v.size() != 1) throw FormatError("arch spec: key '" + key + "' needs one value");
  return v[0];
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& key, const std::string& value) {
  const auto v = parse_counts(key, value);
  if (v.size() != 2) throw FormatError("arch spec: key '" + key + "' needs two values");
  return {v[0], v[1]};
}

}  // namespace

std::string ArchSpec::to_text() const {
  std::ostringstream o;
  o << "kind = " << to_string(kind) << "\n"
    << "input_hw = " << input_height << " " << input_width << "\n"
    << "in_channels = " << in_channels << "\n"
    << "stage_channels = " << join(stage_channels) << "\n"
    << "blocks_per_stage = " << blocks_per_stage << "\n"
    << "kernel_size = " << kernel_size << "\n"
    << "use_depthwise = " << (use_depthwise ? "true" : "false") << "\n"
    << "use_separable = " << (use_separable ? "true" : "false") << "\n"
    << "decoder_residual = " << (decoder_residual ? "true" : "false") << "\n"
    << "pool = " << pool.window << " " << pool.stride << "\n"
    << "dense_units = " << dense_units << "\n";
  return o.str();
}

ArchSpec ArchSpec::parse(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError("arch spec line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  const auto kind_it = kv.find("kind");
  if (kind_it == kv.end()) throw FormatError("arch spec: missing 'kind'");
  ArchSpec s;
  if (kind_it->second == "classifier") {
    s = classifier_defaults(32, 32);
  } else if (kind_it->second == "segmenter") {
    s = segmenter_defaults(32, 32);
  } else {
    throw FormatError("arch spec: unknown kind '" + kind_it->second + "'");
  }
  for (const auto& [key, value] : kv) {
    if (key == "kind") continue;
    if (key == "input_hw") {
      std::tie(s.input_height, s.input_width) = parse_pair(key, value);
    } else if (key == "in_channels") {
      s.in_channels = parse_single(key, value);
    } else if (key == "stage_channels") {
      s.stage_channels = parse_counts(key, value);
    } else if (key == "blocks_per_stage") {
      s.blocks_per_stage = parse_single(key, value);
    } else if (key == "kernel_size") {
      s.kernel_size = parse_single(key, value);
    } else if (key == "use_depthwise") {
      s.use_depthwise = parse_bool(key, value);
    } else if (key == "use_separable") {
      s.use_separable = parse_bool(key, value);
    } else if (key == "decoder_residual") {
      s.decoder_residual = parse_bool(key, value);
    } else if (key == "pool") {
      std::tie(s.pool.window, s.pool.stride) = parse_pair(key, value);
    } else if (key == "dense_units") {
      s.dense_units = parse_single(key, value);
    } else {
      throw FormatError("arch spec: unknown key '" + key + "'");
    }
  }
  return s;
}

ArchSpec ArchSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open arch spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ArchSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write arch spec '" + path + "'");
  out << to_text();
}

std::uint64_t ArchSpec::digest() const { return fnv1a64(to_text()); }

// ---------------------------------------------------------------------------
// graph construction

namespace {

template <typename T>
class GraphBuilder {
 public:
  explicit GraphBuilder(ModelParams<T>& m) : m_(m) { m_.graph.push_back({NodeOp::input, -1, -1, -1, 1, 0, PadMode::same, "input"}); }

  int layer_node(NodeOp op, int in, Kernel<T> k, std::string label, std::size_t stride = 1) {
    m_.layers.push_back(std::move(k));
    Node n;
    n.op = op;
    n.lhs = in;
    n.layer = static_cast<int>(m_.layers.size()) - 1;
    n.stride = stride;
    n.label = std::move(label);
    return push(std::move(n));
  }
  int unary(NodeOp op, int in, std::string label) {
    Node n;
    n.op = op;
    n.lhs = in;
    n.label = std::move(label);
    return push(std::move(n));
  }
  int pool(int in, PoolSpec p, std::string label) {
    Node n;
    n.op = NodeOp::maxpool;
    n.lhs = in;
    n.window = p.window;
    n.stride = p.stride;
    n.label = std::move(label);
    return push(std::move(n));
  }
  int add(int a, int b, std::string label) {
    Node n;
    n.op = NodeOp::add;
    n.lhs = a;
    n.rhs = b;
    n.label = std::move(label);
    return push(std::move(n));
  }

 private:
  int push(Node n) {
    m_.graph.push_back(std::move(n));
    return static_cast<int>(m_.graph.size()) - 1;
  }
  ModelParams<T>& m_;
};

template <typename T>
void compile_classifier(ModelParams<T>& m) {
  const ArchSpec& s = m.spec;
  GraphBuilder<T> g(m);
  const std::size_t k = s.kernel_size;
  int cur = 0;
  std::size_t c_prev = s.in_channels;
  std::size_t h = s.input_height;
  std::size_t w = s.input_width;
  for (std::size_t i = 0; i < s.stage_channels.size(); ++i) {
    const std::size_t c = s.stage_channels[i];
    const std::string stage = "stage" + std::to_string(i + 1);
    for (std::size_t b = 0; b < s.blocks_per_stage; ++b) {
      const std::string block = stage + ".block" + std::to_string(b + 1);
      cur = g.layer_node(NodeOp::conv, cur, Kernel<T>::standard(k, k, c_prev, c), block + ".conv");
      c_prev = c;
      if (s.use_depthwise) {
        cur = g.layer_node(NodeOp::depthwise, cur, Kernel<T>::depthwise(k, k, c), block + ".depthwise");
      }
      cur = g.unary(NodeOp::relu, cur, block + ".relu");
    }
    cur = g.pool(cur, s.pool, stage + ".maxpool");
    h = axis_geometry(h, s.pool.window, s.pool.stride, PadMode::same).out;
    w = axis_geometry(w, s.pool.window, s.pool.stride, PadMode::same).out;
  }
  const std::size_t features = h * w * c_prev;
  cur = g.layer_node(NodeOp::dense, cur, Kernel<T>::pointwise(features, s.dense_units), "head.dense");
  cur = g.unary(NodeOp::relu, cur, "head.relu");
  cur = g.layer_node(NodeOp::dense, cur, Kernel<T>::pointwise(s.dense_units, 1), "head.logit");
  g.unary(NodeOp::sigmoid, cur, "head.sigmoid");
}

template <typename T>
void compile_segmenter(ModelParams<T>& m) {
  const ArchSpec& s = m.spec;
  GraphBuilder<T> g(m);
  const std::size_t k = s.kernel_size;
  const std::size_t depth = s.stage_channels.size();
  std::vector<int> skips(depth, -1);
  int cur = 0;
  std::size_t c_prev = s.in_channels;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t c = s.stage_channels[i];
    const std::string stage = "enc" + std::to_string(i + 1);
    cur = g.layer_node(NodeOp::conv, cur, Kernel<T>::standard(k, k, c_prev, c), stage + ".conv");
    cur = g.unary(NodeOp::relu, cur, stage + ".conv.relu");
    c_prev = c;
    for (std::size_t b = 0; b < s.blocks_per_stage; ++b) {
      const std::string block = stage + ".block" + std::to_string(b + 1);
      if (s.use_separable) {
        cur = g.layer_node(NodeOp::depthwise, cur, Kernel<T>::depthwise(k, k, c), block + ".sep.depthwise");
        cur = g.layer_node(NodeOp::pointwise, cur, Kernel<T>::pointwise(c, c), block + ".sep.pointwise");
      } else {
        cur = g.layer_node(NodeOp::conv, cur, Kernel<T>::standard(k, k, c, c), block + ".conv");
      }
      cur = g.unary(NodeOp::relu, cur, block + ".relu");
    }
    skips[i] = cur;
    if (i + 1 < depth) cur = g.pool(cur, s.pool, stage + ".maxpool");
  }
  for (std::size_t i = depth - 1; i-- > 0;) {
    const std::size_t c = s.stage_channels[i];
    const std::size_t c_in = s.stage_channels[i + 1];
    const std::string stage = "dec" + std::to_string(i + 1);
    const int up_t = g.layer_node(NodeOp::transposed_conv, cur, Kernel<T>::standard(2, 2, c_in, c),
                                  stage + ".transposed_conv", 2);
    const int up_n = g.unary(NodeOp::upsample, cur, stage + ".upsample");
    const int up_p = g.layer_node(NodeOp::pointwise, up_n, Kernel<T>::pointwise(c_in, c),
                                  stage + ".upsample.pointwise");
    cur = g.add(up_t, up_p, stage + ".up.add");
    if (s.decoder_residual) cur = g.add(cur, skips[i], stage + ".residual");
    for (std::size_t b = 0; b < s.blocks_per_stage; ++b) {
      const std::string block = stage + ".block" + std::to_string(b + 1);
      cur = g.layer_node(NodeOp::conv, cur, Kernel<T>::standard(k, k, c, c), block + ".conv");
      cur = g.unary(NodeOp::relu, cur, block + ".relu");
    }
  }
  cur = g.layer_node(NodeOp::pointwise, cur, Kernel<T>::pointwise(s.stage_channels[0], 1), "head.pointwise");
  g.unary(NodeOp::sigmoid, cur, "head.sigmoid");
}

std::pair<double, double> fans(KernelKind kind, std::size_t kh, std::size_t kw, std::size_t in,
                               std::size_t out) {
  switch (kind) {
    case KernelKind::standard:
      return {static_cast<double>(kh * kw * in), static_cast<double>(kh * kw * out)};
    case KernelKind::depthwise:
      return {static_cast<double>(kh * kw), static_cast<double>(kh * kw)};
    case KernelKind::pointwise:
      return {static_cast<double>(in), static_cast<double>(out)};
  }
  return {1.0, 1.0};
}

template <typename T>
void initialize(ModelParams<T>& m, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    auto& k = m.layers[li];
    const auto [fan_in, fan_out] = fans(k.kind, k.kh, k.kw, k.in_channels, k.out_channels);
    const bool head = li + 1 == m.layers.size();
    const double limit = head ? std::sqrt(6.0 / (fan_in + fan_out)) : std::sqrt(6.0 / fan_in);
    for (auto& v : k.weights) v = static_cast<T>(rng.uniform(-limit, limit));
    std::fill(k.bias.begin(), k.bias.end(), T{0});
  }
}

}  // namespace

template <typename T>
ModelParams<T> allocate_model(const ArchSpec& spec) {
  spec.validate();
  ModelParams<T> m;
  m.spec = spec;
  if (spec.kind == ModelKind::classifier) {
    compile_classifier(m);
  } else {
    compile_segmenter(m);
  }
  return m;
}

template <typename T>
ModelParams<T> build_classifier(const ArchSpec& spec, std::uint64_t seed) {
  if (spec.kind != ModelKind::classifier) throw BuildError("build_classifier: spec kind is segmenter");
  ModelParams<T> m = allocate_model<T>(spec);
  initialize(m, seed);
  return m;
}

template <typename T>
ModelParams<T> build_segmenter(const ArchSpec& spec, std::uint64_t seed) {
  if (spec.kind != ModelKind::segmenter) throw BuildError("build_segmenter: spec kind is classifier");
  ModelParams<T> m = allocate_model<T>(spec);
  initialize(m, seed);
  return m;
}

template <typename T>
ModelParams<T> build_model(const ArchSpec& spec, std::uint64_t seed) {
  return spec.kind == ModelKind::classifier ? build_classifier<T>(spec, seed)
                                            : build_segmenter<T>(spec, seed);
}

template <typename T>
void zero_parameters(ModelParams<T>& model) {
  for (auto& k : model.layers) k = k.zeros_like();
}

// ---------------------------------------------------------------------------
// ModelParams

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& k : layers) n += param_count(k);
  return n;
}

template <typename T>
std::vector<T> ModelParams<T>::flatten() const {
  std::vector<T> out;
  out.reserve(parameter_count());
  for (const auto& k : layers) {
    out.insert(out.end(), k.weights.begin(), k.weights.end());
    out.insert(out.end(), k.bias.begin(), k.bias.end());
  }
  return out;
}

template <typename T>
void ModelParams<T>::assign(std::span<const T> values) {
  if (values.size() != parameter_count()) {
    throw ShapeError("model expects " + std::to_string(parameter_count()) + " parameters, got " +
                     std::to_string(values.size()));
  }
  std::size_t at = 0;
  for (auto& k : layers) {
    for (auto& v : k.weights) v = values[at++];
    for (auto& v : k.bias) v = values[at++];
  }
}

template <typename T>
std::uint64_t ModelParams<T>::digest() const {
  std::uint64_t h = fnv1a64(spec.to_text());
  std::string bytes;
  bytes.reserve(parameter_count() * 4);
  for (const T v : flatten()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  return fnv1a64(bytes, h);
}

// ---------------------------------------------------------------------------
// forward / backward

template <typename T>
Tensor4<T> forward(const ModelParams<T>& model, const Tensor4<T>& x, Trace<T>& trace) {
  const ArchSpec& s = model.spec;
  if (x.empty() || x.height() != s.input_height || x.width() != s.input_width ||
      x.channels() != s.in_channels) {
    throw ShapeError("model input " + x.shape().str() + " does not match spec input " +
                     std::to_string(s.input_height) + "x" + std::to_string(s.input_width) + "x" +
                     std::to_string(s.in_channels));
  }
  const auto& g = model.graph;
  trace.values.assign(g.size(), Tensor4<T>{});
  trace.argmax.assign(g.size(), {});
  trace.values[0] = x;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const Node& n = g[i];
    const auto& in = trace.values[static_cast<std::size_t>(n.lhs)];
    try {
      switch (n.op) {
        case NodeOp::conv:
          trace.values[i] = conv2d_forward(in, model.layers[n.layer], n.stride, n.pad);
          break;
        case NodeOp::depthwise:
          trace.values[i] = depthwise_forward(in, model.layers[n.layer], n.stride, n.pad);
          break;
        case NodeOp::pointwise:
          trace.values[i] = pointwise_forward(in, model.layers[n.layer]);
          break;
        case NodeOp::dense:
          trace.values[i] = dense_forward(in, model.layers[n.layer]);
          break;
        case NodeOp::transposed_conv:
          trace.values[i] = transposed_conv_forward(in, model.layers[n.layer], n.stride);
          break;
        case NodeOp::maxpool: {
          auto r = maxpool_forward(in, n.window, n.stride, n.pad);
          trace.values[i] = std::move(r.output);
          trace.argmax[i] = std::move(r.argmax);
          break;
        }
        case NodeOp::upsample:
          trace.values[i] = upsample2x_nearest(in);
          break;
        case NodeOp::relu:
          trace.values[i] = activation(in, Activation::relu);
          break;
        case NodeOp::sigmoid:
          trace.values[i] = activation(in, Activation::sigmoid);
          break;
        case NodeOp::add:
          trace.values[i] = add(in, trace.values[static_cast<std::size_t>(n.rhs)]);
          break;
        case NodeOp::input:
          throw ShapeError("input node in the middle of the graph");
      }
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + n.label + "': " + e.what());
    }
  }
  return trace.values.back();
}

template <typename T>
Tensor4<T> forward(const ModelParams<T>& model, const Tensor4<T>& x) {
  Trace<T> trace;
  return forward(model, x, trace);
}

namespace {

template <typename T>
void accumulate(Tensor4<T>& into, Tensor4<T>&& g) {
  if (into.empty()) {
    into = std::move(g);
  } else {
    add_in_place(into, g);
  }
}

template <typename T>
void accumulate(Kernel<T>& into, const Kernel<T>& g) {
  for (std::size_t i = 0; i < into.weights.size(); ++i) into.weights[i] += g.weights[i];
  for (std::size_t i = 0; i < into.bias.size(); ++i) into.bias[i] += g.bias[i];
}

template <typename T>
ModelGrad<T> run_backward(const ModelParams<T>& model, const Trace<T>& trace, std::size_t seed_node,
                          const Tensor4<T>& seed) {
  const auto& g = model.graph;
  if (trace.values.size() != g.size()) throw ShapeError("backward: trace does not match model");
  if (seed.shape() != trace.values[seed_node].shape()) {
    throw ShapeError("backward: gradient shape " + seed.shape().str() + " does not match output " +
                     trace.values[seed_node].shape().str());
  }
  ModelGrad<T> out;
  out.layers.reserve(model.layers.size());
  for (const auto& k : model.layers) out.layers.push_back(k.zeros_like());

  std::vector<Tensor4<T>> grads(g.size());
  grads[seed_node] = seed;
  for (std::size_t i = seed_node; i >= 1; --i) {
    if (grads[i].empty()) continue;
    const Node& n = g[i];
    const auto lhs = static_cast<std::size_t>(n.lhs);
    const auto& in = trace.values[lhs];
    const Tensor4<T>& go = grads[i];
    switch (n.op) {
      case NodeOp::conv: {
        auto r = conv2d_backward(in, model.layers[n.layer], n.stride, n.pad, go);
        accumulate(out.layers[n.layer], r.kernel);
        accumulate(grads[lhs], std::move(r.input));
        break;
      }
      case NodeOp::depthwise: {
        auto r = depthwise_backward(in, model.layers[n.layer], n.stride, n.pad, go);
        accumulate(out.layers[n.layer], r.kernel);
        accumulate(grads[lhs], std::move(r.input));
        break;
      }
      case NodeOp::pointwise: {
        auto r = pointwise_backward(in, model.layers[n.layer], go);
        accumulate(out.layers[n.layer], r.kernel);
        accumulate(grads[lhs], std::move(r.input));
        break;
      }
      case NodeOp::dense: {
        auto r = dense_backward(in, model.layers[n.layer], go);
        accumulate(out.layers[n.layer], r.kernel);
        accumulate(grads[lhs], std::move(r.input));
        break;
      }
      case NodeOp::transposed_conv: {
        auto r = transposed_conv_backward(in, model.layers[n.layer], n.stride, go);
        accumulate(out.layers[n.layer], r.kernel);
        accumulate(grads[lhs], std::move(r.input));
        break;
      }
      case NodeOp::maxpool:
        accumulate(grads[lhs], maxpool_backward(in.shape(), trace.argmax[i], go));
        break;
      case NodeOp::upsample:
        accumulate(grads[lhs], upsample2x_backward(go));
        break;
      case NodeOp::relu:
        accumulate(grads[lhs], activation_backward(in, Activation::relu, go));
        break;
      case NodeOp::sigmoid:
        accumulate(grads[lhs], activation_backward(in, Activation::sigmoid, go));
        break;
      case NodeOp::add: {
        Tensor4<T> copy = go;
        accumulate(grads[lhs], std::move(copy));
        Tensor4<T> copy2 = go;
        accumulate(grads[static_cast<std::size_t>(n.rhs)], std::move(copy2));
        break;
      }
      case NodeOp::input:
        break;
    }
    grads[i] = Tensor4<T>{};
  }
  out.input = grads[0].empty() ? Tensor4<T>(trace.values[0].shape()) : std::move(grads[0]);
  return out;
}

}  // namespace

template <typename T>
ModelGrad<T> backward(const ModelParams<T>& model, const Trace<T>& trace,
                      const Tensor4<T>& grad_output) {
  return run_backward(model, trace, model.graph.size() - 1, grad_output);
}

template <typename T>
ModelGrad<T> backward_from_logits(const ModelParams<T>& model, const Trace<T>& trace,
                                  const Tensor4<T>& grad_logits) {
  const Node& last = model.graph.back();
  if (last.op != NodeOp::sigmoid) throw ShapeError("backward_from_logits: model does not end in sigmoid");
  return run_backward(model, trace, static_cast<std::size_t>(last.lhs), grad_logits);
}

#define VRU_INSTANTIATE_MODEL(T)                                                             \
  template struct ModelParams<T>;                                                            \
  template ModelParams<T> allocate_model<T>(const ArchSpec&);                                \
  template ModelParams<T> build_classifier<T>(const ArchSpec&, std::uint64_t);              \
  template ModelParams<T> build_segmenter<T>(const ArchSpec&, std::uint64_t);               \
  template ModelParams<T> build_model<T>(const ArchSpec&, std::uint64_t);                   \
  template void zero_parameters(ModelParams<T>&);                                            \
  template Tensor4<T> forward(const ModelParams<T>&, const Tensor4<T>&);                     \
  template Tensor4<T> forward(const ModelParams<T>&, const Tensor4<T>&, Trace<T>&);          \
  template ModelGrad<T> backward(const ModelParams<T>&, const Trace<T>&, const Tensor4<T>&); \
  template ModelGrad<T> backward_from_logits(const ModelParams<T>&, const Trace<T>&,         \
                                             const Tensor4<T>&);

VRU_INSTANTIATE_MODEL(float)
VRU_INSTANTIATE_MODEL(double)

#undef VRU_INSTANTIATE_MODEL

}  // namespace vru
