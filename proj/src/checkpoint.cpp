#include "vru/checkpoint.hpp"

#include "vru/bytes.hpp"
#include "vru/error.hpp"

namespace vru {

namespace {
constexpr char kMagic[4] = {'V', 'R', 'U', 'W'};
}

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const ModelParams<T>& model) {
  const std::string spec = model.spec.to_text();
  const std::vector<T> params = model.flatten();
  std::vector<std::uint8_t> out;
  out.reserve(28 + spec.size() + 4 * params.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  bytes::put_le<std::uint32_t>(out, kCheckpointVersion);
  bytes::put_le<std::uint64_t>(out, model.spec.digest());
  bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.size()));
  out.insert(out.end(), spec.begin(), spec.end());
  bytes::put_le<std::uint64_t>(out, params.size());
  for (const T v : params) bytes::put_f32(out, static_cast<float>(v));
  return out;
}

template <typename T>
ModelParams<T> decode_checkpoint(const std::vector<std::uint8_t>& data) {
  if (data.size() < 20 || !std::equal(std::begin(kMagic), std::end(kMagic), data.begin())) {
    throw FormatError("checkpoint: bad magic at offset 0 (expected \"VRUW\")");
  }
  const auto version = bytes::get_le<std::uint32_t>(&data[4]);
  if (version != kCheckpointVersion) {
    throw UnsupportedError("checkpoint: version " + std::to_string(version) + " not supported");
  }
  const auto digest = bytes::get_le<std::uint64_t>(&data[8]);
  const auto spec_len = bytes::get_le<std::uint32_t>(&data[16]);
  if (data.size() < 28ull + spec_len) throw FormatError("checkpoint: truncated header");
  const std::string spec_text(data.begin() + 20, data.begin() + 20 + spec_len);
  const ArchSpec spec = ArchSpec::parse(spec_text);
  if (spec.digest() != digest) throw FormatError("checkpoint: arch spec digest mismatch");
  const auto count = bytes::get_le<std::uint64_t>(&data[20 + spec_len]);
  const std::size_t body = 28 + spec_len;
  if (data.size() != body + 4 * count) {
    throw FormatError("checkpoint: expected " + std::to_string(body + 4 * count) + " bytes, file has " +
                      std::to_string(data.size()));
  }
  ModelParams<T> model = allocate_model<T>(spec);
  if (model.parameter_count() != count) {
    throw FormatError("checkpoint: spec needs " + std::to_string(model.parameter_count()) +
                      " parameters, file stores " + std::to_string(count));
  }
  std::vector<T> params(count);
  for (std::size_t i = 0; i < count; ++i) params[i] = static_cast<T>(bytes::get_f32(&data[body + 4 * i]));
  model.assign(params);
  return model;
}

template <typename T>
void save_checkpoint(const ModelParams<T>& model, const std::string& path) {
  bytes::write_file(path, encode_checkpoint(model));
}

template <typename T>
ModelParams<T> load_checkpoint(const std::string& path) {
  return decode_checkpoint<T>(bytes::read_file(path));
}

template std::vector<std::uint8_t> encode_checkpoint(const ModelParams<float>&);
template std::vector<std::uint8_t> encode_checkpoint(const ModelParams<double>&);
template ModelParams<float> decode_checkpoint<float>(const std::vector<std::uint8_t>&);
template ModelParams<double> decode_checkpoint<double>(const std::vector<std::uint8_t>&);
template void save_checkpoint(const ModelParams<float>&, const std::string&);
template void save_checkpoint(const ModelParams<double>&, const std::string&);
template ModelParams<float> load_checkpoint<float>(const std::string&);
template ModelParams<double> load_checkpoint<double>(const std::string&);

}  // namespace vru
