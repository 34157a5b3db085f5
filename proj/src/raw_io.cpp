#include "vru/raw_io.hpp"

#include <fstream>
#include <optional>

#include <json.hpp>

#include "vru/bytes.hpp"
#include "vru/nifti.hpp"

namespace vru {

namespace {

using json = nlohmann::json;

std::string sidecar_path(const std::string& path) { return path + ".json"; }

json header_for(const Dims& d, bool intensity, bool mask) {
  json fields = json::array();
  if (intensity) fields.push_back({{"name", "intensity"}, {"dtype", "float32"}});
  if (mask) fields.push_back({{"name", "mask"}, {"dtype", "uint8"}});
  return {{"format", "vru-raw"},
          {"version", 1},
          {"dims", {d.x, d.y, d.z}},
          {"axis_order", "x-fastest"},
          {"axes", {{"x", "left-right"}, {"y", "anterior-posterior"}, {"z", "superior-inferior"}}},
          {"endianness", "little"},
          {"fields", fields}};
}

void write_pair(const std::string& path, const json& header, const std::vector<std::uint8_t>& body) {
  bytes::write_file(path, body);
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + sidecar_path(path) + "'");
  out << header.dump(2) << "\n";
  if (!out) throw std::runtime_error("short write to '" + sidecar_path(path) + "'");
}

struct RawContents {
  Dims dims;
  std::optional<std::vector<float>> intensity;
  std::optional<std::vector<std::uint8_t>> mask;
};

RawContents read_pair(const std::string& path) {
  const std::string side = sidecar_path(path);
  std::ifstream in(side);
  if (!in) throw std::runtime_error("cannot open sidecar '" + side + "'");
  json h;
  try {
    h = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("raw: sidecar '" + side + "' is not valid JSON: " + e.what());
  }
  RawContents r;
  std::vector<std::pair<std::string, std::size_t>> layout;
  try {
    if (h.at("format").get<std::string>() != "vru-raw") throw FormatError("raw: '" + side + "' is not a vru-raw sidecar");
    if (h.at("version").get<int>() != 1) throw UnsupportedError("raw: unsupported version in '" + side + "'");
    if (h.at("endianness").get<std::string>() != "little") {
      throw UnsupportedError("raw: only little-endian bodies are supported");
    }
    if (h.at("axis_order").get<std::string>() != "x-fastest") {
      throw UnsupportedError("raw: only x-fastest axis order is supported");
    }
    const auto& d = h.at("dims");
    if (!d.is_array() || d.size() != 3) throw FormatError("raw: dims must be [X, Y, Z]");
    r.dims = {d[0].get<std::size_t>(), d[1].get<std::size_t>(), d[2].get<std::size_t>()};
    for (const auto& f : h.at("fields")) {
      const auto name = f.at("name").get<std::string>();
      const auto dtype = f.at("dtype").get<std::string>();
      if (name == "intensity" && dtype == "float32") {
        layout.emplace_back(name, 4);
      } else if (name == "mask" && dtype == "uint8") {
        layout.emplace_back(name, 1);
      } else {
        throw UnsupportedError("raw: field '" + name + "' with dtype '" + dtype + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("raw: malformed sidecar '" + side + "': " + e.what());
  }

  const std::vector<std::uint8_t> body = bytes::read_file(path);
  const std::size_t n = r.dims.voxel_count();
  std::size_t expected = 0;
  for (const auto& [name, width] : layout) expected += n * width;
  if (body.size() != expected) {
    throw FormatError("raw: body of '" + path + "' is " + std::to_string(body.size()) +
                      " bytes, sidecar dims " + r.dims.str() + " need " + std::to_string(expected));
  }
  const std::uint8_t* p = body.data();
  for (const auto& [name, width] : layout) {
    if (name == "intensity") {
      std::vector<float> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = bytes::get_f32(p + 4 * i);
      r.intensity = std::move(v);
    } else {
      r.mask = std::vector<std::uint8_t>(p, p + n);
    }
    p += n * width;
  }
  return r;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_nifti(const std::string& path) {
  return has_suffix(path, ".nii") || has_suffix(path, ".hdr") || has_suffix(path, ".img") ||
         has_suffix(path, ".nii.gz");
}

}  // namespace

void write_raw(const Volume& v, const std::string& path) {
  v.validate();
  const std::size_t n = v.dims().voxel_count();
  std::vector<std::uint8_t> body;
  body.reserve(n * (v.mask ? 5 : 4));
  for (float x : v.intensity.data) bytes::put_f32(body, x);
  if (v.mask) body.insert(body.end(), v.mask->data.begin(), v.mask->data.end());
  write_pair(path, header_for(v.dims(), true, v.mask.has_value()), body);
}

Volume read_raw(const std::string& path) {
  RawContents r = read_pair(path);
  if (!r.intensity) throw FormatError("raw: '" + path + "' has no intensity field");
  Volume v;
  v.intensity = Field3<float>(r.dims, std::move(*r.intensity));
  if (r.mask) v.mask = Mask3(r.dims, std::move(*r.mask));
  return v;
}

void write_mask_raw(const Mask3& mask, const std::string& path) {
  if (mask.data.size() != mask.dims.voxel_count()) throw ShapeError("mask length does not match dims");
  write_pair(path, header_for(mask.dims, false, true), mask.data);
}

Mask3 read_mask_raw(const std::string& path) {
  RawContents r = read_pair(path);
  if (!r.mask) throw FormatError("raw: '" + path + "' has no mask field");
  return Mask3(r.dims, std::move(*r.mask));
}

Volume load_volume(const std::string& path) { return is_nifti(path) ? read_nifti(path) : read_raw(path); }

Mask3 load_mask(const std::string& path) {
  return is_nifti(path) ? read_nifti_mask(path) : read_mask_raw(path);
}

}  // namespace vru
