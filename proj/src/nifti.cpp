#include "vru/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "vru/bytes.hpp"
#include "vru/error.hpp"

namespace vru {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kMagicOffset = 344;

enum NiftiType : int { kUint8 = 2, kInt16 = 4, kFloat32 = 16 };

struct HeaderReader {
  const std::uint8_t* p;
  bool big_endian;

  template <typename U>
  U raw(std::size_t off) const {
    return big_endian ? bytes::get_be<U>(p + off) : bytes::get_le<U>(p + off);
  }
  std::int16_t i16(std::size_t off) const { return static_cast<std::int16_t>(raw<std::uint16_t>(off)); }
  std::int32_t i32(std::size_t off) const { return static_cast<std::int32_t>(raw<std::uint32_t>(off)); }
  float f32(std::size_t off) const { return std::bit_cast<float>(raw<std::uint32_t>(off)); }
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Volume read_nifti(const std::string& given) {
  std::string path = given;
  if (ends_with(path, ".img")) path.replace(path.size() - 4, 4, ".hdr");
  if (ends_with(path, ".gz")) throw UnsupportedError("nifti: compressed file '" + path + "' not supported");
  const std::vector<std::uint8_t> file = bytes::read_file(path);
  if (file.size() >= 2 && file[0] == 0x1f && file[1] == 0x8b) {
    throw UnsupportedError("nifti: '" + path + "' is gzip-compressed");
  }
  if (file.size() < kHeaderSize) {
    throw FormatError("nifti: '" + path + "' is " + std::to_string(file.size()) +
                      " bytes, shorter than the 348-byte header");
  }

  HeaderReader h{file.data(), false};
  if (h.i32(0) != static_cast<std::int32_t>(kHeaderSize)) {
    h.big_endian = true;
    if (h.i32(0) != static_cast<std::int32_t>(kHeaderSize)) {
      throw FormatError("nifti: sizeof_hdr at offset 0 is not 348 in either byte order");
    }
  }

  const char* magic = reinterpret_cast<const char*>(file.data() + kMagicOffset);
  const bool single = std::memcmp(magic, "n+1\0", 4) == 0;
  const bool pair = std::memcmp(magic, "ni1\0", 4) == 0;
  if (!single && !pair) {
    throw FormatError("nifti: bad magic at offset 344 (expected \"n+1\" or \"ni1\")");
  }

  const int ndim = h.i16(40);
  if (ndim < 1 || ndim > 7) throw FormatError("nifti: dim[0] = " + std::to_string(ndim) + " out of range");
  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = h.i16(40 + 2 * static_cast<std::size_t>(i));
  for (int i = 1; i <= ndim; ++i) {
    if (dim[i] < 1) throw FormatError("nifti: dim[" + std::to_string(i) + "] = " + std::to_string(dim[i]));
  }
  for (int i = 4; i <= ndim; ++i) {
    if (dim[i] > 1) throw UnsupportedError("nifti: only single-frame 3D volumes are supported");
  }
  Dims dims{static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(ndim >= 2 ? dim[2] : 1),
            static_cast<std::size_t>(ndim >= 3 ? dim[3] : 1)};

  const int datatype = h.i16(70);
  std::size_t bytes_per = 0;
  switch (datatype) {
    case kUint8: bytes_per = 1; break;
    case kInt16: bytes_per = 2; break;
    case kFloat32: bytes_per = 4; break;
    default:
      throw UnsupportedError("nifti: datatype " + std::to_string(datatype) +
                             " not supported (uint8, int16, float32 only)");
  }

  std::vector<std::uint8_t> image_file;
  const std::uint8_t* body = nullptr;
  std::size_t available = 0;
  if (single) {
    const float vox_offset = h.f32(108);
    if (!(vox_offset >= static_cast<float>(kHeaderSize)) || !std::isfinite(vox_offset)) {
      throw FormatError("nifti: vox_offset " + std::to_string(vox_offset) + " is before the end of the header");
    }
    const auto off = static_cast<std::size_t>(vox_offset);
    body = file.data() + std::min(off, file.size());
    available = file.size() > off ? file.size() - off : 0;
  } else {
    std::string img = path;
    if (ends_with(img, ".hdr")) {
      img.replace(img.size() - 4, 4, ".img");
    } else {
      img += ".img";
    }
    image_file = bytes::read_file(img);
    body = image_file.data();
    available = image_file.size();
  }
  const std::size_t needed = dims.voxel_count() * bytes_per;
  if (available < needed) {
    throw FormatError("nifti: truncated data, need " + std::to_string(needed) + " bytes, have " +
                      std::to_string(available));
  }

  const float slope = h.f32(112);
  const float inter = h.f32(116);
  const bool scale = slope != 0.0f && std::isfinite(slope) && std::isfinite(inter);
  HeaderReader d{body, h.big_endian};

  Volume v;
  v.intensity = Field3<float>(dims);
  for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
    float value = 0.0f;
    switch (datatype) {
      case kUint8: value = static_cast<float>(body[i]); break;
      case kInt16: value = static_cast<float>(d.i16(2 * i)); break;
      case kFloat32: value = d.f32(4 * i); break;
    }
    v.intensity.data[i] = scale ? value * slope + inter : value;
  }
  return v;
}

Mask3 read_nifti_mask(const std::string& path) {
  const Volume v = read_nifti(path);
  Mask3 m(v.dims());
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = v.intensity.data[i] != 0.0f ? 1 : 0;
  return m;
}

}  // namespace vru
