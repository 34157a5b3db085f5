#include "vru/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vru/error.hpp"
#include "vru/raw_io.hpp"
#include "vru/rng.hpp"

namespace vru {

namespace fs = std::filesystem;

std::string to_string(Split split) {
  switch (split) {
    case Split::train2d: return "train2d";
    case Split::test2d: return "test2d";
    case Split::test3d: return "test3d";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train2d") return Split::train2d;
  if (name == "test2d") return Split::test2d;
  if (name == "test3d") return Split::test3d;
  throw FormatError("unknown split '" + name + "' (train2d, test2d, test3d)");
}

void write_manifest(const std::string& path, std::span<const CaseRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
  out << "# case_id\tvolume\tmask\tsplit\n";
  for (const auto& r : records) {
    out << r.case_id << '\t' << r.volume_path << '\t' << r.mask_path << '\t' << to_string(r.split) << '\n';
  }
  if (!out) throw std::runtime_error("short write to manifest '" + path + "'");
}

std::vector<CaseRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).string();
  };
  std::vector<CaseRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 4) {
      throw FormatError("manifest '" + path + "' line " + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                        std::to_string(cols.size()));
    }
    out.push_back({cols[0], resolve(cols[1]), resolve(cols[2]), parse_split(cols[3])});
  }
  return out;
}

std::vector<Split> split_cases(std::size_t n, double test3d_ratio, std::uint64_t seed, double test2d_ratio) {
  if (n == 0) throw std::invalid_argument("split_cases: empty case pool");
  if (!(test3d_ratio > 0.0 && test3d_ratio < 1.0)) {
    throw std::invalid_argument("split_cases: ratio " + std::to_string(test3d_ratio) + " not in (0, 1)");
  }
  if (!(test2d_ratio >= 0.0 && test2d_ratio < 1.0)) {
    throw std::invalid_argument("split_cases: 2D test ratio " + std::to_string(test2d_ratio) + " not in [0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto n3 = static_cast<std::size_t>(std::llround(test3d_ratio * static_cast<double>(n)));
  const std::size_t rest = n - n3;
  const auto n2 = static_cast<std::size_t>(std::llround(test2d_ratio * static_cast<double>(rest)));
  std::vector<Split> out(n, Split::train2d);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n3) {
      out[order[i]] = Split::test3d;
    } else if (i < n3 + n2) {
      out[order[i]] = Split::test2d;
    }
  }
  return out;
}

std::size_t SliceDataset::lesion_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.has_lesion ? 1 : 0;
  return n;
}

std::vector<std::uint8_t> lesion_slice_flags(const Mask3& mask, Plane plane) {
  const Dims& d = mask.dims;
  if (mask.data.size() != d.voxel_count()) throw ShapeError("mask length does not match dims " + d.str());
  std::vector<std::uint8_t> flags(slice_count(d, plane), 0);
  const std::uint8_t* data = mask.data.data();
  const std::size_t n = mask.data.size();
  const std::size_t plane_xy = d.x * d.y;
  // Masks are mostly zero: skip eight bytes at a time.
  std::size_t i = 0;
  while (i < n) {
    if (i + 8 <= n) {
      std::uint64_t word;
      std::memcpy(&word, data + i, 8);
      if (word == 0) {
        i += 8;
        continue;
      }
    }
    const std::size_t end = std::min(n, i + 8);
    for (; i < end; ++i) {
      if (data[i] == 0) continue;
      switch (plane) {
        case Plane::axial: flags[i / plane_xy] = 1; break;
        case Plane::sagittal: flags[i % d.x] = 1; break;
        case Plane::coronal: flags[(i / d.x) % d.y] = 1; break;
      }
    }
  }
  return flags;
}

void append_slices(SliceDataset& ds, const std::string& case_id, const Mask3& mask, Plane plane) {
  const auto flags = lesion_slice_flags(mask, plane);
  for (std::size_t k = 0; k < flags.size(); ++k) ds.entries.push_back({case_id, plane, k, flags[k] != 0});
}

SliceDataset extract_slices(std::span<const CaseMask> cases, Plane plane) {
  SliceDataset ds;
  for (const auto& c : cases) append_slices(ds, c.case_id, c.mask, plane);
  return ds;
}

namespace {

// Indices kept by majority undersampling, in original order.
std::vector<std::size_t> balanced_indices(const SliceDataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> lesion;
  std::vector<std::size_t> normal;
  for (std::size_t i = 0; i < ds.entries.size(); ++i) (ds.entries[i].has_lesion ? lesion : normal).push_back(i);
  if (lesion.empty() || normal.empty()) {
    throw std::invalid_argument("balance: need both classes, have " + std::to_string(lesion.size()) +
                                " lesion and " + std::to_string(normal.size()) + " normal slices");
  }
  std::vector<std::size_t>& majority = lesion.size() > normal.size() ? lesion : normal;
  Rng rng(seed);
  rng.shuffle(majority);
  majority.resize(std::min(lesion.size(), normal.size()));
  std::vector<std::size_t> kept;
  kept.reserve(2 * majority.size());
  kept.insert(kept.end(), lesion.begin(), lesion.end());
  kept.insert(kept.end(), normal.begin(), normal.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

SliceDataset balance_for_classification(const SliceDataset& ds, std::uint64_t seed) {
  SliceDataset out;
  out.balanced = true;
  for (auto i : balanced_indices(ds, seed)) out.entries.push_back(ds.entries[i]);
  return out;
}

SliceSplit stratified_holdout(const SliceDataset& ds, double test_ratio, std::uint64_t seed) {
  if (!(test_ratio >= 0.0 && test_ratio <= 1.0)) {
    throw std::invalid_argument("holdout ratio " + std::to_string(test_ratio) + " not in [0, 1]");
  }
  Rng rng(seed);
  std::vector<std::uint8_t> to_test(ds.entries.size(), 0);
  for (bool cls : {true, false}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
      if (ds.entries[i].has_lesion == cls) idx.push_back(i);
    }
    rng.shuffle(idx);
    const auto n_test = static_cast<std::size_t>(std::llround(test_ratio * static_cast<double>(idx.size())));
    for (std::size_t j = 0; j < n_test; ++j) to_test[idx[j]] = 1;
  }
  SliceSplit out;
  out.train.balanced = out.test.balanced = ds.balanced;
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    (to_test[i] ? out.test : out.train).entries.push_back(ds.entries[i]);
  }
  return out;
}

LoadedCase load_case(const CaseRecord& record) {
  Volume v = load_volume(record.volume_path);
  if (!record.mask_path.empty()) {
    Mask3 m = load_mask(record.mask_path);
    if (m.dims != v.dims()) {
      throw ShapeError("case '" + record.case_id + "': mask dims " + m.dims.str() + " != volume dims " +
                       v.dims().str());
    }
    v.mask = std::move(m);
  } else if (v.mask && v.mask->dims != v.dims()) {
    throw ShapeError("case '" + record.case_id + "': mask dims do not match volume dims");
  }
  return {record.case_id, normalize_volume(v)};
}

void check_slice_fit(const Dims& dims, Plane plane, const ArchSpec& spec) {
  const auto [rows, cols] = slice_shape(dims, plane);
  if (rows > spec.input_height || cols > spec.input_width) {
    throw ShapeError(to_string(plane) + " slices are " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " but the model input is " + std::to_string(spec.input_height) + "x" +
                     std::to_string(spec.input_width));
  }
}

template <typename T>
Tensor4<T> pad_slice(const Slice2D<float>& s, std::size_t height, std::size_t width) {
  if (s.rows > height || s.cols > width) {
    throw ShapeError("slice " + std::to_string(s.rows) + "x" + std::to_string(s.cols) + " exceeds model input " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  Tensor4<T> t({1, height, width, 1});
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) t(0, r, c, 0) = static_cast<T>(s.at(r, c));
  }
  return t;
}

template <typename T>
Slice2D<float> crop_slice(const Tensor4<T>& t, std::size_t rows, std::size_t cols) {
  if (t.batch() != 1 || t.height() < rows || t.width() < cols) {
    throw ShapeError("cannot crop " + std::to_string(rows) + "x" + std::to_string(cols) + " from " +
                     t.shape().str());
  }
  Slice2D<float> s(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) s.at(r, c) = static_cast<float>(t(0, r, c, 0));
  }
  return s;
}

namespace {

template <typename T>
Tensor4<T> mask_slice_tensor(const Mask3& m, Plane plane, std::size_t k, std::size_t height, std::size_t width) {
  const auto [rows, cols] = slice_shape(m.dims, plane);
  Tensor4<T> t({1, height, width, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      t(0, r, c, 0) = m.data[voxel_index(m.dims, plane, k, r, c)] ? T{1} : T{0};
    }
  }
  return t;
}

template <typename T>
Tensor4<T> image_slice_tensor(const Volume& v, Plane plane, std::size_t k, std::size_t height, std::size_t width) {
  const auto [rows, cols] = slice_shape(v.dims(), plane);
  Tensor4<T> t({1, height, width, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      t(0, r, c, 0) = static_cast<T>(v.intensity.data[voxel_index(v.dims(), plane, k, r, c)]);
    }
  }
  return t;
}

const Mask3& require_mask(const LoadedCase& c) {
  if (!c.volume.mask) throw std::invalid_argument("case '" + c.case_id + "' has no mask");
  return *c.volume.mask;
}

}  // namespace

template <typename T>
SampleSet<T> classification_samples(std::span<const LoadedCase> cases, Plane plane, const ArchSpec& spec,
                                    std::uint64_t seed) {
  SliceDataset all;
  std::vector<std::size_t> case_of;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    check_slice_fit(cases[i].volume.dims(), plane, spec);
    const std::size_t before = all.size();
    append_slices(all, cases[i].case_id, require_mask(cases[i]), plane);
    case_of.insert(case_of.end(), all.size() - before, i);
  }
  SampleSet<T> out;
  for (auto i : balanced_indices(all, seed)) {
    const SliceEntry& e = all.entries[i];
    const auto& v = cases[case_of[i]].volume;
    out.inputs.push_back(image_slice_tensor<T>(v, plane, e.slice_index, spec.input_height, spec.input_width));
    out.targets.push_back(Tensor4<T>({1, 1, 1, 1}, e.has_lesion ? T{1} : T{0}));
  }
  return out;
}

template <typename T>
SampleSet<T> segmentation_samples(std::span<const LoadedCase> cases, Plane plane, const ArchSpec& spec) {
  SampleSet<T> out;
  for (const auto& c : cases) {
    check_slice_fit(c.volume.dims(), plane, spec);
    const Mask3& m = require_mask(c);
    const auto flags = lesion_slice_flags(m, plane);
    for (std::size_t k = 0; k < flags.size(); ++k) {
      if (!flags[k]) continue;
      out.inputs.push_back(image_slice_tensor<T>(c.volume, plane, k, spec.input_height, spec.input_width));
      out.targets.push_back(mask_slice_tensor<T>(m, plane, k, spec.input_height, spec.input_width));
    }
  }
  return out;
}

#define VRU_INSTANTIATE_DATASET(T)                                                                       \
  template Tensor4<T> pad_slice(const Slice2D<float>&, std::size_t, std::size_t);                        \
  template Slice2D<float> crop_slice(const Tensor4<T>&, std::size_t, std::size_t);                       \
  template SampleSet<T> classification_samples(std::span<const LoadedCase>, Plane, const ArchSpec&,      \
                                               std::uint64_t);                                           \
  template SampleSet<T> segmentation_samples(std::span<const LoadedCase>, Plane, const ArchSpec&);

VRU_INSTANTIATE_DATASET(float)
VRU_INSTANTIATE_DATASET(double)

#undef VRU_INSTANTIATE_DATASET

}  // namespace vru
