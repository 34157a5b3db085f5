#include "vru/pipeline.hpp"

#include <chrono>

#include "vru/dataset.hpp"
#include "vru/error.hpp"
#include "vru/parallel.hpp"

namespace vru {

template <typename T>
PlaneModelPair<T>::PlaneModelPair(Plane plane, ModelParams<T> classifier, ModelParams<T> segmenter)
    : plane_(plane), classifier_(std::move(classifier)), segmenter_(std::move(segmenter)) {
  if (classifier_.spec.kind != ModelKind::classifier) {
    throw BuildError(to_string(plane) + ": classifier slot holds a segmenter");
  }
  if (segmenter_.spec.kind != ModelKind::segmenter) {
    throw BuildError(to_string(plane) + ": segmenter slot holds a classifier");
  }
}

template <typename T>
double PlaneModelPair<T>::classify(const Slice2D<float>& slice) const {
  const auto& s = classifier_.spec;
  const Tensor4<T> p = forward(classifier_, pad_slice<T>(slice, s.input_height, s.input_width));
  return static_cast<double>(p[0]);
}

template <typename T>
Slice2D<float> PlaneModelPair<T>::segment(const Slice2D<float>& slice) const {
  const auto& s = segmenter_.spec;
  const Tensor4<T> p = forward(segmenter_, pad_slice<T>(slice, s.input_height, s.input_width));
  return crop_slice(p, slice.rows, slice.cols);
}

template <typename T>
void PlaneModelPair<T>::check_dims(const Dims& dims) const {
  check_slice_fit(dims, plane_, classifier_.spec);
  check_slice_fit(dims, plane_, segmenter_.spec);
}

template class PlaneModelPair<float>;
template class PlaneModelPair<double>;

SliceOutcome process_slice(const SliceModels& models, const Slice2D<float>& slice, const PipelineConfig& config) {
  if (slice.data.size() != slice.rows * slice.cols) throw ShapeError("slice data does not match its dims");
  SliceOutcome out;
  out.cls_prob = models.classify(slice);
  out.gate_open = out.cls_prob >= config.gate_threshold;
  if (!out.gate_open) {
    out.seg = Slice2D<float>(slice.rows, slice.cols, 0.0f);
    return out;
  }
  out.seg = models.segment(slice);
  if (out.seg.rows != slice.rows || out.seg.cols != slice.cols) {
    throw ShapeError("segmenter returned " + std::to_string(out.seg.rows) + "x" + std::to_string(out.seg.cols) +
                     " for a " + std::to_string(slice.rows) + "x" + std::to_string(slice.cols) + " slice");
  }
  return out;
}

namespace {

std::size_t positives(const Slice2D<float>& seg, float threshold) {
  std::size_t n = 0;
  for (float p : seg.data) n += p >= threshold ? 1 : 0;
  return n;
}

}  // namespace

bool act_as_classification(const SliceModels& models, const Slice2D<float>& slice, const PipelineConfig& config) {
  const SliceOutcome o = process_slice(models, slice, config);
  return combine_labels(o.gate_open, positives(o.seg, config.pixel_threshold), config.min_pixels);
}

std::size_t PlaneResult::gate_open_count() const {
  std::size_t n = 0;
  for (auto g : gate_open) n += g;
  return n;
}

PlaneResult process_plane(const SliceModels& models, const Volume& normalized, const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Dims& dims = normalized.dims();
  models.check_dims(dims);
  const PlaneStack<float> stack = slice_volume(normalized, models.plane());
  const std::size_t n = stack.slices.size();

  PlaneResult r;
  r.plane = models.plane();
  r.cls_prob.assign(n, 0.0);
  r.gate_open.assign(n, 0);
  r.combined_label.assign(n, 0);
  r.probabilities.plane = r.plane;
  r.probabilities.slices.resize(n);
  parallel_for(n, config.threads, [&](std::size_t k) {
    SliceOutcome o = process_slice(models, stack.slices[k], config);
    r.cls_prob[k] = o.cls_prob;
    r.gate_open[k] = o.gate_open ? 1 : 0;
    r.combined_label[k] = combine_labels(o.gate_open, positives(o.seg, config.pixel_threshold), config.min_pixels);
    r.probabilities.slices[k] = std::move(o.seg);
  });
  r.segmenter_calls = r.gate_open_count();
  r.votes = binarize({r.probabilities, config.pixel_threshold});
  r.mask = per_plane_mask(r.votes, dims);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

PipelineResult process_volume(std::span<const SliceModels* const> models, const Volume& v,
                              const PipelineConfig& config) {
  config.rule.validate();
  if (models.size() != 3) throw std::invalid_argument("pipeline needs 3 plane model pairs, got " + std::to_string(models.size()));
  std::array<const SliceModels*, 3> by_plane{};
  for (const SliceModels* m : models) {
    if (m == nullptr) throw std::invalid_argument("pipeline: null model pair");
    auto& slot = by_plane[static_cast<std::size_t>(m->plane())];
    if (slot != nullptr) throw std::invalid_argument("pipeline: two model pairs for plane " + to_string(m->plane()));
    slot = m;
  }
  v.validate();
  const Volume normalized = normalize_volume(v);
  PipelineResult out;
  out.dims = v.dims();
  for (Plane p : kAllPlanes) {
    out.planes[static_cast<std::size_t>(p)] = process_plane(*by_plane[static_cast<std::size_t>(p)], normalized, config);
  }
  out.aggregated = aggregate_planes(out.planes[0].votes, out.planes[1].votes, out.planes[2].votes, out.dims, config.rule);
  return out;
}

}  // namespace vru
