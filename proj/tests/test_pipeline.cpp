#include <gtest/gtest.h>

#include <atomic>
#include <functional>

#include "vru/dataset.hpp"
#include "vru/pipeline.hpp"
#include "vru/synth.hpp"

namespace vru {
namespace {

// Classifier probability from a rule on the slice; the segmenter echoes the
// slice intensities. Calls are counted.
class FakeModels final : public SliceModels {
 public:
  FakeModels(Plane p, std::function<double(const Slice2D<float>&)> rule) : plane_(p), rule_(std::move(rule)) {}

  Plane plane() const override { return plane_; }
  double classify(const Slice2D<float>& s) const override {
    ++classify_calls;
    return rule_(s);
  }
  Slice2D<float> segment(const Slice2D<float>& s) const override {
    ++segment_calls;
    return s;
  }

  mutable std::atomic<std::size_t> classify_calls{0};
  mutable std::atomic<std::size_t> segment_calls{0};

 private:
  Plane plane_;
  std::function<double(const Slice2D<float>&)> rule_;
};

Slice2D<float> ramp(std::size_t rows, std::size_t cols) {
  Slice2D<float> s(rows, cols);
  for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = static_cast<float>(i) / static_cast<float>(s.data.size());
  return s;
}

double slice_min(const Slice2D<float>& s) { return *std::min_element(s.data.begin(), s.data.end()); }

Volume phantom(std::uint64_t seed, Dims d) {
  SynthSpec spec;
  spec.lesion_count = 2;
  return synth_volume(seed, d, spec);
}

TEST(ProcessSlice, ClosedGateSkipsTheSegmenter) {
  FakeModels m(Plane::axial, [](const auto&) { return 0.0; });
  const auto out = process_slice(m, ramp(3, 4), {});
  EXPECT_FALSE(out.gate_open);
  EXPECT_EQ(out.seg, Slice2D<float>(3, 4, 0.0f));
  EXPECT_EQ(m.segment_calls, 0u);
}

TEST(ProcessSlice, OpenGatePassesTheSegmentation) {
  FakeModels m(Plane::axial, [](const auto&) { return 1.0; });
  const auto s = ramp(3, 4);
  const auto out = process_slice(m, s, {});
  EXPECT_TRUE(out.gate_open);
  EXPECT_EQ(out.seg, s);
  EXPECT_EQ(m.segment_calls, 1u);
}

TEST(ProcessSlice, GateBoundaryIsInclusive) {
  FakeModels m(Plane::axial, [](const auto&) { return 0.5; });
  EXPECT_TRUE(process_slice(m, ramp(2, 2), {}).gate_open);
  PipelineConfig cfg;
  cfg.gate_threshold = std::nextafter(0.5, 1.0);
  EXPECT_FALSE(process_slice(m, ramp(2, 2), cfg).gate_open);
}

TEST(ActAsClassification, TruthTable) {
  FakeModels open(Plane::axial, [](const auto&) { return 0.9; });
  FakeModels closed(Plane::axial, [](const auto&) { return 0.1; });
  const Slice2D<float> empty(3, 3, 0.0f);
  const Slice2D<float> lit(3, 3, 0.8f);
  EXPECT_FALSE(act_as_classification(open, empty, {}));
  EXPECT_TRUE(act_as_classification(open, lit, {}));
  EXPECT_FALSE(act_as_classification(closed, lit, {}));
  EXPECT_FALSE(act_as_classification(closed, empty, {}));
  PipelineConfig strict;
  strict.min_pixels = 10;
  EXPECT_FALSE(act_as_classification(open, lit, strict));
  EXPECT_TRUE(combine_labels(true, 1, 1));
  EXPECT_FALSE(combine_labels(true, 0, 1));
  EXPECT_FALSE(combine_labels(false, 5, 1));
}

TEST(ProcessVolume, ClosedGatesGiveAnEmptyMask) {
  const auto v = phantom(1, {10, 12, 9});
  FakeModels a(Plane::axial, [](const auto&) { return 0.0; });
  FakeModels s(Plane::sagittal, [](const auto&) { return 0.0; });
  FakeModels c(Plane::coronal, [](const auto&) { return 0.0; });
  const std::vector<const SliceModels*> models{&a, &s, &c};
  const auto r = process_volume(models, v, {});
  EXPECT_EQ(r.aggregated, Mask3(v.dims()));
  EXPECT_EQ(a.segment_calls + s.segment_calls + c.segment_calls, 0u);
  EXPECT_EQ(a.classify_calls, 9u);
  EXPECT_EQ(s.classify_calls, 10u);
  EXPECT_EQ(c.classify_calls, 12u);
}

struct Run {
  PipelineResult result;
  std::array<std::size_t, 3> calls;
};

Run run_fakes(const Volume& v, const PipelineConfig& cfg) {
  auto rule = [](const Slice2D<float>& s) { return slice_min(s) < 0.2 ? 0.7 : 0.2; };
  FakeModels a(Plane::axial, rule), s(Plane::sagittal, rule), c(Plane::coronal, rule);
  // Order of the pairs does not matter.
  const std::vector<const SliceModels*> models{&c, &a, &s};
  Run run{process_volume(models, v, cfg), {a.segment_calls, s.segment_calls, c.segment_calls}};
  return run;
}

void expect_same(const PipelineResult& x, const PipelineResult& y) {
  EXPECT_EQ(x.aggregated, y.aggregated);
  for (std::size_t p = 0; p < 3; ++p) {
    EXPECT_EQ(x.planes[p].cls_prob, y.planes[p].cls_prob);
    EXPECT_EQ(x.planes[p].probabilities, y.planes[p].probabilities);
    EXPECT_EQ(x.planes[p].votes, y.planes[p].votes);
    EXPECT_EQ(x.planes[p].mask, y.planes[p].mask);
    EXPECT_EQ(x.planes[p].combined_label, y.planes[p].combined_label);
  }
}

TEST(ProcessVolume, PropertiesOfTheFusedMask) {
  const auto v = phantom(2, {12, 10, 14});
  const auto run = run_fakes(v, {});
  const auto& r = run.result;
  EXPECT_EQ(r.dims, v.dims());
  for (Plane p : kAllPlanes) {
    const auto& pr = r.plane(p);
    EXPECT_EQ(pr.plane, p);
    EXPECT_EQ(pr.segmenter_calls, pr.gate_open_count());
    EXPECT_EQ(run.calls[static_cast<std::size_t>(p)], pr.gate_open_count());
    EXPECT_GT(pr.gate_open_count(), 0u);
    EXPECT_LT(pr.gate_open_count(), slice_count(v.dims(), p));
    EXPECT_EQ(pr.mask, per_plane_mask(pr.votes, v.dims()));
    for (std::size_t i = 0; i < r.aggregated.data.size(); ++i) EXPECT_LE(r.aggregated.data[i], pr.mask.data[i]);
    for (std::size_t k = 0; k < pr.gate_open.size(); ++k) {
      if (!pr.gate_open[k]) {
        EXPECT_EQ(pr.combined_label[k], 0);
        for (float x : pr.probabilities.slices[k].data) EXPECT_EQ(x, 0.0f);
      }
    }
  }
}

TEST(ProcessVolume, DeterministicAcrossRunsAndThreads) {
  const auto v = phantom(3, {10, 10, 12});
  PipelineConfig one;
  PipelineConfig many;
  many.threads = 3;
  const auto a = run_fakes(v, one);
  expect_same(a.result, run_fakes(v, one).result);
  expect_same(a.result, run_fakes(v, many).result);
}

TEST(ProcessVolume, LowerVoteThresholdKeepsMore) {
  const auto v = phantom(4, {10, 10, 12});
  PipelineConfig cfg;
  cfg.rule.vote_threshold = 1;
  const auto t1 = run_fakes(v, cfg).result.aggregated;
  cfg.rule.vote_threshold = 3;
  const auto t3 = run_fakes(v, cfg).result.aggregated;
  for (std::size_t i = 0; i < t1.data.size(); ++i) EXPECT_LE(t3.data[i], t1.data[i]);
}

TEST(ProcessVolume, RejectsBadModelSets) {
  const auto v = phantom(5, {10, 10, 10});
  auto rule = [](const auto&) { return 0.0; };
  FakeModels a(Plane::axial, rule), a2(Plane::axial, rule), c(Plane::coronal, rule);
  EXPECT_THROW(process_volume(std::vector<const SliceModels*>{&a, &a2, &c}, v, {}), std::invalid_argument);
  EXPECT_THROW(process_volume(std::vector<const SliceModels*>{&a, &c}, v, {}), std::invalid_argument);
}

ArchSpec sized(ArchSpec s) {
  s.stage_channels = {2, 4};
  s.dense_units = 4;
  return s;
}

TEST(PlaneModelPair, PadsAndCropsNonSquareSlices) {
  const Dims d{12, 10, 14};
  const auto v = normalize_volume(phantom(6, d));
  std::vector<std::unique_ptr<PlaneModelPair<float>>> pairs;
  std::vector<const SliceModels*> models;
  std::uint64_t seed = 1;
  for (Plane p : kAllPlanes) {
    pairs.push_back(std::make_unique<PlaneModelPair<float>>(
        p, build_model<float>(sized(ArchSpec::classifier_defaults(16, 16)), seed),
        build_model<float>(sized(ArchSpec::segmenter_defaults(16, 16)), seed + 1)));
    seed += 2;
    pairs.back()->check_dims(d);
    models.push_back(pairs.back().get());
  }
  PipelineConfig cfg;
  cfg.gate_threshold = 0.0;
  const auto r = process_volume(models, v, cfg);
  for (Plane p : kAllPlanes) {
    const auto [rows, cols] = slice_shape(d, p);
    const auto& pr = r.plane(p);
    ASSERT_EQ(pr.probabilities.slices.size(), slice_count(d, p));
    EXPECT_EQ(pr.probabilities.slices[0].rows, rows);
    EXPECT_EQ(pr.probabilities.slices[0].cols, cols);
    EXPECT_EQ(pr.gate_open_count(), slice_count(d, p));
    // The crop is the top-left window of the padded forward pass.
    const auto& pair = *pairs[static_cast<std::size_t>(p)];
    const auto slice = slice_volume(v, p).slices[1];
    const auto full = forward(pair.segmenter(), pad_slice<float>(slice, 16, 16));
    EXPECT_EQ(pr.probabilities.slices[1], crop_slice(full, rows, cols));
  }
}

TEST(PlaneModelPair, TooSmallInputsAreRejected) {
  PlaneModelPair<float> pair(Plane::sagittal, build_model<float>(sized(ArchSpec::classifier_defaults(8, 16)), 1),
                             build_model<float>(sized(ArchSpec::segmenter_defaults(16, 16)), 2));
  EXPECT_THROW(pair.check_dims(Dims{12, 10, 14}), ShapeError);
}

TEST(PlaneModelPair, KindsMustMatchTheSlots) {
  const auto cls = build_model<float>(sized(ArchSpec::classifier_defaults(16, 16)), 1);
  const auto seg = build_model<float>(sized(ArchSpec::segmenter_defaults(16, 16)), 2);
  EXPECT_THROW(PlaneModelPair<float>(Plane::axial, seg, cls), BuildError);
  EXPECT_THROW(PlaneModelPair<float>(Plane::axial, cls, cls), BuildError);
  EXPECT_NO_THROW(PlaneModelPair<float>(Plane::axial, cls, seg));
}

}  // namespace
}  // namespace vru
