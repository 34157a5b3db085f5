#include "vru/aggregation.hpp"

#include <stdexcept>
#include <string>

namespace vru {

void AggregationRule::validate() const {
  if (vote_threshold < 1 || vote_threshold > 3) {
    throw std::invalid_argument("vote threshold must be 1, 2 or 3, got " +
                                std::to_string(vote_threshold));
  }
}

PlaneStack<std::uint8_t> binarize(const PlanePrediction& pred) {
  PlaneStack<std::uint8_t> out;
  out.plane = pred.probabilities.plane;
  out.slices.reserve(pred.probabilities.slices.size());
  for (const auto& s : pred.probabilities.slices) {
    Slice2D<std::uint8_t> b(s.rows, s.cols);
    for (std::size_t i = 0; i < s.data.size(); ++i) b.data[i] = s.data[i] >= pred.threshold ? 1 : 0;
    out.slices.push_back(std::move(b));
  }
  return out;
}

Mask3 aggregate_planes(const PlaneStack<std::uint8_t>& a, const PlaneStack<std::uint8_t>& b,
                       const PlaneStack<std::uint8_t>& c, const Dims& dims, AggregationRule rule) {
  rule.validate();
  const Mask3 ma = reassemble(a, dims);
  const Mask3 mb = reassemble(b, dims);
  const Mask3 mc = reassemble(c, dims);
  Mask3 out(dims);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const int votes = (ma.data[i] != 0) + (mb.data[i] != 0) + (mc.data[i] != 0);
    out.data[i] = votes >= rule.vote_threshold ? 1 : 0;
  }
  return out;
}

Mask3 per_plane_mask(const PlaneStack<std::uint8_t>& votes, const Dims& dims) {
  Mask3 m = reassemble(votes, dims);
  for (auto& v : m.data) v = v != 0 ? 1 : 0;
  return m;
}

}  // namespace vru
