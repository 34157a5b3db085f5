#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vru/rng.hpp"

namespace vru::testing {

// One randomized instance; returns its error measure.
using Check = std::function<double(Rng&)>;

struct NamedCheck {
  std::string name;
  Check run;
};

// f64 central-difference checks of every layer kind's backward pass. The
// error is ||analytic - numeric|| / max(||analytic||, ||numeric||) over the
// input and all parameters.
std::vector<NamedCheck> gradient_checks();

// Whole-network checks through backward_from_logits with the fused BCE seed.
std::vector<NamedCheck> model_gradient_checks();

// f32 forward ops against double-precision references built from the
// definitions; error is max |a - b| / max |b|.
std::vector<NamedCheck> oracle_checks();

// |<T x, y> - <x, T^t y>| / max(|<T x, y>|, |<x, T^t y>|) for a bias-free
// transposed conv in f64.
double transposed_adjoint_error(Rng& rng);

// 0 when separable_forward equals pointwise(depthwise(x)) bit for bit,
// otherwise the number of differing elements.
double separable_mismatches(Rng& rng);

// Randomized property trials; each returns an empty string on success or a
// description of the first violated property.

// Tri-plane voting against a voxel-space vote count: every T, monotonicity
// in T, argument order, single-plane equivalence and FP(T=3) <= FP(plane).
std::string aggregation_trial(Rng& rng);

// Combined-classifier labels on a random labeled slice set: the decision
// rule, count dominance, specificity never drops, sensitivity never rises
// and stays equal unless a true lesion slice is rejected.
std::string combined_classifier_trial(Rng& rng);

// Confusion tally, label-inversion symmetry, Dice == F1, ranges, and both
// sensitivity/specificity conventions.
std::string metric_identity_trial(Rng& rng);

}  // namespace vru::testing
