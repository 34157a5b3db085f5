#include "vru/metrics.hpp"

#include <cmath>

#include "vru/error.hpp"

namespace vru {

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("confusion: prediction has " + std::to_string(pred.size()) +
                     " elements, truth has " + std::to_string(truth.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (t) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

ConfusionCounts confusion(const Mask3& pred, const Mask3& truth) {
  if (pred.dims != truth.dims) {
    throw ShapeError("confusion: prediction dims " + pred.dims.str() + " != truth dims " +
                     truth.dims.str());
  }
  return confusion(std::span<const std::uint8_t>(pred.data), std::span<const std::uint8_t>(truth.data));
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool both_empty(const ConfusionCounts& c) { return c.tp == 0 && c.fp == 0 && c.fn == 0; }

}  // namespace

ClassificationMetrics classification_metrics(const ConfusionCounts& c, MetricConvention convention) {
  ClassificationMetrics m;
  if (both_empty(c)) {
    m.precision = 1.0;
    m.recall = 1.0;
    m.f1 = 1.0;
  } else {
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    const double s = m.precision + m.recall;
    m.f1 = s > 0.0 ? 2.0 * m.precision * m.recall / s : 0.0;
  }
  m.accuracy = ratio(c.tp + c.tn, c.total());
  if (convention == MetricConvention::standard) {
    m.sensitivity = m.recall;
    m.specificity = ratio(c.tn, c.tn + c.fp);
  } else {
    m.sensitivity = both_empty(c) ? 1.0 : ratio(c.tp, c.tp + c.fp);
    m.specificity = ratio(c.tn, c.tn + c.fn);
  }
  return m;
}

double dice(const ConfusionCounts& c) {
  if (both_empty(c)) return 1.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(c.fp + 2 * c.tp + c.fn);
}

CaseMetrics evaluate_volume(const Mask3& pred, const Mask3& truth, std::string case_id) {
  CaseMetrics m;
  m.case_id = std::move(case_id);
  m.counts = confusion(pred, truth);
  const auto cm = classification_metrics(m.counts);
  m.dice = dice(m.counts);
  m.precision = cm.precision;
  m.recall = cm.recall;
  return m;
}

MeanStd mean_std(std::span<const double> values, StdMode mode) {
  MeanStd r;
  if (values.empty()) return r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  const double n = static_cast<double>(values.size());
  const double den = mode == StdMode::population ? n : n - 1.0;
  r.std = den > 0.0 ? std::sqrt(ss / den) : 0.0;
  return r;
}

SuiteSummary summarize(std::span<const CaseMetrics> cases, StdMode mode) {
  SuiteSummary s;
  s.cases = cases.size();
  std::vector<double> d;
  std::vector<double> p;
  std::vector<double> r;
  for (const auto& c : cases) {
    d.push_back(c.dice);
    p.push_back(c.precision);
    r.push_back(c.recall);
    s.pooled += c.counts;
  }
  s.dice = mean_std(d, mode);
  s.precision = mean_std(p, mode);
  s.recall = mean_std(r, mode);
  return s;
}

}  // namespace vru
