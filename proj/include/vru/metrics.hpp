#pragma once

// Confusion-count metrics.
//
// Zero-denominator rule: a ratio whose denominator is zero is 0, except that
// precision, recall (= sensitivity), F1 and Dice are 1 when prediction and
// truth are both empty (tp = fp = fn = 0). Predicting "no lesion" on a
// lesion-free case is a perfect answer and should not drag per-case means
// down.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vru/volume.hpp"

namespace vru {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

// Any nonzero value counts as positive.
ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);
ConfusionCounts confusion(const Mask3& pred, const Mask3& truth);

// `standard` uses sensitivity = TP/(TP+FN) and specificity = TN/(TN+FP).
// `literal` reproduces the alternative published forms
// sensitivity = TP/(TP+FP) and specificity = TN/(TN+FN) for comparison.
enum class MetricConvention { standard, literal };

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

ClassificationMetrics classification_metrics(const ConfusionCounts& c,
                                             MetricConvention convention = MetricConvention::standard);

// 2TP / (FP + 2TP + FN).
double dice(const ConfusionCounts& c);

struct CaseMetrics {
  std::string case_id;
  ConfusionCounts counts;
  double dice = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

CaseMetrics evaluate_volume(const Mask3& pred, const Mask3& truth, std::string case_id = {});

enum class StdMode { population, sample };

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(std::span<const double> values, StdMode mode = StdMode::population);

struct SuiteSummary {
  std::size_t cases = 0;
  MeanStd dice;
  MeanStd precision;
  MeanStd recall;
  ConfusionCounts pooled;
};

SuiteSummary summarize(std::span<const CaseMetrics> cases, StdMode mode = StdMode::population);

}  // namespace vru
