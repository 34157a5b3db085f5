#pragma once

// Evaluation reports. The machine-readable record is JSON:
//
//   {
//     "schema": "vru-eval/1",
//     "std": "population" | "sample",
//     "sections": [
//       {"name": "aggregated",
//        "cases": [{"case_id": "...", "tp": 0, "fp": 0, "fn": 0, "tn": 0,
//                   "dice": 0.0, "precision": 0.0, "recall": 0.0}, ...],
//        "summary": {"cases": 0,
//                    "dice": {"mean": 0.0, "std": 0.0},
//                    "precision": {"mean": 0.0, "std": 0.0},
//                    "recall": {"mean": 0.0, "std": 0.0},
//                    "pooled": {"tp": 0, "fp": 0, "fn": 0, "tn": 0}}},
//       ...
//     ]
//   }

#include <string>
#include <vector>

#include <json.hpp>

#include "vru/metrics.hpp"

namespace vru {

struct ReportSection {
  std::string name;
  std::vector<CaseMetrics> cases;
};

nlohmann::json report_json(const std::vector<ReportSection>& sections, StdMode mode = StdMode::population);

// Fixed-width text table: one row per case, then "mean +- std" per section.
std::string report_table(const std::vector<ReportSection>& sections, StdMode mode = StdMode::population);

}  // namespace vru
