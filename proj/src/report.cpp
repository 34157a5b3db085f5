#include "vru/report.hpp"

#include <cstdio>

namespace vru {

namespace {

nlohmann::json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string format(const char* fmt, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

}  // namespace

nlohmann::json report_json(const std::vector<ReportSection>& sections, StdMode mode) {
  nlohmann::json out;
  out["schema"] = "vru-eval/1";
  out["std"] = mode == StdMode::population ? "population" : "sample";
  out["sections"] = nlohmann::json::array();
  for (const auto& s : sections) {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : s.cases) {
      nlohmann::json j = counts_json(c.counts);
      j["case_id"] = c.case_id;
      j["dice"] = c.dice;
      j["precision"] = c.precision;
      j["recall"] = c.recall;
      cases.push_back(std::move(j));
    }
    const SuiteSummary sum = summarize(s.cases, mode);
    out["sections"].push_back({{"name", s.name},
                               {"cases", std::move(cases)},
                               {"summary",
                                {{"cases", sum.cases},
                                 {"dice", mean_std_json(sum.dice)},
                                 {"precision", mean_std_json(sum.precision)},
                                 {"recall", mean_std_json(sum.recall)},
                                 {"pooled", counts_json(sum.pooled)}}}});
  }
  return out;
}

std::string report_table(const std::vector<ReportSection>& sections, StdMode mode) {
  std::string out;
  char line[256];
  for (const auto& s : sections) {
    out += "== " + s.name + " ==\n";
    std::snprintf(line, sizeof line, "%-24s %8s %10s %10s %10s %8s %8s\n", "case", "dice", "precision", "recall",
                  "tp", "fp", "fn");
    out += line;
    for (const auto& c : s.cases) {
      std::snprintf(line, sizeof line, "%-24s %8.4f %10.4f %10.4f %10llu %8llu %8llu\n", c.case_id.c_str(), c.dice,
                    c.precision, c.recall, static_cast<unsigned long long>(c.counts.tp),
                    static_cast<unsigned long long>(c.counts.fp), static_cast<unsigned long long>(c.counts.fn));
      out += line;
    }
    const SuiteSummary sum = summarize(s.cases, mode);
    out += "dice      " + format("%.4f +- %.4f", sum.dice.mean, sum.dice.std) + "\n";
    out += "precision " + format("%.4f +- %.4f", sum.precision.mean, sum.precision.std) + "\n";
    out += "recall    " + format("%.4f +- %.4f", sum.recall.mean, sum.recall.std) + "\n";
  }
  return out;
}

}  // namespace vru
