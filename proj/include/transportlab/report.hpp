#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace transportlab {

/// A sampled check: one record per sample point, pass iff every record
/// satisfies its threshold.
struct ConditionReport {
  enum class Bound { AtMost, AtLeast };

  struct Record {
    std::vector<double> point;
    double measured = 0.0;
    double threshold = 0.0;
    bool ok = false;
  };

  std::string name;
  Bound bound = Bound::AtMost;
  std::vector<Record> records;
  std::vector<std::string> notes;

  void add(std::vector<double> point, double measured, double threshold) {
    const bool ok = bound == Bound::AtMost ? measured <= threshold : measured >= threshold;
    records.push_back({std::move(point), measured, threshold, ok});
  }

  bool pass() const {
    return std::all_of(records.begin(), records.end(), [](const Record& r) { return r.ok; });
  }

  double min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : records) m = std::min(m, r.measured);
    return m;
  }

  double max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& r : records) m = std::max(m, r.measured);
    return m;
  }

  nlohmann::ordered_json summary() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["bound"] = bound == Bound::AtMost ? "at_most" : "at_least";
    j["records"] = records.size();
    j["min"] = records.empty() ? 0.0 : min();
    j["max"] = records.empty() ? 0.0 : max();
    j["pass"] = pass();
    if (!notes.empty()) j["notes"] = notes;
    return j;
  }
};

}  // namespace transportlab
