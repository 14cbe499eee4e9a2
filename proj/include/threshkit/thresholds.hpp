#pragma once

// Threshold derivation by inverting the one-sample signed-rank test over the
// faulty values, and hold-out validation of the resulting per-metric rules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "threshkit/dataset.hpp"
#include "threshkit/error.hpp"
#include "threshkit/stats.hpp"

namespace threshkit {

struct ThresholdResult {
  std::string metric;
  std::optional<std::int64_t> threshold;  // none: not derivable
  double alpha = 0.05;
  std::optional<double> hl_bound;         // none: alpha unattainable at this n
  std::size_t iterations = 0;             // signed-rank tests performed
};

/// Scans T = 0, 1, 2, ... while the signed-rank test (alternative "greater")
/// rejects "values <= T" at alpha, then steps back one. When T = 0 is already
/// not rejected no threshold exists.
inline ThresholdResult derive_threshold(const std::vector<std::int64_t>& faulty_values, double alpha,
                                        std::string metric = {}, std::size_t exact_limit = 25) {
  if (faulty_values.empty()) throw InputError("derive_threshold: no faulty values for " + metric);
  if (!(alpha > 0.0 && alpha < 0.5)) throw InputError("derive_threshold: alpha must lie in (0, 0.5)");
  for (auto v : faulty_values) {
    if (v < 0) throw InputError("derive_threshold: negative metric value for " + metric);
  }
  const std::vector<double> x(faulty_values.begin(), faulty_values.end());

  ThresholdResult out;
  out.metric = std::move(metric);
  out.alpha = alpha;

  std::int64_t t = 0;
  auto rejected = [&](std::int64_t mu) {
    ++out.iterations;
    return stats::signed_rank_test(x, static_cast<double>(mu), stats::Alternative::greater, exact_limit)
        .rejects(alpha);
  };
  while (rejected(t)) ++t;
  if (t > 0) out.threshold = t - 1;

  if (x.size() >= 2) {
    try {
      out.hl_bound = stats::hl_lower_bound(x, alpha, exact_limit);
    } catch (const DegenerateError&) {
    }
  }
  return out;
}

/// Flagged iff strictly above the threshold.
constexpr bool classify(std::int64_t value, std::int64_t threshold) noexcept { return value > threshold; }

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(const Dataset& holdout, const std::string& metric, std::int64_t threshold) {
  require_metric(holdout, metric);
  ConfusionCounts c;
  for (const auto& rec : holdout.records) {
    const bool flagged = classify(rec.metrics.at(metric), threshold);
    if (rec.faulty()) (flagged ? c.tp : c.fn) += 1;
    else (flagged ? c.fp : c.tn) += 1;
  }
  return c;
}

struct MetricEvaluation {
  std::string metric;
  ConfusionCounts confusion;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
};

inline MetricEvaluation evaluate(const ConfusionCounts& c, std::string metric = {}) {
  if (c.total() == 0) throw DegenerateError("evaluate: no records for " + metric);
  if (c.tp + c.fp == 0) throw DegenerateError("precision undefined for " + metric + ": nothing flagged");
  if (c.tp + c.fn == 0) throw DegenerateError("recall undefined for " + metric + ": no faulty records");
  MetricEvaluation e;
  e.metric = std::move(metric);
  e.confusion = c;
  e.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  e.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  e.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return e;
}

struct Spread {
  double mean = 0.0, q1 = 0.0, q3 = 0.0;
};

struct MacroSummary {
  std::string tool_tag;
  std::size_t metric_count = 0;
  Spread precision, recall, accuracy;
};

inline MacroSummary macro_aggregate(const std::vector<MetricEvaluation>& evals, std::string tool_tag = {}) {
  if (evals.empty()) throw DegenerateError("macro_aggregate: no evaluations");
  auto spread = [&](auto field) {
    std::vector<double> v;
    v.reserve(evals.size());
    for (const auto& e : evals) v.push_back(e.*field);
    return Spread{stats::mean(v), stats::quantile_type7(v, 0.25), stats::quantile_type7(v, 0.75)};
  };
  MacroSummary s;
  s.tool_tag = std::move(tool_tag);
  s.metric_count = evals.size();
  s.precision = spread(&MetricEvaluation::precision);
  s.recall = spread(&MetricEvaluation::recall);
  s.accuracy = spread(&MetricEvaluation::accuracy);
  return s;
}

/// Metrics reaching min_precision, optionally restricted to an allow-list.
inline std::vector<std::string> select_for_qa(const std::vector<MetricEvaluation>& evals, double min_precision,
                                              const std::vector<std::string>& include = {}) {
  std::vector<std::string> out;
  for (const auto& e : evals) {
    if (e.precision < min_precision) continue;
    if (!include.empty() && std::find(include.begin(), include.end(), e.metric) == include.end()) continue;
    out.push_back(e.metric);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace threshkit
