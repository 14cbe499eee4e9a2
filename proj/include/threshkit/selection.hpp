#pragma once

// Metric selection: per-project discriminativeness screening, Pearson-based
// redundancy pruning, project merging, the rank-correlation sensitivity
// report and the WMW/Cliff's-delta filter on the unified dataset.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "threshkit/dataset.hpp"
#include "threshkit/error.hpp"
#include "threshkit/stats.hpp"

namespace threshkit {

struct PipelineConfig {
  double alpha = 0.05;
  double pearson_cutoff = 0.9;
  double rank_cutoff = 0.9;
  double min_abs_delta = 0.147;
  double min_precision = 0.85;
  std::size_t intervals = 8;
  std::vector<std::string> preference_order;
  std::vector<std::string> include;     // force-keep at screening
  std::vector<std::string> exclude;     // force-drop at screening
  std::vector<std::string> qa_include;  // optional allow-list for QA selection
  stats::ExactLimits exact_limits;
  std::size_t histogram_bins = 20;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw InputError("config: alpha must lie in (0, 0.5)");
    auto cutoff_ok = [](double c) { return c > 0.0 && c <= 1.0; };
    if (!cutoff_ok(pearson_cutoff)) throw InputError("config: pearson_cutoff must lie in (0, 1]");
    if (!cutoff_ok(rank_cutoff)) throw InputError("config: rank_cutoff must lie in (0, 1]");
    if (min_abs_delta < 0.0 || min_abs_delta > 1.0) throw InputError("config: min_abs_delta must lie in [0, 1]");
    if (intervals < 1) throw InputError("config: intervals must be >= 1");
    if (histogram_bins < 1) throw InputError("config: histogram_bins must be >= 1");
  }
};

namespace detail {

inline std::vector<double> doubles(const std::vector<std::int64_t>& v) {
  return std::vector<double>(v.begin(), v.end());
}

inline bool contains(const std::vector<std::string>& list, const std::string& s) {
  return std::find(list.begin(), list.end(), s) != list.end();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Screening
// ---------------------------------------------------------------------------

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> faulty;
  std::vector<std::size_t> nonfaulty;
};

/// Equal-width bins over the pooled range of both classes.
inline Histogram class_histogram(const std::vector<double>& faulty, const std::vector<double>& nonfaulty,
                                 std::size_t bins) {
  Histogram h;
  h.faulty.assign(bins, 0);
  h.nonfaulty.assign(bins, 0);
  if (faulty.empty() && nonfaulty.empty()) return h;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* v : {&faulty, &nonfaulty}) {
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  h.lo = lo;
  h.hi = hi;
  const double width = (hi - lo) / static_cast<double>(bins);
  auto bin_of = [&](double x) -> std::size_t {
    if (width <= 0.0) return 0;
    auto b = static_cast<std::size_t>((x - lo) / width);
    return std::min(b, bins - 1);
  };
  for (double x : faulty) ++h.faulty[bin_of(x)];
  for (double x : nonfaulty) ++h.nonfaulty[bin_of(x)];
  return h;
}

struct ScreeningResult {
  std::string metric;
  bool keep = false;
  double median_faulty = 0.0;
  double median_nonfaulty = 0.0;
  stats::FiveNumber five_number_faulty;
  stats::FiveNumber five_number_nonfaulty;
  double cliffs_delta = 0.0;
  std::string reason;
  Histogram histogram;
};

/// Keeps a metric when |delta| >= min_abs_delta and the class medians differ.
inline ScreeningResult screen_metric(const std::string& metric, const std::vector<double>& faulty,
                                     const std::vector<double>& nonfaulty, const PipelineConfig& cfg) {
  if (faulty.empty() || nonfaulty.empty()) throw DegenerateError("cannot screen " + metric + ": empty class");
  ScreeningResult r;
  r.metric = metric;
  r.five_number_faulty = stats::five_number(faulty);
  r.five_number_nonfaulty = stats::five_number(nonfaulty);
  r.median_faulty = r.five_number_faulty.median;
  r.median_nonfaulty = r.five_number_nonfaulty.median;
  r.cliffs_delta = stats::cliffs_delta(faulty, nonfaulty).cliffs_delta;
  r.histogram = class_histogram(faulty, nonfaulty, cfg.histogram_bins);

  const bool separated = std::abs(r.cliffs_delta) >= cfg.min_abs_delta;
  const bool medians_differ = r.median_faulty != r.median_nonfaulty;
  r.keep = separated && medians_differ;
  if (!separated) {
    r.reason = fmt::format("overlapping distributions (|delta| {:.3f} < {:.3f})", std::abs(r.cliffs_delta),
                           cfg.min_abs_delta);
  } else if (!medians_differ) {
    r.reason = "similar median values";
  }
  return r;
}

inline ScreeningResult screen_metric(const Dataset& ds, const std::string& metric, const PipelineConfig& cfg) {
  const auto split = split_by_class(ds, metric);
  return screen_metric(metric, detail::doubles(split.faulty), detail::doubles(split.nonfaulty), cfg);
}

/// Screening with the config's force-include/exclude overrides applied.
inline ScreeningResult screen_with_overrides(const Dataset& ds, const std::string& metric, const PipelineConfig& cfg) {
  auto r = screen_metric(ds, metric, cfg);
  if (detail::contains(cfg.exclude, metric)) {
    r.keep = false;
    r.reason = "excluded by configuration";
  } else if (detail::contains(cfg.include, metric) && !r.keep) {
    r.keep = true;
    r.reason = "included by configuration (" + r.reason + ")";
  }
  return r;
}

// ---------------------------------------------------------------------------
// Correlation pruning
// ---------------------------------------------------------------------------

enum class PruneBasis { preference_list, effect_size, lexicographic };

inline const char* to_string(PruneBasis b) {
  switch (b) {
    case PruneBasis::preference_list: return "preference_list";
    case PruneBasis::effect_size: return "effect_size";
    case PruneBasis::lexicographic: return "lexicographic";
  }
  return "?";
}

struct PruneDecision {
  std::string dropped_metric;
  std::string kept_metric;
  // Metric the dropped one correlates with at |r| >= cutoff; equals
  // kept_metric unless the link is indirect (chained group).
  std::string linked_metric;
  double coefficient = 0.0;
  PruneBasis basis = PruneBasis::lexicographic;
};

struct PruneResult {
  std::vector<std::string> retained;           // sorted
  std::vector<PruneDecision> decisions;        // sorted by dropped_metric
  std::vector<std::string> constant;           // dropped as constant columns
};

/// Groups candidates connected by |pearson| >= cutoff and keeps one per
/// group: first hit in preference_order, else largest |cliffs_delta|, else
/// the lexicographically smallest name.
inline PruneResult prune_correlated(const Dataset& ds, std::vector<std::string> candidates, const PipelineConfig& cfg) {
  if (ds.records.size() < 2) throw InputError("prune_correlated: need at least two samples");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  PruneResult out;
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (const auto& m : candidates) {
    auto col = detail::doubles(metric_column(ds, m));
    const bool constant = std::adjacent_find(col.begin(), col.end(), std::not_equal_to<>{}) == col.end();
    if (constant) {
      out.constant.push_back(m);
      continue;
    }
    names.push_back(m);
    cols.push_back(std::move(col));
  }

  const std::size_t k = names.size();
  std::vector<std::vector<double>> r(k, std::vector<double>(k, 1.0));
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      r[i][j] = r[j][i] = stats::pearson(cols[i], cols[j]);
      if (std::abs(r[i][j]) >= cfg.pearson_cutoff) parent[find(i)] = find(j);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < k; ++i) groups[find(i)].push_back(i);

  std::vector<double> abs_delta(k, std::numeric_limits<double>::quiet_NaN());
  auto delta_of = [&](std::size_t i) {
    if (std::isnan(abs_delta[i])) {
      const auto split = split_by_class(ds, names[i]);
      abs_delta[i] = (split.faulty.empty() || split.nonfaulty.empty())
                         ? 0.0
                         : std::abs(stats::cliffs_delta(detail::doubles(split.faulty),
                                                        detail::doubles(split.nonfaulty))
                                        .cliffs_delta);
    }
    return abs_delta[i];
  };

  for (const auto& [_, members] : groups) {
    if (members.size() == 1) {
      out.retained.push_back(names[members.front()]);
      continue;
    }
    std::optional<std::size_t> keeper;
    PruneBasis basis = PruneBasis::lexicographic;
    for (const auto& pref : cfg.preference_order) {
      for (auto i : members) {
        if (names[i] == pref) keeper = i;
      }
      if (keeper) {
        basis = PruneBasis::preference_list;
        break;
      }
    }
    if (!keeper) {
      // members are in name order, so ties fall to the smallest name
      std::size_t best = members.front();
      for (auto i : members) {
        if (delta_of(i) > delta_of(best)) best = i;
      }
      const auto at_max = std::count_if(members.begin(), members.end(),
                                        [&](std::size_t i) { return delta_of(i) == delta_of(best); });
      keeper = best;
      basis = at_max == 1 ? PruneBasis::effect_size : PruneBasis::lexicographic;
    }
    out.retained.push_back(names[*keeper]);
    for (auto i : members) {
      if (i == *keeper) continue;
      PruneDecision d;
      d.dropped_metric = names[i];
      d.kept_metric = names[*keeper];
      d.basis = basis;
      if (std::abs(r[i][*keeper]) >= cfg.pearson_cutoff) {
        d.linked_metric = names[*keeper];
        d.coefficient = r[i][*keeper];
      } else {
        std::size_t best = i;
        for (auto j : members) {
          if (j != i && (best == i || std::abs(r[i][j]) > std::abs(r[i][best]))) best = j;
        }
        d.linked_metric = names[best];
        d.coefficient = r[i][best];
      }
      out.decisions.push_back(std::move(d));
    }
  }
  std::sort(out.retained.begin(), out.retained.end());
  std::sort(out.decisions.begin(), out.decisions.end(),
            [](const auto& a, const auto& b) { return a.dropped_metric < b.dropped_metric; });
  return out;
}

// ---------------------------------------------------------------------------
// Merging
// ---------------------------------------------------------------------------

inline Dataset merge_projects(const std::vector<Dataset>& datasets) {
  if (datasets.empty()) throw InputError("merge_projects: no datasets");
  Dataset out;
  out.tool_tag = datasets.front().tool_tag;
  out.metric_names = datasets.front().metric_names;
  std::vector<std::string> tags;
  for (const auto& ds : datasets) {
    if (ds.metric_names != out.metric_names) {
      throw InputError(fmt::format("metric-set mismatch when merging {} ({{{}}}) with {} ({{{}}})",
                                   datasets.front().project_tag, fmt::join(out.metric_names, ","), ds.project_tag,
                                   fmt::join(ds.metric_names, ",")));
    }
    if (ds.tool_tag != out.tool_tag) {
      throw InputError("tool tag mismatch when merging: '" + out.tool_tag + "' vs '" + ds.tool_tag + "'");
    }
    tags.push_back(ds.project_tag);
    out.records.insert(out.records.end(), ds.records.begin(), ds.records.end());
  }
  out.project_tag = fmt::format("{}", fmt::join(tags, "+"));
  return out;
}

// ---------------------------------------------------------------------------
// Sensitivity correlations
// ---------------------------------------------------------------------------

struct CorrelationEntry {
  std::string metric_a;
  std::string metric_b;
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  double kendall_tau = 0.0;
};

struct CorrelationPair {
  std::string metric_a;
  std::string metric_b;
  double value = 0.0;
};

struct CorrelationReport {
  std::vector<std::string> metrics;  // sorted
  // Square matrices indexed like `metrics`; NaN where undefined.
  std::vector<std::vector<double>> pearson;
  std::vector<std::vector<double>> spearman;
  std::vector<std::vector<double>> kendall;
  std::vector<CorrelationEntry> entries;  // every pair a < b
  std::vector<CorrelationPair> pearson_pairs;
  std::vector<CorrelationPair> spearman_pairs;
  std::vector<CorrelationPair> kendall_pairs;
};

/// Full correlation matrices plus above-cutoff pair lists. Informational:
/// only Pearson (in prune_correlated) is used to drop metrics.
inline CorrelationReport sensitivity_correlations(const Dataset& unified, std::vector<std::string> metrics,
                                                  const PipelineConfig& cfg) {
  std::sort(metrics.begin(), metrics.end());
  metrics.erase(std::unique(metrics.begin(), metrics.end()), metrics.end());
  CorrelationReport rep;
  rep.metrics = metrics;
  const std::size_t k = metrics.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.pearson.assign(k, std::vector<double>(k, nan));
  rep.spearman = rep.pearson;
  rep.kendall = rep.pearson;

  std::vector<std::vector<double>> cols, ranks;
  for (const auto& m : metrics) {
    cols.push_back(detail::doubles(metric_column(unified, m)));
    ranks.push_back(stats::midranks(cols.back()));
  }
  auto guarded = [&](auto&& f) {
    try {
      return f();
    } catch (const DegenerateError&) {
      return nan;
    }
  };
  for (std::size_t i = 0; i < k; ++i) {
    const double self = guarded([&] { return stats::pearson(cols[i], cols[i]); });
    rep.pearson[i][i] = rep.spearman[i][i] = self;
    rep.kendall[i][i] = guarded([&] { return stats::kendall_tau_b(cols[i], cols[i]); });
    for (std::size_t j = i + 1; j < k; ++j) {
      const double p = guarded([&] { return stats::pearson(cols[i], cols[j]); });
      const double s = guarded([&] { return stats::pearson(ranks[i], ranks[j]); });
      const double t = guarded([&] { return stats::kendall_tau_b(cols[i], cols[j]); });
      rep.pearson[i][j] = rep.pearson[j][i] = p;
      rep.spearman[i][j] = rep.spearman[j][i] = s;
      rep.kendall[i][j] = rep.kendall[j][i] = t;
      rep.entries.push_back({metrics[i], metrics[j], p, s, t});
      if (std::abs(p) >= cfg.pearson_cutoff) rep.pearson_pairs.push_back({metrics[i], metrics[j], p});
      if (std::abs(s) >= cfg.rank_cutoff) rep.spearman_pairs.push_back({metrics[i], metrics[j], s});
      if (std::abs(t) >= cfg.rank_cutoff) rep.kendall_pairs.push_back({metrics[i], metrics[j], t});
    }
  }
  auto by_strength = [](const CorrelationPair& a, const CorrelationPair& b) {
    if (std::abs(a.value) != std::abs(b.value)) return std::abs(a.value) > std::abs(b.value);
    return std::tie(a.metric_a, a.metric_b) < std::tie(b.metric_a, b.metric_b);
  };
  std::sort(rep.pearson_pairs.begin(), rep.pearson_pairs.end(), by_strength);
  std::sort(rep.spearman_pairs.begin(), rep.spearman_pairs.end(), by_strength);
  std::sort(rep.kendall_pairs.begin(), rep.kendall_pairs.end(), by_strength);
  return rep;
}

// ---------------------------------------------------------------------------
// WMW filter
// ---------------------------------------------------------------------------

struct WmwRow {
  std::string metric;
  stats::TestResult test;
  stats::EffectSize effect;
  bool retained = false;
};

/// Two-sided WMW test of faulty vs non-faulty per metric; retention is by
/// p-value alone, delta is reported alongside.
inline std::vector<WmwRow> wmw_filter(const Dataset& unified, std::vector<std::string> metrics,
                                      const PipelineConfig& cfg,
                                      stats::Alternative alt = stats::Alternative::two_sided) {
  std::sort(metrics.begin(), metrics.end());
  metrics.erase(std::unique(metrics.begin(), metrics.end()), metrics.end());
  std::vector<WmwRow> rows;
  for (const auto& m : metrics) {
    const auto split = split_by_class(unified, m);
    if (split.faulty.empty() || split.nonfaulty.empty()) {
      throw DegenerateError("wmw_filter: empty class for " + m + " in " + unified.project_tag);
    }
    const auto f = detail::doubles(split.faulty);
    const auto nf = detail::doubles(split.nonfaulty);
    WmwRow row;
    row.metric = m;
    row.test = stats::mwu_test(f, nf, alt, cfg.exact_limits.mann_whitney);
    row.effect = stats::cliffs_delta(f, nf);
    row.retained = row.test.p_value < cfg.alpha;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace threshkit
