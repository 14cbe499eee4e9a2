#pragma once

// The four pipeline commands. Each reads its inputs, writes its artifacts
// atomically and returns the in-memory results; errors surface as
// threshkit::Error (input errors -> exit 1, degenerate statistics -> exit 2).

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "threshkit/config.hpp"
#include "threshkit/csv.hpp"
#include "threshkit/dataset.hpp"
#include "threshkit/error.hpp"
#include "threshkit/format.hpp"
#include "threshkit/io.hpp"
#include "threshkit/manifest.hpp"
#include "threshkit/selection.hpp"
#include "threshkit/thresholds.hpp"

namespace threshkit {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

struct BuildOptions {
  fs::path commits;
  std::vector<fs::path> exports;
  std::optional<fs::path> faults;
  SamplingPlan plan;
  std::string tool_tag;
  std::string project_tag;
  fs::path out;
};

struct BuildSummary {
  Dataset dataset;
  std::vector<Snapshot> snapshots;  // planned followed by pre-fix-only ones
  std::size_t ingested_records = 0;
  std::vector<FaultEvent> unmatched;
  std::vector<std::string> warnings;
};

inline fs::path manifest_path_for(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".manifest.json");
  return p;
}

inline std::string dataset_counts_table(const std::vector<Dataset>& datasets) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& ds : datasets) {
    const auto faulty = ds.faulty_count();
    rows.push_back({ds.project_tag, ds.tool_tag, std::to_string(ds.records.size()), std::to_string(faulty),
                    std::to_string(ds.records.size() - faulty)});
  }
  return fmtx::markdown_table({"Project", "Tool", "Samples after removing replicated data", "Faulty", "Non-faulty"},
                              rows);
}

/// Export files whose snapshot is a planned snapshot contribute all their
/// functions. Exports of other commits (pre-fix versions) contribute only the
/// functions that a fault event links to; they get ordinals after the plan.
inline BuildSummary cmd_build(const BuildOptions& opt, std::ostream& out, std::ostream& err) {
  RunManifest manifest;
  manifest.command = "build";
  manifest.config = fmt::format("tool_tag = {}\nproject_tag = {}\nstart_date = {}\nfdc_date = {}\nintervals = {}\n",
                                opt.tool_tag, opt.project_tag, format_date(opt.plan.start_date),
                                format_date(opt.plan.fdc_date), opt.plan.interval_count);
  BuildSummary summary;
  if (opt.exports.empty()) throw InputError("build: no metric exports given");

  std::vector<Commit> commits;
  {
    StageTimer t(manifest, "plan");
    manifest.add_input(opt.commits);
    commits = read_commits(csv::read_file(opt.commits), opt.commits.string());
    summary.snapshots = plan_snapshots(commits, opt.plan);
  }

  std::vector<FunctionRecord> records;
  std::set<std::string> extra_ids;
  {
    StageTimer t(manifest, "ingest");
    std::map<std::string, const Commit*> commit_by_id;
    for (const auto& c : commits) commit_by_id.emplace(c.commit_id, &c);

    struct Pending {
      fs::path path;
      csv::Table table;
      std::string snapshot_id;
    };
    std::vector<Pending> pending;
    std::set<std::string> seen_ids;
    for (const auto& path : opt.exports) {
      manifest.add_input(path);
      auto table = csv::read_file(path);
      detail::check_header_prefix(table.header, kExportKeyColumns, path.string());
      if (table.rows.empty()) {
        summary.warnings.push_back("export " + path.string() + " has no rows");
        continue;
      }
      const std::string id = table.rows.front()[3];
      if (!seen_ids.insert(id).second) throw InputError("build: snapshot '" + id + "' exported twice (" + path.string() + ")");
      const bool planned = std::any_of(summary.snapshots.begin(), summary.snapshots.end(),
                                       [&](const Snapshot& s) { return s.snapshot_id == id; });
      if (!planned) {
        if (!commit_by_id.count(id)) {
          throw InputError(path.string() + ": snapshot '" + id + "' is not in the commit list");
        }
        extra_ids.insert(id);
      }
      pending.push_back({path, std::move(table), id});
    }

    std::vector<const Commit*> extras;
    for (const auto& id : extra_ids) extras.push_back(commit_by_id.at(id));
    std::sort(extras.begin(), extras.end(), [](const Commit* a, const Commit* b) {
      return std::tie(a->date, a->commit_id) < std::tie(b->date, b->commit_id);
    });
    for (std::size_t i = 0; i < extras.size(); ++i) {
      summary.snapshots.push_back(Snapshot{extras[i]->commit_id, extras[i]->date, opt.plan.interval_count + i});
    }

    for (const auto& p : pending) {
      const Snapshot* snap = nullptr;
      for (const auto& s : summary.snapshots) {
        if (s.snapshot_id == p.snapshot_id && (!snap || s.ordinal < snap->ordinal)) snap = &s;
      }
      auto part = ingest_snapshot_export(p.table, *snap, p.path.string());
      records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    summary.ingested_records = records.size();
    require_uniform_metrics(records);
  }

  {
    StageTimer t(manifest, "link");
    std::vector<FaultEvent> events;
    if (opt.faults) {
      manifest.add_input(*opt.faults);
      events = read_fault_events(csv::read_file(*opt.faults), opt.faults->string());
    }
    if (events.empty()) summary.warnings.push_back("no fault events: every record is non-faulty");
    auto linked = link_faults(std::move(records), events, summary.snapshots);
    summary.unmatched = std::move(linked.unmatched);
    if (!summary.unmatched.empty()) {
      summary.warnings.push_back(fmt::format("{} fault event(s) matched no ingested function", summary.unmatched.size()));
    }
    records.clear();
    for (auto& rec : linked.records) {
      if (extra_ids.count(rec.snapshot.snapshot_id) && !rec.faulty()) continue;
      records.push_back(std::move(rec));
    }
  }

  {
    StageTimer t(manifest, "dedupe");
    summary.dataset = dedupe(records, opt.tool_tag, opt.project_tag);
    if (summary.dataset.records.empty()) throw InputError("build: dataset is empty");
  }

  write_file_atomic(opt.out, write_dataset(summary.dataset));
  manifest.write(manifest_path_for(opt.out));

  for (const auto& w : summary.warnings) err << "warning: " << w << '\n';
  std::set<std::string> planned_ids;
  for (const auto& s : summary.snapshots) {
    if (!extra_ids.count(s.snapshot_id)) planned_ids.insert(s.snapshot_id);
  }
  out << fmt::format("snapshots: {} distinct planned over {} intervals, {} pre-fix\n", planned_ids.size(),
                     opt.plan.interval_count, extra_ids.size());
  out << fmt::format("ingested function samples: {}\n\n", summary.ingested_records);
  out << dataset_counts_table({summary.dataset});
  return summary;
}

// ---------------------------------------------------------------------------
// derive
// ---------------------------------------------------------------------------

struct DeriveOptions {
  std::vector<fs::path> training;
  PipelineConfig cfg;
  fs::path out_dir;
  bool confidential = false;
};

struct DeriveOutcome {
  std::vector<Dataset> datasets;
  std::vector<std::vector<ScreeningResult>> screening;  // per training project
  std::vector<std::string> candidates;                  // kept in every project
  std::vector<PruneResult> pruning;                     // per training project
  std::vector<std::string> retained_after_pruning;
  CorrelationReport correlations;
  std::vector<WmwRow> wmw;
  std::vector<ThresholdResult> thresholds;
};

namespace detail {

inline std::string join_counts(const std::vector<std::size_t>& v) {
  return fmt::format("{}", fmt::join(v, " "));
}

inline std::string threshold_cell(const ThresholdResult& t) {
  return t.threshold ? std::to_string(*t.threshold) : std::string("none");
}

inline void write_table(const fs::path& path, csv::Table t) { write_file_atomic(path, csv::write(t)); }

}  // namespace detail

/// Pure part of derive: screening -> pruning -> merge -> sensitivity -> WMW
/// -> thresholds. Throws DegenerateError("no candidate metrics") when
/// screening removes everything.
inline DeriveOutcome run_derivation(std::vector<Dataset> datasets, const PipelineConfig& cfg,
                                    RunManifest* manifest = nullptr) {
  cfg.validate();
  if (datasets.empty()) throw InputError("derive: no training datasets");
  DeriveOutcome o;
  o.datasets = std::move(datasets);
  const auto& names = o.datasets.front().metric_names;
  for (const auto& ds : o.datasets) {
    if (ds.metric_names != names) throw InputError("derive: training datasets carry different metric sets");
  }

  auto timed = [&](const char* stage, auto&& f) {
    if (manifest) {
      StageTimer t(*manifest, stage);
      f();
    } else {
      f();
    }
  };

  timed("screen", [&] {
    std::map<std::string, std::size_t> kept;
    for (const auto& ds : o.datasets) {
      std::vector<ScreeningResult> per;
      for (const auto& m : names) {
        per.push_back(screen_with_overrides(ds, m, cfg));
        if (per.back().keep) ++kept[m];
      }
      o.screening.push_back(std::move(per));
    }
    for (const auto& m : names) {
      if (kept[m] == o.datasets.size()) o.candidates.push_back(m);
    }
  });
  if (o.candidates.empty()) throw DegenerateError("no candidate metrics");

  timed("prune", [&] {
    auto retained = o.candidates;
    for (const auto& ds : o.datasets) {
      o.pruning.push_back(prune_correlated(ds, retained, cfg));
      retained = o.pruning.back().retained;
    }
    o.retained_after_pruning = retained;
  });
  if (o.retained_after_pruning.empty()) throw DegenerateError("no candidate metrics");

  Dataset unified;
  timed("merge", [&] { unified = merge_projects(o.datasets); });
  timed("sensitivity", [&] {
    if (o.retained_after_pruning.size() >= 2) {
      o.correlations = sensitivity_correlations(unified, o.retained_after_pruning, cfg);
    } else {
      o.correlations.metrics = o.retained_after_pruning;
    }
  });
  timed("wmw", [&] { o.wmw = wmw_filter(unified, o.retained_after_pruning, cfg); });
  timed("thresholds", [&] {
    for (const auto& row : o.wmw) {
      if (!row.retained) continue;
      const auto split = split_by_class(unified, row.metric);
      o.thresholds.push_back(derive_threshold(split.faulty, cfg.alpha, row.metric, cfg.exact_limits.signed_rank));
    }
  });
  return o;
}

inline std::string render_derive_report(const DeriveOutcome& o, const PipelineConfig& cfg, bool confidential) {
  using fmtx::fixed3;
  std::string md = "## Metric screening per training project\n\n";
  md += fmt::format(
      "Automated screening rule: keep a metric when |Cliff's delta| >= {} and the class medians differ. "
      "This rule stands in for a visual judgment; override it with the include/exclude configuration keys.\n\n",
      fixed3(cfg.min_abs_delta));
  for (std::size_t p = 0; p < o.screening.size(); ++p) {
    md += fmt::format("### {} ({})\n\n", o.datasets[p].project_tag, o.datasets[p].tool_tag);
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : o.screening[p]) {
      if (confidential) {
        rows.push_back({s.metric, s.keep ? "yes" : "no", fixed3(s.cliffs_delta), s.reason});
      } else {
        rows.push_back({s.metric, s.keep ? "yes" : "no", fixed3(s.median_faulty), fixed3(s.median_nonfaulty),
                        fixed3(s.cliffs_delta), s.reason});
      }
    }
    md += confidential
              ? fmtx::markdown_table({"Metric", "Keep", "Cliff's delta", "Reason"}, rows)
              : fmtx::markdown_table({"Metric", "Keep", "Median faulty", "Median non-faulty", "Cliff's delta", "Reason"},
                                     rows);
    md += "\n";
  }

  md += "## Distribution summaries (unified training data)\n\n";
  md += confidential ? "Confidential mode: axis values omitted, histogram counts only.\n\n"
                     : "Five-number summaries and equal-width histogram counts per class.\n\n";
  {
    const Dataset unified = merge_projects(o.datasets);
    std::vector<std::vector<std::string>> rows;
    for (const auto& m : o.retained_after_pruning) {
      const auto split = split_by_class(unified, m);
      const std::vector<double> f(split.faulty.begin(), split.faulty.end());
      const std::vector<double> nf(split.nonfaulty.begin(), split.nonfaulty.end());
      const auto h = class_histogram(f, nf, cfg.histogram_bins);
      for (int cls = 0; cls < 2; ++cls) {
        const auto& v = cls == 0 ? f : nf;
        const auto& counts = cls == 0 ? h.faulty : h.nonfaulty;
        std::vector<std::string> row{m, cls == 0 ? "faulty" : "non-faulty", std::to_string(v.size())};
        if (!confidential) {
          if (v.empty()) {
            row.insert(row.end(), 5, "NA");
          } else {
            const auto fn = stats::five_number(v);
            for (double x : {fn.min, fn.q1, fn.median, fn.q3, fn.max}) row.push_back(fixed3(x));
          }
          row.push_back(fmt::format("[{}, {}]", fixed3(h.lo), fixed3(h.hi)));
        }
        row.push_back(detail::join_counts(counts));
        rows.push_back(std::move(row));
      }
    }
    md += confidential ? fmtx::markdown_table({"Metric", "Class", "n", "Histogram"}, rows)
                       : fmtx::markdown_table({"Metric", "Class", "n", "Min", "Q1", "Median", "Q3", "Max", "Range",
                                               "Histogram"},
                                              rows);
    md += "\n";
  }

  md += fmt::format("## Correlation pruning (Pearson |r| >= {})\n\n", fixed3(cfg.pearson_cutoff));
  for (std::size_t p = 0; p < o.pruning.size(); ++p) {
    const auto& pr = o.pruning[p];
    md += fmt::format("### {}\n\n", o.datasets[p].project_tag);
    if (pr.decisions.empty() && pr.constant.empty()) md += "No highly correlated metrics.\n\n";
    std::vector<std::vector<std::string>> rows;
    for (const auto& d : pr.decisions) {
      rows.push_back({d.dropped_metric, d.kept_metric, d.linked_metric, fixed3(d.coefficient), to_string(d.basis)});
    }
    for (const auto& c : pr.constant) rows.push_back({c, "-", "-", "NA", "constant"});
    if (!rows.empty()) md += fmtx::markdown_table({"Dropped", "Kept", "Linked via", "r", "Basis"}, rows) + "\n";
  }
  md += fmt::format("Retained after pruning: {}\n\n", fmt::join(o.retained_after_pruning, ", "));

  md += "## Unified dataset correlation analysis\n\n";
  md += "Pearson is the reference pruning criterion; Spearman and Kendall pairs are reported and do not "
        "reduce the metric set.\n\n";
  const auto& c = o.correlations;
  if (c.metrics.size() >= 2) {
    std::vector<std::string> header{"Metric"};
    header.insert(header.end(), c.metrics.begin(), c.metrics.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < c.metrics.size(); ++i) {
      std::vector<std::string> row{c.metrics[i]};
      for (std::size_t j = 0; j < c.metrics.size(); ++j) row.push_back(fixed3(c.pearson[i][j]));
      rows.push_back(std::move(row));
    }
    md += "### Pearson correlation matrix\n\n" + fmtx::markdown_table(header, rows) + "\n";
    auto pairs = [&](const char* title, const char* sym, const std::vector<CorrelationPair>& ps, double cut) {
      md += fmt::format("### {} pairs (|{}| >= {})\n\n", title, sym, fixed3(cut));
      if (ps.empty()) {
        md += "None.\n\n";
        return;
      }
      std::vector<std::vector<std::string>> r;
      for (const auto& p : ps) r.push_back({p.metric_a, p.metric_b, fixed3(p.value)});
      md += fmtx::markdown_table({"Metric 1", "Metric 2", sym}, r) + "\n";
    };
    pairs("Pearson", "r", c.pearson_pairs, cfg.pearson_cutoff);
    pairs("Spearman rank correlation", "rho", c.spearman_pairs, cfg.rank_cutoff);
    pairs("Kendall rank correlation", "tau", c.kendall_pairs, cfg.rank_cutoff);
  } else {
    md += "Fewer than two metrics; no correlations computed.\n\n";
  }

  md += "## WMW test and Cliff's delta\n\n";
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& w : o.wmw) {
      rows.push_back({w.metric, fmtx::pvalue(w.test.p_value), fixed3(std::abs(w.effect.cliffs_delta)),
                      stats::to_string(w.test.method), w.retained ? "yes" : "no"});
    }
    md += fmtx::markdown_table({"Metric Name", "p-value", "Cliff's |delta|", "Method", "Retained"}, rows) + "\n";
  }

  md += fmt::format("## Thresholds (one-sided signed-rank inversion, alpha = {})\n\n", cfg.alpha);
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& t : o.thresholds) {
      if (confidential) rows.push_back({t.metric, detail::threshold_cell(t)});
      else rows.push_back({t.metric, detail::threshold_cell(t), t.hl_bound ? fixed3(*t.hl_bound) : "NA",
                           std::to_string(t.iterations)});
    }
    md += confidential ? fmtx::markdown_table({"Metric", "Threshold"}, rows)
                       : fmtx::markdown_table({"Metric", "Threshold", "HL lower bound", "Tests"}, rows);
    md += "\n";
  }
  return md;
}

inline void write_derive_artifacts(const DeriveOutcome& o, const PipelineConfig& cfg, const fs::path& dir,
                                   bool confidential) {
  using fmtx::fixed3;
  {
    csv::Table t;
    t.header = confidential ? csv::Row{"project", "metric", "keep", "cliffs_delta", "reason"}
                            : csv::Row{"project", "metric", "keep", "cliffs_delta", "reason", "faulty_min",
                                       "faulty_q1", "faulty_median", "faulty_q3", "faulty_max", "nonfaulty_min",
                                       "nonfaulty_q1", "nonfaulty_median", "nonfaulty_q3", "nonfaulty_max",
                                       "hist_faulty", "hist_nonfaulty"};
    for (std::size_t p = 0; p < o.screening.size(); ++p) {
      for (const auto& s : o.screening[p]) {
        csv::Row row{o.datasets[p].project_tag, s.metric, s.keep ? "1" : "0", fixed3(s.cliffs_delta), s.reason};
        if (!confidential) {
          for (const auto* fn : {&s.five_number_faulty, &s.five_number_nonfaulty}) {
            for (double x : {fn->min, fn->q1, fn->median, fn->q3, fn->max}) row.push_back(fixed3(x));
          }
          row.push_back(detail::join_counts(s.histogram.faulty));
          row.push_back(detail::join_counts(s.histogram.nonfaulty));
        }
        t.rows.push_back(std::move(row));
      }
    }
    detail::write_table(dir / "screening.csv", std::move(t));
  }
  {
    csv::Table t;
    t.header = {"project", "dropped_metric", "kept_metric", "linked_metric", "coefficient", "basis"};
    for (std::size_t p = 0; p < o.pruning.size(); ++p) {
      for (const auto& d : o.pruning[p].decisions) {
        t.rows.push_back({o.datasets[p].project_tag, d.dropped_metric, d.kept_metric, d.linked_metric,
                          fixed3(d.coefficient), to_string(d.basis)});
      }
      for (const auto& c : o.pruning[p].constant) t.rows.push_back({o.datasets[p].project_tag, c, "", "", "NA", "constant"});
    }
    detail::write_table(dir / "pruning.csv", std::move(t));
  }
  auto matrix = [&](const char* file, const std::vector<std::vector<double>>& m) {
    csv::Table t;
    t.header = {"metric"};
    t.header.insert(t.header.end(), o.correlations.metrics.begin(), o.correlations.metrics.end());
    for (std::size_t i = 0; i < m.size(); ++i) {
      csv::Row row{o.correlations.metrics[i]};
      for (double v : m[i]) row.push_back(fixed3(v));
      t.rows.push_back(std::move(row));
    }
    detail::write_table(dir / file, std::move(t));
  };
  matrix("correlation_pearson.csv", o.correlations.pearson);
  matrix("correlation_spearman.csv", o.correlations.spearman);
  matrix("correlation_kendall.csv", o.correlations.kendall);
  {
    csv::Table t;
    t.header = {"coefficient", "metric_a", "metric_b", "value"};
    for (const auto& [kind, list] : {std::pair{"pearson", &o.correlations.pearson_pairs},
                                     std::pair{"spearman", &o.correlations.spearman_pairs},
                                     std::pair{"kendall", &o.correlations.kendall_pairs}}) {
      for (const auto& p : *list) t.rows.push_back({kind, p.metric_a, p.metric_b, fixed3(p.value)});
    }
    detail::write_table(dir / "correlation_pairs.csv", std::move(t));
  }
  {
    csv::Table t;
    t.header = {"metric", "u_statistic", "p_value", "method", "n_faulty", "n_nonfaulty", "cliffs_delta",
                "abs_cliffs_delta", "retained"};
    for (const auto& w : o.wmw) {
      t.rows.push_back({w.metric, fmt::format("{}", w.test.statistic), fmtx::pvalue(w.test.p_value),
                        stats::to_string(w.test.method), std::to_string(w.test.n1), std::to_string(w.test.n2),
                        fixed3(w.effect.cliffs_delta), fixed3(std::abs(w.effect.cliffs_delta)),
                        w.retained ? "1" : "0"});
    }
    detail::write_table(dir / "wmw.csv", std::move(t));
  }
  {
    csv::Table t;
    t.meta["alpha"] = fmt::format("{}", cfg.alpha);
    t.header = confidential ? csv::Row{"metric", "threshold"}
                            : csv::Row{"metric", "threshold", "alpha", "hl_bound", "iterations"};
    for (const auto& th : o.thresholds) {
      if (confidential) t.rows.push_back({th.metric, detail::threshold_cell(th)});
      else t.rows.push_back({th.metric, detail::threshold_cell(th), fmt::format("{}", th.alpha),
                             th.hl_bound ? fixed3(*th.hl_bound) : "NA", std::to_string(th.iterations)});
    }
    detail::write_table(dir / "thresholds.csv", std::move(t));
  }
  {
    std::string tex = "% WMW test and Cliff's delta\n";
    for (const auto& w : o.wmw) {
      tex += fmtx::latex_row({w.metric, fmtx::latex_pvalue(w.test.p_value), fixed3(std::abs(w.effect.cliffs_delta))});
    }
    tex += "% Spearman rank correlation pairs\n";
    for (const auto& p : o.correlations.spearman_pairs) tex += fmtx::latex_row({p.metric_a, p.metric_b, fixed3(p.value)});
    tex += "% Kendall rank correlation pairs\n";
    for (const auto& p : o.correlations.kendall_pairs) tex += fmtx::latex_row({p.metric_a, p.metric_b, fixed3(p.value)});
    write_file_atomic(dir / "tables.tex", tex);
  }
  write_file_atomic(dir / "derive_report.md", render_derive_report(o, cfg, confidential));
}

/// Runs the derivation and writes every artifact into opt.out_dir. Throws
/// DegenerateError after writing when no metric yields a threshold.
inline DeriveOutcome cmd_derive(const DeriveOptions& opt, std::ostream& out) {
  RunManifest manifest;
  manifest.command = opt.confidential ? "derive --confidential" : "derive";
  manifest.config = render_config(opt.cfg);
  std::vector<Dataset> datasets;
  {
    StageTimer t(manifest, "load");
    for (const auto& p : opt.training) {
      manifest.add_input(p);
      datasets.push_back(read_dataset(p));
    }
  }
  fs::create_directories(opt.out_dir);
  DeriveOutcome o;
  try {
    o = run_derivation(std::move(datasets), opt.cfg, &manifest);
  } catch (const Error&) {
    manifest.write(opt.out_dir / "manifest.json");
    throw;
  }
  {
    StageTimer t(manifest, "write");
    write_derive_artifacts(o, opt.cfg, opt.out_dir, opt.confidential);
  }
  manifest.write(opt.out_dir / "manifest.json");

  std::size_t derived = 0;
  for (const auto& t : o.thresholds) {
    out << fmt::format("{:<24} {}\n", t.metric, detail::threshold_cell(t));
    if (t.threshold) ++derived;
  }
  if (derived == 0) throw DegenerateError("no threshold derivable for any metric");
  return o;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ThresholdEntry {
  std::string metric;
  std::optional<std::int64_t> threshold;
};

inline std::vector<ThresholdEntry> read_thresholds(const fs::path& path) {
  const auto table = csv::read_file(path);
  static constexpr std::array<std::string_view, 2> cols = {"metric", "threshold"};
  detail::check_header_prefix(table.header, cols, path.string());
  std::vector<ThresholdEntry> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    ThresholdEntry e{row[0], std::nullopt};
    if (row[1] != "none") {
      e.threshold = detail::parse_metric_value(
          row[1], path.string() + ": row " + std::to_string(table.line_numbers[r]) + ", column threshold");
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct ValidateOptions {
  fs::path thresholds;
  fs::path holdout;
  PipelineConfig cfg;
  fs::path out_dir;
  std::optional<std::string> tool_tag;
};

struct ValidateOutcome {
  std::string tool_tag;
  std::vector<std::pair<std::string, std::int64_t>> applied;  // metric, threshold
  std::vector<MetricEvaluation> evaluations;
  std::vector<std::pair<std::string, std::string>> undefined;  // metric, reason
  std::vector<std::string> skipped;                            // no threshold
  MacroSummary macro;
  std::vector<std::string> qa_selection;
};

inline ValidateOutcome run_validation(const std::vector<ThresholdEntry>& thresholds, const Dataset& holdout,
                                      const PipelineConfig& cfg, std::string tool_tag) {
  ValidateOutcome o;
  o.tool_tag = std::move(tool_tag);
  for (const auto& t : thresholds) {
    if (!holdout.has_metric(t.metric)) {
      throw InputError("metric '" + t.metric + "' from the threshold table is absent from hold-out dataset " +
                       holdout.project_tag);
    }
  }
  for (const auto& t : thresholds) {
    if (!t.threshold) {
      o.skipped.push_back(t.metric);
      continue;
    }
    o.applied.emplace_back(t.metric, *t.threshold);
    const auto c = confusion(holdout, t.metric, *t.threshold);
    try {
      o.evaluations.push_back(evaluate(c, t.metric));
    } catch (const DegenerateError& e) {
      o.undefined.emplace_back(t.metric, e.what());
    }
  }
  if (o.evaluations.empty()) throw DegenerateError("no metric could be evaluated on the hold-out data");
  o.macro = macro_aggregate(o.evaluations, o.tool_tag);
  o.qa_selection = select_for_qa(o.evaluations, cfg.min_precision, cfg.qa_include);
  return o;
}

inline std::string render_validate_report(const ValidateOutcome& o, const Dataset& holdout, const PipelineConfig& cfg) {
  using fmtx::fixed3;
  std::string md = fmt::format("## Threshold evaluation on hold-out project {} ({} functions, {} faulty)\n\n",
                               holdout.project_tag, holdout.records.size(), holdout.faulty_count());
  md += "A function is flagged when its metric value is strictly above the threshold.\n\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& [metric, thr] : o.applied) {
    auto it = std::find_if(o.evaluations.begin(), o.evaluations.end(), [&](const auto& e) { return e.metric == metric; });
    if (it == o.evaluations.end()) {
      const auto c = confusion(holdout, metric, thr);
      rows.push_back({metric, std::to_string(thr), std::to_string(c.tp), std::to_string(c.fp), std::to_string(c.tn),
                      std::to_string(c.fn), "undefined", "undefined", "undefined"});
      continue;
    }
    const auto& c = it->confusion;
    rows.push_back({metric, std::to_string(thr), std::to_string(c.tp), std::to_string(c.fp), std::to_string(c.tn),
                    std::to_string(c.fn), fixed3(it->precision), fixed3(it->recall), fixed3(it->accuracy)});
  }
  md += fmtx::markdown_table({"Metric", "Threshold", "TP", "FP", "TN", "FN", "Precision", "Recall", "Accuracy"}, rows);
  md += "\n";
  if (!o.skipped.empty()) md += fmt::format("No threshold derivable: {}\n\n", fmt::join(o.skipped, ", "));
  for (const auto& [m, why] : o.undefined) md += fmt::format("Undefined measures for {}: {}\n\n", m, why);

  md += "## Macro-averaged precision, recall and accuracy (Q1-Q3 bands)\n\n";
  const auto& s = o.macro;
  md += fmtx::markdown_table({"Tool", "Precision mean", "Precision Q1", "Precision Q3", "Recall mean", "Recall Q1",
                              "Recall Q3", "Accuracy mean", "Accuracy Q1", "Accuracy Q3"},
                             {{s.tool_tag, fixed3(s.precision.mean), fixed3(s.precision.q1), fixed3(s.precision.q3),
                               fixed3(s.recall.mean), fixed3(s.recall.q1), fixed3(s.recall.q3),
                               fixed3(s.accuracy.mean), fixed3(s.accuracy.q1), fixed3(s.accuracy.q3)}});
  md += "\n";
  md += fmt::format("## Metrics selected for QA (precision >= {})\n\n", fixed3(cfg.min_precision));
  md += o.qa_selection.empty() ? std::string("None.\n") : fmt::format("{}\n", fmt::join(o.qa_selection, ", "));
  return md;
}

inline ValidateOutcome cmd_validate(const ValidateOptions& opt, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "validate";
  manifest.config = render_config(opt.cfg);
  std::vector<ThresholdEntry> thresholds;
  Dataset holdout;
  {
    StageTimer t(manifest, "load");
    manifest.add_input(opt.thresholds);
    manifest.add_input(opt.holdout);
    thresholds = read_thresholds(opt.thresholds);
    holdout = read_dataset(opt.holdout);
  }
  const std::string tag = opt.tool_tag.value_or(holdout.tool_tag);
  ValidateOutcome o;
  {
    StageTimer t(manifest, "evaluate");
    o = run_validation(thresholds, holdout, opt.cfg, tag);
  }
  {
    StageTimer t(manifest, "write");
    using fmtx::fixed3;
    csv::Table ev;
    ev.header = {"metric", "threshold", "tp", "fp", "tn", "fn", "precision", "recall", "accuracy"};
    for (const auto& e : o.evaluations) {
      const auto thr = std::find_if(o.applied.begin(), o.applied.end(), [&](const auto& a) { return a.first == e.metric; })->second;
      const auto& c = e.confusion;
      ev.rows.push_back({e.metric, std::to_string(thr), std::to_string(c.tp), std::to_string(c.fp),
                         std::to_string(c.tn), std::to_string(c.fn), fixed3(e.precision), fixed3(e.recall),
                         fixed3(e.accuracy)});
    }
    detail::write_table(opt.out_dir / "evaluation.csv", std::move(ev));

    csv::Table mac;
    mac.header = {"tool", "metrics", "precision_mean", "precision_q1", "precision_q3", "recall_mean", "recall_q1",
                  "recall_q3", "accuracy_mean", "accuracy_q1", "accuracy_q3"};
    const auto& s = o.macro;
    mac.rows.push_back({s.tool_tag, std::to_string(s.metric_count), fixed3(s.precision.mean), fixed3(s.precision.q1),
                        fixed3(s.precision.q3), fixed3(s.recall.mean), fixed3(s.recall.q1), fixed3(s.recall.q3),
                        fixed3(s.accuracy.mean), fixed3(s.accuracy.q1), fixed3(s.accuracy.q3)});
    detail::write_table(opt.out_dir / "macro.csv", std::move(mac));

    std::string qa = "metric\n";
    for (const auto& m : o.qa_selection) qa += m + "\n";
    write_file_atomic(opt.out_dir / "qa_selection.csv", qa);

    std::string tex = "% Threshold evaluation\n";
    for (const auto& e : o.evaluations) tex += fmtx::latex_row({e.metric, fixed3(e.precision), fixed3(e.recall), fixed3(e.accuracy)});
    tex += "% Macro-averaged\n";
    tex += fmtx::latex_row({s.tool_tag, fixed3(s.precision.mean), fixed3(s.precision.q1), fixed3(s.precision.q3),
                            fixed3(s.recall.mean), fixed3(s.recall.q1), fixed3(s.recall.q3), fixed3(s.accuracy.mean),
                            fixed3(s.accuracy.q1), fixed3(s.accuracy.q3)});
    write_file_atomic(opt.out_dir / "tables.tex", tex);
    write_file_atomic(opt.out_dir / "validate_report.md", render_validate_report(o, holdout, opt.cfg));
  }
  manifest.write(opt.out_dir / "manifest.json");
  out << render_validate_report(o, holdout, opt.cfg);
  return o;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOptions {
  fs::path derive_dir;
  fs::path validate_dir;
  fs::path out;
};

/// Concatenates the stage reports and manifests. Timings go last, in their
/// own section, so everything above it is byte-stable across reruns.
inline std::string cmd_report(const ReportOptions& opt) {
  auto need = [](const fs::path& p) {
    if (!fs::exists(p)) throw InputError("missing stage output " + p.string());
    return read_file(p);
  };
  const auto derive_md = need(opt.derive_dir / "derive_report.md");
  const auto validate_md = need(opt.validate_dir / "validate_report.md");
  const auto derive_manifest = nlohmann::ordered_json::parse(need(opt.derive_dir / "manifest.json"));
  const auto validate_manifest = nlohmann::ordered_json::parse(need(opt.validate_dir / "manifest.json"));

  std::string md = "# Metric threshold report\n\n## Run manifest\n\n";
  for (const auto* m : {&derive_manifest, &validate_manifest}) {
    auto copy = *m;
    copy.erase("timings");
    md += fmt::format("### {} (run {})\n\n```json\n{}\n```\n\n", copy.value("command", "?"),
                      copy.value("run_id", "?"), copy.dump(2));
  }
  md += derive_md;
  md += "\n";
  md += validate_md;
  md += "\n## Timings\n\n";
  for (const auto* m : {&derive_manifest, &validate_manifest}) {
    for (const auto& t : m->value("timings", nlohmann::ordered_json::array())) {
      md += fmt::format("- {} / {}: {:.1f} ms\n", m->value("command", "?"), t.value("stage", "?"), t.value("ms", 0.0));
    }
  }
  write_file_atomic(opt.out, md);
  return md;
}

}  // namespace threshkit
