#pragma once

// Function-level dataset model: one record per (function, snapshot) with its
// metric vector and failure count, plus the build steps that produce it
// (lifetime sampling, export ingestion, fault linking, duplicate removal).

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "threshkit/csv.hpp"
#include "threshkit/date.hpp"
#include "threshkit/error.hpp"

namespace threshkit {

struct FunctionKey {
  std::string project_id;
  std::string file_path;
  std::string function_name;

  auto operator<=>(const FunctionKey&) const = default;
};

struct Snapshot {
  std::string snapshot_id;
  Date commit_date{};
  std::size_t ordinal = 0;

  bool operator==(const Snapshot&) const = default;
};

// Metric name -> natural-number value. Ordered so iteration is deterministic.
using MetricVector = std::map<std::string, std::int64_t>;

struct FunctionRecord {
  FunctionKey key;
  Snapshot snapshot;
  MetricVector metrics;
  std::uint64_t number_of_failures = 0;

  bool faulty() const noexcept { return number_of_failures > 0; }
  bool operator==(const FunctionRecord&) const = default;
};

struct FaultEvent {
  std::string issue_id;
  FunctionKey key;
  std::string pre_fix_snapshot_id;
  Date open_date{};
};

struct Dataset {
  std::string tool_tag;
  std::string project_tag;
  std::vector<std::string> metric_names;  // sorted
  std::vector<FunctionRecord> records;

  std::size_t faulty_count() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.faulty(); }));
  }
  bool has_metric(const std::string& name) const {
    return std::binary_search(metric_names.begin(), metric_names.end(), name);
  }
};

struct SamplingPlan {
  Date start_date{};
  Date fdc_date{};
  std::size_t interval_count = 8;

  void validate() const {
    if (!(start_date < fdc_date)) throw InputError("sampling plan: start date must precede FDC date");
    if (interval_count < 1) throw InputError("sampling plan: interval count must be >= 1");
  }
};

struct Commit {
  std::string commit_id;
  Date date{};
};

// ---------------------------------------------------------------------------
// Lifetime sampling
// ---------------------------------------------------------------------------

/// Boundary i (0-based) sits at start + floor((i+1) * span / N) days, so the
/// last boundary coincides with the FDC date.
inline Date interval_boundary(const SamplingPlan& plan, std::size_t i) {
  const auto span = (plan.fdc_date - plan.start_date).count();
  const auto offset = (static_cast<long long>(i) + 1) * span / static_cast<long long>(plan.interval_count);
  return plan.start_date + std::chrono::days{offset};
}

/// For every interval the latest commit dated on or before its boundary; an
/// interval with no such commit is skipped. Ordinals are interval indices.
inline std::vector<Snapshot> plan_snapshots(std::vector<Commit> commits, const SamplingPlan& plan) {
  if (commits.empty()) throw InputError("no commits");
  plan.validate();
  std::sort(commits.begin(), commits.end(), [](const Commit& a, const Commit& b) {
    return std::tie(a.date, a.commit_id) < std::tie(b.date, b.commit_id);
  });
  std::vector<Snapshot> out;
  for (std::size_t i = 0; i < plan.interval_count; ++i) {
    const Date boundary = interval_boundary(plan, i);
    auto it = std::upper_bound(commits.begin(), commits.end(), boundary,
                               [](Date d, const Commit& c) { return d < c.date; });
    if (it == commits.begin()) continue;
    const Commit& c = *std::prev(it);
    out.push_back(Snapshot{c.commit_id, c.date, i});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 4> kExportKeyColumns = {"project", "file_path",
                                                                      "function_name", "snapshot_id"};

namespace detail {

inline std::int64_t parse_metric_value(const std::string& text, const std::string& where) {
  std::int64_t v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc{} || p != last) {
    throw InputError(where + ": value '" + text + "' is not an integer");
  }
  if (v < 0) throw InputError(where + ": value " + text + " is negative");
  return v;
}

inline std::vector<std::string> metric_set(const MetricVector& m) {
  std::vector<std::string> names;
  names.reserve(m.size());
  for (const auto& [k, _] : m) names.push_back(k);
  return names;
}

inline void check_header_prefix(const csv::Row& header, std::span<const std::string_view> expected,
                                const std::string& source) {
  if (header.size() < expected.size()) {
    throw InputError(source + ": header has " + std::to_string(header.size()) +
                     " columns, expected at least " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (header[i] != expected[i]) {
      throw InputError(source + ": header column " + std::to_string(i + 1) + " is '" + header[i] +
                       "', expected '" + std::string(expected[i]) + "'");
    }
  }
}

}  // namespace detail

/// Parses a metric-export table belonging to `snapshot`. Failures start at 0
/// (faultiness unknown until link_faults runs).
inline std::vector<FunctionRecord> ingest_snapshot_export(const csv::Table& table, const Snapshot& snapshot,
                                                          const std::string& source = "<export>") {
  detail::check_header_prefix(table.header, kExportKeyColumns, source);
  const std::size_t first_metric = kExportKeyColumns.size();
  if (table.header.size() == first_metric) throw InputError(source + ": no metric columns");
  std::set<std::string> seen;
  for (std::size_t c = first_metric; c < table.header.size(); ++c) {
    if (table.header[c].empty()) throw InputError(source + ": empty metric name in column " + std::to_string(c + 1));
    if (!seen.insert(table.header[c]).second) {
      throw InputError(source + ": duplicate metric column '" + table.header[c] + "'");
    }
  }

  std::vector<FunctionRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string at_row = source + ": row " + std::to_string(table.line_numbers[r]);
    for (std::size_t c = 0; c < first_metric; ++c) {
      if (row[c].empty()) throw InputError(at_row + ", column " + table.header[c] + ": empty field");
    }
    if (row[3] != snapshot.snapshot_id) {
      throw InputError(at_row + ", column snapshot_id: '" + row[3] + "' does not match snapshot '" +
                       snapshot.snapshot_id + "'");
    }
    FunctionRecord rec;
    rec.key = FunctionKey{row[0], row[1], row[2]};
    rec.snapshot = snapshot;
    for (std::size_t c = first_metric; c < row.size(); ++c) {
      rec.metrics.emplace(table.header[c],
                          detail::parse_metric_value(row[c], at_row + ", column " + table.header[c]));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<FunctionRecord> ingest_snapshot_export(const std::filesystem::path& path,
                                                          const Snapshot& snapshot) {
  return ingest_snapshot_export(csv::read_file(path), snapshot, path.string());
}

/// Throws "inconsistent metric set" unless every record carries exactly the
/// same metric names. Returns the (sorted) common name set.
inline std::vector<std::string> require_uniform_metrics(std::span<const FunctionRecord> records) {
  if (records.empty()) return {};
  auto reference = detail::metric_set(records.front().metrics);
  for (const auto& rec : records) {
    if (rec.metrics.size() != reference.size() ||
        !std::equal(rec.metrics.begin(), rec.metrics.end(), reference.begin(),
                    [](const auto& kv, const std::string& n) { return kv.first == n; })) {
      auto other = detail::metric_set(rec.metrics);
      throw InputError(fmt::format("inconsistent metric set: {{{}}} vs {{{}}} (function {}/{} in snapshot {})",
                                   fmt::join(reference, ","), fmt::join(other, ","), rec.key.file_path,
                                   rec.key.function_name, rec.snapshot.snapshot_id));
    }
  }
  return reference;
}

// ---------------------------------------------------------------------------
// Fault linking
// ---------------------------------------------------------------------------

struct LinkResult {
  std::vector<FunctionRecord> records;
  std::vector<FaultEvent> unmatched;
};

/// Each event adds one failure to the record with the same key taken at the
/// event's pre-fix snapshot. When a snapshot id appears at several ordinals
/// the lowest ordinal is used.
inline LinkResult link_faults(std::vector<FunctionRecord> records, std::span<const FaultEvent> events,
                              std::span<const Snapshot> snapshots) {
  std::map<std::string, const Snapshot*> by_id;
  for (const auto& s : snapshots) {
    auto [it, inserted] = by_id.emplace(s.snapshot_id, &s);
    if (!inserted && s.ordinal < it->second->ordinal) it->second = &s;
  }
  std::map<std::pair<FunctionKey, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto k = std::make_pair(records[i].key, records[i].snapshot.snapshot_id);
    auto [it, inserted] = index.emplace(std::move(k), i);
    if (!inserted && records[i].snapshot.ordinal < records[it->second].snapshot.ordinal) it->second = i;
  }

  LinkResult result;
  for (const auto& ev : events) {
    auto snap = by_id.find(ev.pre_fix_snapshot_id);
    if (snap == by_id.end()) {
      throw InputError("fault event " + ev.issue_id + ": unknown snapshot '" + ev.pre_fix_snapshot_id + "'");
    }
    if (ev.open_date < snap->second->commit_date) {
      throw InputError("fault event " + ev.issue_id + ": opened " + format_date(ev.open_date) +
                       " before its pre-fix snapshot " + ev.pre_fix_snapshot_id + " (" +
                       format_date(snap->second->commit_date) + ")");
    }
    auto rec = index.find({ev.key, ev.pre_fix_snapshot_id});
    if (rec == index.end()) {
      result.unmatched.push_back(ev);
      continue;
    }
    records[rec->second].number_of_failures += 1;
  }
  result.records = std::move(records);
  return result;
}

// ---------------------------------------------------------------------------
// Duplicate removal
// ---------------------------------------------------------------------------

/// Collapses records sharing (key, metrics):
///  - all non-faulty: one survivor with 0 failures;
///  - any faulty: one faulty survivor carrying the summed failures, non-faulty
///    members are discarded.
/// The survivor keeps the earliest snapshot of its class. Output is sorted by
/// (key, snapshot ordinal, metrics).
inline Dataset dedupe(std::span<const FunctionRecord> records, std::string tool_tag = {},
                      std::string project_tag = {}) {
  Dataset ds;
  ds.tool_tag = std::move(tool_tag);
  ds.project_tag = std::move(project_tag);
  ds.metric_names = require_uniform_metrics(records);

  using GroupKey = std::pair<const FunctionKey*, const MetricVector*>;
  struct Less {
    bool operator()(const GroupKey& a, const GroupKey& b) const {
      if (*a.first != *b.first) return *a.first < *b.first;
      return *a.second < *b.second;
    }
  };
  std::map<GroupKey, std::size_t, Less> group_of;
  std::vector<FunctionRecord> survivors;
  for (const auto& rec : records) {
    auto [it, inserted] = group_of.emplace(GroupKey{&rec.key, &rec.metrics}, survivors.size());
    if (inserted) {
      survivors.push_back(rec);
      continue;
    }
    FunctionRecord& s = survivors[it->second];
    if (rec.faulty()) {
      if (!s.faulty() || rec.snapshot.ordinal < s.snapshot.ordinal) s.snapshot = rec.snapshot;
      s.number_of_failures += rec.number_of_failures;
    } else if (!s.faulty() && rec.snapshot.ordinal < s.snapshot.ordinal) {
      s.snapshot = rec.snapshot;
    }
  }
  std::sort(survivors.begin(), survivors.end(), [](const FunctionRecord& a, const FunctionRecord& b) {
    return std::tie(a.key, a.snapshot.ordinal, a.metrics) < std::tie(b.key, b.snapshot.ordinal, b.metrics);
  });
  ds.records = std::move(survivors);
  return ds;
}

inline Dataset dedupe(const Dataset& ds) { return dedupe(ds.records, ds.tool_tag, ds.project_tag); }

// ---------------------------------------------------------------------------
// Class split
// ---------------------------------------------------------------------------

struct ClassSplit {
  std::vector<std::int64_t> faulty;
  std::vector<std::int64_t> nonfaulty;
};

inline void require_metric(const Dataset& ds, const std::string& metric) {
  if (!ds.has_metric(metric)) {
    throw InputError("unknown metric '" + metric + "' in dataset " + ds.project_tag);
  }
}

inline ClassSplit split_by_class(const Dataset& ds, const std::string& metric) {
  require_metric(ds, metric);
  ClassSplit out;
  for (const auto& rec : ds.records) {
    const auto v = rec.metrics.at(metric);
    (rec.faulty() ? out.faulty : out.nonfaulty).push_back(v);
  }
  return out;
}

inline std::vector<std::int64_t> metric_column(const Dataset& ds, const std::string& metric) {
  require_metric(ds, metric);
  std::vector<std::int64_t> out;
  out.reserve(ds.records.size());
  for (const auto& rec : ds.records) out.push_back(rec.metrics.at(metric));
  return out;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

inline std::vector<Commit> read_commits(const csv::Table& table, const std::string& source = "<commits>") {
  static constexpr std::array<std::string_view, 2> cols = {"commit_id", "date"};
  detail::check_header_prefix(table.header, cols, source);
  std::vector<Commit> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row[0].empty()) throw InputError(source + ": row " + std::to_string(table.line_numbers[r]) + ": empty commit_id");
    try {
      out.push_back(Commit{row[0], parse_date(row[1])});
    } catch (const InputError& e) {
      throw InputError(source + ": row " + std::to_string(table.line_numbers[r]) + ", column date: " + e.what());
    }
  }
  return out;
}

inline constexpr std::array<std::string_view, 6> kFaultEventColumns = {
    "issue_id", "project", "file_path", "function_name", "pre_fix_snapshot_id", "open_date"};

inline std::vector<FaultEvent> read_fault_events(const csv::Table& table, const std::string& source = "<faults>") {
  detail::check_header_prefix(table.header, kFaultEventColumns, source);
  std::vector<FaultEvent> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string at_row = source + ": row " + std::to_string(table.line_numbers[r]);
    for (std::size_t c = 0; c < 5; ++c) {
      if (row[c].empty()) throw InputError(at_row + ", column " + table.header[c] + ": empty field");
    }
    FaultEvent ev{row[0], FunctionKey{row[1], row[2], row[3]}, row[4], {}};
    try {
      ev.open_date = parse_date(row[5]);
    } catch (const InputError& e) {
      throw InputError(at_row + ", column open_date: " + e.what());
    }
    out.push_back(std::move(ev));
  }
  return out;
}

inline std::string write_fault_events(std::span<const FaultEvent> events) {
  csv::Table t;
  t.header.assign(kFaultEventColumns.begin(), kFaultEventColumns.end());
  for (const auto& ev : events) {
    t.rows.push_back({ev.issue_id, ev.key.project_id, ev.key.file_path, ev.key.function_name,
                      ev.pre_fix_snapshot_id, format_date(ev.open_date)});
  }
  return csv::write(t);
}

/// Metric-export layout for records of one snapshot.
inline std::string write_metric_export(std::span<const FunctionRecord> records,
                                       const std::vector<std::string>& metric_names) {
  csv::Table t;
  t.header.assign(kExportKeyColumns.begin(), kExportKeyColumns.end());
  t.header.insert(t.header.end(), metric_names.begin(), metric_names.end());
  for (const auto& rec : records) {
    csv::Row row{rec.key.project_id, rec.key.file_path, rec.key.function_name, rec.snapshot.snapshot_id};
    for (const auto& m : metric_names) row.push_back(std::to_string(rec.metrics.at(m)));
    t.rows.push_back(std::move(row));
  }
  return csv::write(t);
}

inline constexpr std::array<std::string_view, 7> kDatasetColumns = {
    "project", "file_path", "function_name", "snapshot_id", "snapshot_ordinal", "commit_date",
    "number_of_failures"};

inline std::string write_dataset(const Dataset& ds) {
  csv::Table t;
  t.meta["tool_tag"] = ds.tool_tag;
  t.meta["project_tag"] = ds.project_tag;
  t.header.assign(kDatasetColumns.begin(), kDatasetColumns.end());
  t.header.insert(t.header.end(), ds.metric_names.begin(), ds.metric_names.end());
  for (const auto& rec : ds.records) {
    csv::Row row{rec.key.project_id,
                 rec.key.file_path,
                 rec.key.function_name,
                 rec.snapshot.snapshot_id,
                 std::to_string(rec.snapshot.ordinal),
                 format_date(rec.snapshot.commit_date),
                 std::to_string(rec.number_of_failures)};
    for (const auto& m : ds.metric_names) row.push_back(std::to_string(rec.metrics.at(m)));
    t.rows.push_back(std::move(row));
  }
  return csv::write(t);
}

inline Dataset read_dataset(const csv::Table& table, const std::string& source = "<dataset>") {
  detail::check_header_prefix(table.header, kDatasetColumns, source);
  const std::size_t first_metric = kDatasetColumns.size();
  if (table.header.size() == first_metric) throw InputError(source + ": no metric columns");
  Dataset ds;
  if (auto it = table.meta.find("tool_tag"); it != table.meta.end()) ds.tool_tag = it->second;
  if (auto it = table.meta.find("project_tag"); it != table.meta.end()) ds.project_tag = it->second;
  for (std::size_t c = first_metric; c < table.header.size(); ++c) ds.metric_names.push_back(table.header[c]);
  std::sort(ds.metric_names.begin(), ds.metric_names.end());
  if (std::adjacent_find(ds.metric_names.begin(), ds.metric_names.end()) != ds.metric_names.end()) {
    throw InputError(source + ": duplicate metric column");
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string at_row = source + ": row " + std::to_string(table.line_numbers[r]);
    FunctionRecord rec;
    rec.key = FunctionKey{row[0], row[1], row[2]};
    if (row[0].empty() || row[1].empty() || row[2].empty()) throw InputError(at_row + ": empty function key field");
    rec.snapshot.snapshot_id = row[3];
    rec.snapshot.ordinal = static_cast<std::size_t>(detail::parse_metric_value(row[4], at_row + ", column snapshot_ordinal"));
    try {
      rec.snapshot.commit_date = parse_date(row[5]);
    } catch (const InputError& e) {
      throw InputError(at_row + ", column commit_date: " + e.what());
    }
    rec.number_of_failures =
        static_cast<std::uint64_t>(detail::parse_metric_value(row[6], at_row + ", column number_of_failures"));
    for (std::size_t c = first_metric; c < row.size(); ++c) {
      rec.metrics.emplace(table.header[c], detail::parse_metric_value(row[c], at_row + ", column " + table.header[c]));
    }
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw InputError(source + ": dataset has no records");
  return ds;
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  return read_dataset(csv::read_file(path), path.string());
}

}  // namespace threshkit
