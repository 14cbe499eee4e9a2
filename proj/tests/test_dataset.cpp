#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "threshkit/threshkit.hpp"

using namespace threshkit;

namespace {

csv::Table table_of(const std::string& text) {
  std::istringstream in(text);
  return csv::read(in, "fixture.csv");
}

Date day(int n) { return parse_date("2020-01-01") + std::chrono::days(n); }

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "<no error>";
}

FunctionRecord record(const std::string& fn, std::int64_t loc, std::size_t ordinal, std::uint64_t failures,
                      const std::string& file = "x.c") {
  FunctionRecord r;
  r.key = {"P", file, fn};
  r.snapshot = {"c" + std::to_string(ordinal), day(static_cast<int>(ordinal) * 10), ordinal};
  r.metrics = {{"LOC", loc}};
  r.number_of_failures = failures;
  return r;
}

}  // namespace

// --- csv / dates -------------------------------------------------------------

TEST(Csv, QuotedFieldsAndMeta) {
  const auto t = table_of("# tool_tag=X\na,b\n\"x,1\",\"he said \"\"hi\"\"\"\r\n");
  EXPECT_EQ(t.meta.at("tool_tag"), "X");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][0], "x,1");
  EXPECT_EQ(t.rows[0][1], "he said \"hi\"");
  EXPECT_EQ(csv::split_line(csv::join(t.rows[0])), t.rows[0]);
}

TEST(Csv, ColumnCountMismatchNamesRow) {
  EXPECT_NE(error_of([] { table_of("a,b\n1,2\n3\n"); }).find("row 3"), std::string::npos);
}

TEST(Date, RoundTripAndTimeSuffix) {
  EXPECT_EQ(format_date(parse_date("2021-02-28")), "2021-02-28");
  EXPECT_EQ(parse_date("2021-02-28T10:00:00"), parse_date("2021-02-28"));
  EXPECT_THROW(parse_date("2021-02-30"), InputError);
  EXPECT_THROW(parse_date("yesterday"), InputError);
}

// --- plan_snapshots ----------------------------------------------------------

TEST(PlanSnapshots, EightIntervalsEightSnapshots) {
  std::vector<Commit> commits;
  for (int d = 0; d <= 400; d += 5) commits.push_back({"c" + std::to_string(d), day(d)});
  const auto snaps = plan_snapshots(commits, {day(0), day(400), 8});
  ASSERT_EQ(snaps.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(snaps[i].ordinal, i);
    EXPECT_EQ(snaps[i].commit_date, day(static_cast<int>(50 * (i + 1))));
  }
}

TEST(PlanSnapshots, SingleCommitQualifiesForEveryBoundary) {
  const auto snaps = plan_snapshots({{"only", day(1)}}, {day(0), day(100), 4});
  ASSERT_EQ(snaps.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(snaps[i].snapshot_id, "only");
    EXPECT_EQ(snaps[i].ordinal, i);
  }
}

TEST(PlanSnapshots, HandEnumeratedBoundaries) {
  const auto snaps = plan_snapshots({{"d10", day(10)}, {"d50", day(50)}}, {day(0), day(100), 2});
  ASSERT_EQ(snaps.size(), 2u);
  EXPECT_EQ(snaps[0].snapshot_id, "d50");
  EXPECT_EQ(snaps[1].snapshot_id, "d50");
  EXPECT_EQ(snaps[1].ordinal, 1u);
}

TEST(PlanSnapshots, EmptyIntervalsAreOmittedAndFdcCommitIncluded) {
  const auto snaps = plan_snapshots({{"early", day(30)}, {"fdc", day(100)}}, {day(0), day(100), 4});
  ASSERT_EQ(snaps.size(), 3u);
  EXPECT_EQ(snaps[0].snapshot_id, "early");
  EXPECT_EQ(snaps[0].ordinal, 1u);
  EXPECT_EQ(snaps[1].ordinal, 2u);
  EXPECT_EQ(snaps[2].snapshot_id, "fdc");
  EXPECT_EQ(snaps[2].ordinal, 3u);
}

TEST(PlanSnapshots, PermutationInsensitive) {
  std::vector<Commit> commits;
  for (int d = 3; d < 200; d += 7) commits.push_back({"c" + std::to_string(d), day(d)});
  const SamplingPlan plan{day(0), day(200), 8};
  const auto ref = plan_snapshots(commits, plan);
  std::mt19937 rng(3);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(commits.begin(), commits.end(), rng);
    EXPECT_EQ(plan_snapshots(commits, plan), ref);
  }
}

TEST(PlanSnapshots, Errors) {
  EXPECT_EQ(error_of([] { plan_snapshots({}, {day(0), day(10), 8}); }), "no commits");
  EXPECT_THROW(plan_snapshots({{"a", day(1)}}, {day(10), day(10), 8}), InputError);
  EXPECT_THROW(plan_snapshots({{"a", day(1)}}, {day(0), day(10), 0}), InputError);
}

// --- ingestion ---------------------------------------------------------------

TEST(Ingest, WellFormedExport) {
  const auto t = table_of(
      "project,file_path,function_name,snapshot_id,LOC,CC\n"
      "P,a.c,f,s1,10,2\nP,a.c,g,s1,20,3\nP,b.c,f,s1,0,1\n");
  const auto recs = ingest_snapshot_export(t, {"s1", day(0), 0});
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[1].metrics.at("LOC"), 20);
  EXPECT_EQ(recs[2].key.file_path, "b.c");
  for (const auto& r : recs) EXPECT_EQ(r.number_of_failures, 0u);
}

TEST(Ingest, NegativeValueNamesRowAndColumn) {
  const auto t = table_of("project,file_path,function_name,snapshot_id,LOC\nP,a.c,f,s1,3\nP,a.c,g,s1,-1\n");
  const auto msg = error_of([&] { ingest_snapshot_export(t, {"s1", day(0), 0}, "exp.csv"); });
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("LOC"), std::string::npos) << msg;
}

TEST(Ingest, NonIntegerAndMissingValuesRejected) {
  EXPECT_THROW(ingest_snapshot_export(table_of("project,file_path,function_name,snapshot_id,LOC\nP,a,f,s,1.5\n"),
                                      {"s", day(0), 0}),
               InputError);
  EXPECT_THROW(ingest_snapshot_export(table_of("project,file_path,function_name,snapshot_id,LOC\nP,a,f,s,\n"),
                                      {"s", day(0), 0}),
               InputError);
  EXPECT_THROW(ingest_snapshot_export(table_of("project,file,function_name,snapshot_id,LOC\nP,a,f,s,1\n"),
                                      {"s", day(0), 0}),
               InputError);
}

TEST(Ingest, InconsistentMetricSetsAcrossFiles) {
  auto a = ingest_snapshot_export(table_of("project,file_path,function_name,snapshot_id,A,B\nP,a,f,s1,1,2\n"),
                                  {"s1", day(0), 0});
  const auto b = ingest_snapshot_export(table_of("project,file_path,function_name,snapshot_id,A,C\nP,a,f,s2,1,2\n"),
                                        {"s2", day(1), 1});
  a.insert(a.end(), b.begin(), b.end());
  EXPECT_NE(error_of([&] { require_uniform_metrics(a); }).find("inconsistent metric set"), std::string::npos);
}

// --- link_faults ---------------------------------------------------------------

TEST(LinkFaults, Examples) {
  const std::vector<Snapshot> snaps = {{"c0", day(0), 0}, {"c1", day(10), 1}};
  const std::vector<FunctionRecord> recs = {record("f", 1, 0, 0), record("g", 2, 0, 0), record("f", 1, 1, 0)};
  const FaultEvent one{"I-1", {"P", "x.c", "f"}, "c0", day(3)};

  auto r1 = link_faults(recs, std::vector<FaultEvent>{one}, snaps);
  EXPECT_EQ(r1.records[0].number_of_failures, 1u);
  EXPECT_EQ(r1.records[1].number_of_failures, 0u);
  EXPECT_EQ(r1.records[2].number_of_failures, 0u);

  auto r0 = link_faults(recs, std::vector<FaultEvent>{}, snaps);
  for (const auto& r : r0.records) EXPECT_FALSE(r.faulty());

  auto r2 = link_faults(recs, std::vector<FaultEvent>{one, {"I-2", one.key, "c0", day(5)}}, snaps);
  EXPECT_EQ(r2.records[0].number_of_failures, 2u);
}

TEST(LinkFaults, UnmatchedAndErrors) {
  const std::vector<Snapshot> snaps = {{"c0", day(0), 0}};
  const std::vector<FunctionRecord> recs = {record("f", 1, 0, 0)};
  auto r = link_faults(recs, std::vector<FaultEvent>{{"I-9", {"P", "x.c", "ghost"}, "c0", day(1)}}, snaps);
  ASSERT_EQ(r.unmatched.size(), 1u);
  EXPECT_EQ(r.unmatched[0].issue_id, "I-9");
  EXPECT_THROW(link_faults(recs, std::vector<FaultEvent>{{"I-1", recs[0].key, "nope", day(1)}}, snaps), InputError);
  EXPECT_THROW(link_faults(recs, std::vector<FaultEvent>{{"I-1", recs[0].key, "c0", day(-5)}}, snaps), InputError);
}

// --- dedupe ------------------------------------------------------------------------

TEST(Dedupe, RuleOneIdenticalNonFaulty) {
  const auto ds = dedupe(std::vector<FunctionRecord>{record("f", 5, 3, 0), record("f", 5, 1, 0), record("f", 5, 2, 0),
                                                     record("f", 5, 0, 0)});
  ASSERT_EQ(ds.records.size(), 1u);
  EXPECT_EQ(ds.records[0].number_of_failures, 0u);
  EXPECT_EQ(ds.records[0].snapshot.ordinal, 0u);
}

TEST(Dedupe, RuleTwoFailuresSum) {
  const auto ds = dedupe(std::vector<FunctionRecord>{record("f", 5, 0, 1), record("f", 5, 1, 2)});
  ASSERT_EQ(ds.records.size(), 1u);
  EXPECT_EQ(ds.records[0].number_of_failures, 3u);
}

TEST(Dedupe, RuleThreeFaultyRetained) {
  const auto ds = dedupe(std::vector<FunctionRecord>{record("f", 5, 0, 0), record("f", 5, 1, 1)});
  ASSERT_EQ(ds.records.size(), 1u);
  EXPECT_TRUE(ds.records[0].faulty());
  EXPECT_EQ(ds.records[0].snapshot.ordinal, 1u);
}

TEST(Dedupe, PropertiesOnRandomRecords) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FunctionRecord> recs;
    for (int i = 0; i < 60; ++i) {
      recs.push_back(record("f" + std::to_string(rng() % 5), static_cast<std::int64_t>(rng() % 3), rng() % 4,
                            rng() % 3 == 0 ? 1 + rng() % 2 : 0, rng() % 2 ? "a.c" : "b.c"));
    }
    const auto once = dedupe(recs);
    EXPECT_EQ(dedupe(once).records, once.records);
    std::uint64_t before = 0, after = 0;
    for (const auto& r : recs) before += r.number_of_failures;
    for (const auto& r : once.records) after += r.number_of_failures;
    EXPECT_EQ(before, after);
    for (std::size_t i = 0; i < once.records.size(); ++i) {
      for (std::size_t j = i + 1; j < once.records.size(); ++j) {
        EXPECT_FALSE(once.records[i].key == once.records[j].key && once.records[i].metrics == once.records[j].metrics);
      }
    }
    std::shuffle(recs.begin(), recs.end(), rng);
    EXPECT_EQ(dedupe(recs).records, once.records);
  }
}

// --- split / files -----------------------------------------------------------

TEST(SplitByClass, PartitionsColumn) {
  Dataset ds = dedupe(std::vector<FunctionRecord>{record("a", 1, 0, 0), record("b", 2, 0, 1), record("c", 3, 0, 0),
                                                  record("d", 4, 0, 2), record("e", 5, 0, 0)});
  const auto s = split_by_class(ds, "LOC");
  EXPECT_EQ(s.faulty, (std::vector<std::int64_t>{2, 4}));
  EXPECT_EQ(s.nonfaulty, (std::vector<std::int64_t>{1, 3, 5}));
  EXPECT_THROW(split_by_class(ds, "CC"), InputError);

  for (auto& r : ds.records) r.number_of_failures = 1;
  EXPECT_TRUE(split_by_class(ds, "LOC").nonfaulty.empty());
}

TEST(DatasetFile, RoundTrip) {
  const auto ds = dedupe(std::vector<FunctionRecord>{record("a", 1, 0, 0), record("b,q", 2, 1, 3)}, "Tool", "P");
  const auto text = write_dataset(ds);
  std::istringstream in(text);
  const auto back = read_dataset(csv::read(in));
  EXPECT_EQ(back.tool_tag, "Tool");
  EXPECT_EQ(back.project_tag, "P");
  EXPECT_EQ(back.records, ds.records);
  EXPECT_EQ(write_dataset(back), text);
}
