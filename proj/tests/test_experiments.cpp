#include <gtest/gtest.h>

#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "evprof/experiments.hpp"
#include "evprof/report.hpp"
#include "util.hpp"

using namespace evprof;
using testutil::expect_error;

namespace {

// counts[i] rows labelled EV<i>; one noisy column per class signal.
FeatureMatrix fake_features(const std::vector<std::size_t>& counts, std::size_t d = 4, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  FeatureMatrix m;
  for (std::size_t c = 0; c < d; ++c) m.columns.push_back("f" + std::to_string(c));
  m.values = Matrix(0, d);
  std::vector<double> row(d);
  for (std::size_t ev = 0; ev < counts.size(); ++ev)
    for (std::size_t j = 0; j < counts[ev]; ++j) {
      for (std::size_t c = 0; c < d; ++c) row[c] = static_cast<double>((ev >> c) & 1u) * 3.0 + noise(rng);
      m.values.append_row(row);
      m.labels.push_back("EV" + std::to_string(ev));
      m.session_ids.push_back("EV" + std::to_string(ev) + "-" + std::to_string(j));
    }
  return m;
}

std::map<std::string, std::size_t> label_counts(const FeatureMatrix& m) {
  std::map<std::string, std::size_t> c;
  for (const auto& l : m.labels) ++c[l];
  return c;
}

// Roughly ACN-shaped: many EVs, long right tail of session counts.
std::vector<std::size_t> skewed_counts(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> d(3.6, 0.8);
  std::vector<std::size_t> out(n);
  for (auto& c : out) c = std::clamp<std::size_t>(static_cast<std::size_t>(d(rng)), 10, 400);
  return out;
}

// Counts spread evenly over [10, 400] so every uniform bin can be filled.
std::vector<std::size_t> spread_counts(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> d(10, 400);
  std::vector<std::size_t> out(n);
  for (auto& c : out) c = d(rng);
  return out;
}

ExperimentConfig quick_config(Suite suite) {
  ExperimentConfig c;
  c.suite = suite;
  c.classifiers = {learn::Family::random_forest, learn::Family::knn};
  c.grids[learn::Family::random_forest] = {learn::parse_spec(learn::Family::random_forest, "n_estimators=5;max_depth=none"),
                                          learn::parse_spec(learn::Family::random_forest, "n_estimators=10;max_depth=3")};
  c.grids[learn::Family::knn] = {learn::parse_spec(learn::Family::knn, "n_neighbors=3")};
  c.repetitions = 2;
  c.folds = 3;
  c.seed = 42;
  c.selection.nof = 3;
  return c;
}

}  // namespace

TEST(Balance, RatioDefinitions) {
  EXPECT_EQ(negative_count({BalanceMode::q_prime, 3}, 50), 150u);
  EXPECT_EQ(negative_count({BalanceMode::q, 5}, 50), 10u);
  EXPECT_EQ(negative_count({BalanceMode::q, 1}, 50), negative_count({BalanceMode::q_prime, 1}, 50));
  expect_error([] { negative_count({BalanceMode::q_prime, 6}, 50); }, ErrorKind::config);
  expect_error([] { negative_count({BalanceMode::q_prime, 0.5}, 50); }, ErrorKind::config);
}

TEST(Balance, DatasetKeepsAllTargetRowsAndRequestedRatio) {
  const auto m = fake_features({50, 80, 60, 70, 40});
  for (double q : {1.0, 2.0, 3.0, 4.0, 5.0}) {
    const auto ds = build_binary_dataset(m, "EV0", {BalanceMode::q_prime, q, 50}, 7);
    EXPECT_EQ(ds.n_positive, 50u);
    EXPECT_EQ(ds.n_negative, static_cast<std::size_t>(q * 50));
    std::size_t pos = 0;
    for (std::size_t i = 0; i < ds.matrix.rows(); ++i)
      if (ds.matrix.labels[i] == "1") {
        ++pos;
        EXPECT_EQ(ds.matrix.session_ids[i].rfind("EV0-", 0), 0u);
      }
    EXPECT_EQ(pos, 50u);
    EXPECT_EQ(ds.matrix.rows(), 50u + ds.n_negative);
    EXPECT_EQ(std::set<std::string>(ds.matrix.session_ids.begin(), ds.matrix.session_ids.end()).size(),
              ds.matrix.rows());
  }
  const auto legacy = build_binary_dataset(m, "EV0", {BalanceMode::q, 5, 50}, 7);
  EXPECT_EQ(legacy.n_negative, 10u);
}

TEST(Balance, ShortfallNamed) {
  const auto m = fake_features({50, 20});
  try {
    build_binary_dataset(m, "EV0", {BalanceMode::q_prime, 2, 50}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::balance);
    EXPECT_NE(std::string(e.what()).find("short 80"), std::string::npos) << e.what();
  }
  expect_error([&] { build_binary_dataset(m, "EV1", {BalanceMode::q_prime, 1, 50}, 1); }, ErrorKind::balance);
}

TEST(Subsample, FixedGridArithmetic) {
  const auto m = fake_features(skewed_counts(300, 3));
  const auto s = subsample_multiclass(m, {"", 50, 10}, 5);
  EXPECT_EQ(s.rows(), 500u);
  const auto counts = label_counts(s);
  EXPECT_EQ(counts.size(), 50u);
  for (const auto& [l, n] : counts) EXPECT_EQ(n, 10u);
  EXPECT_EQ(subsample_multiclass(m, {"", 50, 10}, 5).session_ids, s.session_ids);
}

TEST(Subsample, NamedSizeKeepsAllRowsOfChosenEvs) {
  const auto m = fake_features(skewed_counts(200, 4));
  const auto s = subsample_multiclass(m, parse_size("small"), 1);
  const auto counts = label_counts(s), all = label_counts(m);
  EXPECT_EQ(counts.size(), 25u);
  for (const auto& [l, n] : counts) EXPECT_EQ(n, all.at(l));
  EXPECT_EQ(subsample_multiclass(m, parse_size("complete"), 1).rows(), m.rows());
}

TEST(Subsample, DeficitReported) {
  std::vector<std::size_t> counts(150, 80);
  counts.resize(250, 20);
  const auto m = fake_features(counts, 1);
  try {
    subsample_multiclass(m, {"", 200, 75}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::subsample);
    EXPECT_NE(std::string(e.what()).find("deficit 50"), std::string::npos) << e.what();
  }
}

TEST(Distribution, UniformFillsEveryBinExactly) {
  const auto m = fake_features(spread_counts(530, 5), 1);
  DistributionParams p;
  p.shape = Shape::uniform;
  const auto s = subsample_distribution(m, p, 3);
  const auto counts = label_counts(s);
  EXPECT_EQ(counts.size(), 120u);
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [l, n] : label_counts(m)) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  const auto bins = uniform_bins(lo, hi, 20);
  std::vector<std::size_t> per_bin(20, 0);
  for (const auto& [l, n] : counts)
    for (std::size_t b = 0; b < bins.size(); ++b)
      if (static_cast<double>(n) >= bins[b].lo && static_cast<double>(n) < bins[b].hi) ++per_bin[b];
  for (auto c : per_bin) EXPECT_EQ(c, 6u);
}

TEST(Distribution, NormalIsUnimodalWithExactEvCount) {
  const auto m = fake_features(skewed_counts(530, 6), 1);
  DistributionParams p;
  p.shape = Shape::normal;
  const auto s = subsample_distribution(m, p, 3);
  const auto counts = label_counts(s);
  EXPECT_EQ(counts.size(), 119u);
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [l, n] : counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  std::vector<std::size_t> hist(7, 0);
  for (const auto& [l, n] : counts) ++hist[std::min<std::size_t>(6, (n - lo) * 7 / (hi - lo + 1))];
  const auto peak = static_cast<std::size_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
  EXPECT_GT(peak, 0u);
  EXPECT_LT(peak, 6u);
  for (std::size_t b = 1; b <= peak; ++b) EXPECT_GE(hist[b], hist[b - 1]);
  for (std::size_t b = peak + 1; b < hist.size(); ++b) EXPECT_LE(hist[b], hist[b - 1]);
}

TEST(Distribution, ZeroSigmaDegeneratesToFixedCount) {
  const auto m = fake_features(skewed_counts(200, 7), 1);
  DistributionParams p;
  p.n_evs = 30;
  p.mean = 20;
  p.sigma = 0;
  const auto counts = label_counts(subsample_distribution(m, p, 1));
  EXPECT_EQ(counts.size(), 30u);
  for (const auto& [l, n] : counts) EXPECT_EQ(n, 20u);
}

TEST(Distribution, UnfillableReportsPerTarget) {
  const auto m = fake_features({10, 10, 10}, 1);
  DistributionParams p;
  p.n_evs = 5;
  p.mean = 10;
  p.sigma = 0;
  expect_error([&] { subsample_distribution(m, p, 1); }, ErrorKind::distribution);
}

TEST(Aggregate, PopulationConvention) {
  const auto r = aggregate_runs({{"k", 0.8}, {"k", 0.9}});
  EXPECT_NEAR(r.mean, 0.85, 1e-15);
  EXPECT_NEAR(r.std, 0.05, 1e-15);
  const auto one = aggregate_runs({{"k", 0.7}});
  EXPECT_EQ(one.mean, 0.7);
  EXPECT_EQ(one.std, 0.0);
  expect_error([] { aggregate_runs({{"a", 1}, {"b", 1}}); }, ErrorKind::aggregation);
  expect_error([] { aggregate_runs({}); }, ErrorKind::aggregation);
}

TEST(Summary, FailedCellsCountedButExcluded) {
  std::vector<CellRecord> cells(3);
  for (auto& c : cells) {
    c.suite = "multiclass";
    c.dataset = "small";
    c.classifier = "rf";
  }
  cells[0].accuracy = 0.8;
  cells[1].accuracy = 0.9;
  cells[1].repetition = 1;
  cells[2].repetition = 2;
  cells[2].status = "failed: split: x";
  const auto s = summarize(cells);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].runs, 2u);
  EXPECT_EQ(s[0].failed, 1u);
  EXPECT_NEAR(s[0].accuracy.mean, 0.85, 1e-15);
}

TEST(Suites, BinaryNeedsTwoQualifyingEvs) {
  auto cfg = quick_config(Suite::binary);
  expect_error([&] { run_suite(fake_features({60, 20, 20}), cfg); }, ErrorKind::balance);
}

TEST(Suites, BinaryCellsAndCvTables) {
  auto cfg = quick_config(Suite::binary);
  cfg.balance_values = {1, 2};
  cfg.keep_cv_tables = true;
  const auto report = run_suite(fake_features({50, 55, 60, 45, 52}), cfg);
  EXPECT_EQ(report.cells.size(), 2u * 2u * 4u * 2u);  // values x reps x targets x families
  for (const auto& c : report.cells) {
    EXPECT_TRUE(c.ok()) << c.status;
    EXPECT_EQ(c.suite, "binary");
    EXPECT_NE(c.target_ev, "EV3");
    EXPECT_FALSE(c.cv_table.empty());
  }
  testutil::TempDir dir("binary_report");
  const auto files = write_report(dir.path, report);
  EXPECT_TRUE(std::filesystem::exists(dir / "cells.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.md"));
  EXPECT_GT(files.size(), 3u);
  std::ifstream in(dir / "cells.csv");
  const auto back = read_cells(in);
  ASSERT_EQ(back.size(), report.cells.size());
  std::ostringstream a, b;
  write_cells(a, report.cells);
  write_cells(b, back);
  EXPECT_EQ(a.str(), b.str());
  const auto pivots = write_pivots(dir.path, back);
  EXPECT_TRUE(std::filesystem::exists(dir / "f1_vs_qprime.csv"));
  const auto pivot = testutil::slurp(dir / "f1_vs_qprime.csv");
  EXPECT_EQ(std::count(pivot.begin(), pivot.end(), '\n'), 1 + 2 * 2);  // header + classifier x Q'
}

TEST(Suites, MulticlassDeterministicAcrossWorkers) {
  auto cfg = quick_config(Suite::fixed_grid);
  cfg.grid_evs = {4, 8};
  cfg.grid_samples = {10, 20};
  const auto m = fake_features(std::vector<std::size_t>(12, 25));
  const auto a = run_suite(m, cfg);
  cfg.workers = 3;
  const auto b = run_suite(m, cfg);
  std::ostringstream sa, sb;
  write_cells(sa, a.cells);
  write_cells(sb, b.cells);
  EXPECT_EQ(sa.str(), sb.str());
  std::ostringstream ma, mb;
  write_summary_csv(ma, a.summary);
  write_summary_csv(mb, b.summary);
  EXPECT_EQ(ma.str(), mb.str());
  EXPECT_EQ(a.cells.size(), 2u * 2u * 2u * 2u);

  testutil::TempDir dir("grid_report");
  write_pivots(dir.path, a.cells);
  const auto grid = testutil::slurp(dir / "accuracy_grid.csv");
  EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 1 + 2 * 2);  // header + classifier x n_evs
}

TEST(Suites, NoLeakageIntoTestRows) {
  std::mutex mu;
  std::map<std::string, std::map<std::string, std::vector<std::vector<std::string>>>> seen;
  const AuditHook hook = [&](const AuditEvent& e) {
    std::lock_guard lock(mu);
    seen[e.cell][e.stage].push_back(e.row_ids);
  };
  auto cfg = quick_config(Suite::multiclass);
  cfg.sizes = {{"", 6, 20}};
  cfg.hook = &hook;
  cfg.workers = 2;
  run_suite(fake_features(std::vector<std::size_t>(8, 30)), cfg);
  ASSERT_EQ(seen.size(), 2u);
  for (const auto& [cell, stages] : seen) {
    const auto& tr = stages.at("split-train").at(0);
    const auto& te = stages.at("split-test").at(0);
    const std::set<std::string> train(tr.begin(), tr.end()), test(te.begin(), te.end());
    for (const char* stage : {"scaler", "selection", "cv-train", "cv-validate", "refit"}) {
      ASSERT_TRUE(stages.count(stage)) << stage;
      for (const auto& ids : stages.at(stage))
        for (const auto& id : ids) {
          EXPECT_TRUE(train.count(id)) << cell << ' ' << stage << ' ' << id;
          EXPECT_FALSE(test.count(id)) << cell << ' ' << stage << ' ' << id;
        }
    }
  }
}

TEST(Suites, DistributionSuiteRuns) {
  auto cfg = quick_config(Suite::distribution);
  cfg.classifiers = {learn::Family::knn};
  DistributionParams p;
  p.shape = Shape::uniform;
  p.bins = 3;
  p.per_bin = 2;
  cfg.distributions = {p};
  cfg.repetitions = 1;
  const auto r = run_suite(fake_features({10, 12, 15, 20, 25, 30, 35, 40}), cfg);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_TRUE(r.cells[0].ok()) << r.cells[0].status;
  EXPECT_EQ(r.cells[0].n_evs, 6u);
}

TEST(Report, EmptyCellsIsAnError) {
  expect_error([] { testutil::TempDir d("empty"); write_pivots(d.path, {}); }, ErrorKind::aggregation);
}
