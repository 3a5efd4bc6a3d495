#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "evprof/signal.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace evprof;
using testutil::expect_error;

namespace {
TimeSeries ts(std::vector<double> v) { return TimeSeries{std::move(v), 1.0}; }

void expect_near_all(const std::vector<double>& got, const std::vector<double>& want, double tol = 1e-12) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "at " << i;
}
}  // namespace

TEST(MovingAverage, WindowedMeanWithEdgeTruncation) {
  expect_near_all(moving_average(ts({1, 2, 3, 4, 5}), 3).values, {1.5, 2, 3, 4, 4.5});
  expect_near_all(moving_average(ts({0, 0, 9, 0, 0}), 3).values, {0, 3, 3, 3, 0});
}

TEST(MovingAverage, ConstantSeriesUnchanged) {
  for (std::size_t n : {3u, 5u, 7u, 101u}) expect_near_all(moving_average(ts({7, 7, 7, 7}), n).values, {7, 7, 7, 7});
}

TEST(MovingAverage, RejectsBadWindows) {
  expect_error([] { moving_average(ts({1, 2, 3}), 4); }, ErrorKind::parameter);
  expect_error([] { moving_average(ts({1, 2, 3}), 1); }, ErrorKind::parameter);
  expect_error([] { moving_median(ts({1, 2, 3}), 2); }, ErrorKind::parameter);
}

TEST(MovingMedian, EvenEdgeWindowsAverageTheMiddlePair) {
  expect_near_all(moving_median(ts({1, 9, 1, 1, 9, 1}), 3).values, {5, 1, 1, 1, 1, 5});
  expect_near_all(moving_median(ts({1, 2, 3}), 3).values, {1.5, 2, 2.5});
  expect_near_all(moving_median(ts({4, 4, 4, 4, 4}), 5).values, {4, 4, 4, 4, 4});
}

TEST(MovingMedian, RemovesNarrowSpikeFromConstantRegion) {
  std::vector<double> x(40, 3.0);
  x[20] = 50;
  x[21] = 60;
  const auto y = moving_median(ts(x), 7).values;
  for (double v : y) EXPECT_EQ(v, 3.0);
}

TEST(LowPass, RecurrenceAndIdentity) {
  expect_near_all(low_pass(ts({0, 10, 0, 0}), 0.5).values, {0, 5, 2.5, 1.25});
  expect_near_all(low_pass(ts({3, -1, 8}), 1.0).values, {3, -1, 8});
  expect_near_all(low_pass(ts({2, 2, 2}), 0.3).values, {2, 2, 2});
}

TEST(LowPass, RejectsAlphaOutsideUnitInterval) {
  expect_error([] { low_pass(ts({1}), 0.0); }, ErrorKind::parameter);
  expect_error([] { low_pass(ts({1}), 1.5); }, ErrorKind::parameter);
}

TEST(Delta, PilotMinusMedianOverCcPhase) {
  expect_near_all(delta_series(ts({32, 32, 32}), ts({30, 31, 30}), 3, 3).values, {1.5, 2, 1.5});
  expect_near_all(delta_series(ts({32, 32, 32, 32, 32}), ts({30, 30, 90, 30, 30}), 3, 5).values, {2, 2, 2, 2, 2});
  expect_near_all(delta_series(ts({32, 32, 32, 32}), ts({32, 32, 32, 32}), 3, 4).values, {0, 0, 0, 0});
}

TEST(Delta, MedianWindowStaysInsideCcPhase) {
  const auto d = delta_series(ts({10, 10, 10, 10}), ts({8, 8, 0, 0}), 3, 2).values;
  expect_near_all(d, {2, 2});
}

TEST(Delta, EmptyCcPhaseIsAnError) {
  expect_error([] { delta_series(ts({1, 1, 1}), ts({1, 1, 1}), 3, 0); }, ErrorKind::parameter);
}

TEST(FilterProperties, MatchNaiveReferences) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t len = 1 + rng() % 700;
    const std::size_t n = 3 + 2 * (rng() % 50);
    const auto x = testutil::random_series(rng, len);
    expect_near_all(moving_average(ts(x), n).values, oracle::moving_average(x, n), 1e-9);
    expect_near_all(moving_median(ts(x), n).values, oracle::moving_median(x, n), 1e-9);
    const double a = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    expect_near_all(low_pass(ts(x), a).values, oracle::low_pass(x, a), 1e-9);
  }
}

TEST(FilterProperties, LengthPreservingAndBounded) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = testutil::random_series(rng, 1 + rng() % 300);
    const std::size_t n = 3 + 2 * (rng() % 10);
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    for (const auto& y : {moving_average(ts(x), n).values, moving_median(ts(x), n).values}) {
      ASSERT_EQ(y.size(), x.size());
      for (double v : y) {
        EXPECT_GE(v, *lo - 1e-12);
        EXPECT_LE(v, *hi + 1e-12);
      }
    }
    EXPECT_EQ(low_pass(ts(x), 0.4).size(), x.size());
  }
}

TEST(FilterProperties, CommuteWithAddingAConstant) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = testutil::random_series(rng, 1 + rng() % 300);
    const double c = static_cast<double>(rng() % 200) - 100.0;
    auto shifted = x;
    for (auto& v : shifted) v += c;
    const std::size_t n = 3 + 2 * (rng() % 10);
    auto base_avg = moving_average(ts(x), n).values;
    auto base_med = moving_median(ts(x), n).values;
    for (auto& v : base_avg) v += c;
    for (auto& v : base_med) v += c;
    expect_near_all(moving_average(ts(shifted), n).values, base_avg, 1e-9);
    expect_near_all(moving_median(ts(shifted), n).values, base_med, 1e-9);
  }
}

TEST(FilterParams, KindsParseAndDispatch) {
  EXPECT_EQ(parse_filter_kind("moving-median"), FilterKind::moving_median);
  expect_error([] { parse_filter_kind("kalman"); }, ErrorKind::config);
  FilterParams p;
  p.kind = FilterKind::low_pass;
  p.low_pass_alpha = 0.5;
  expect_near_all(apply_filter(ts({0, 10, 0, 0}), p).values, {0, 5, 2.5, 1.25});
}
