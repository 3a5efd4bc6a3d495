#pragma once

// Smoothing filters for current series and the CC-phase delta series.
// Windows are centred and truncated at the series edges; averages divide by
// the number of in-range samples.

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "series.hpp"

namespace evprof {

enum class FilterKind { moving_average, moving_median, low_pass };

inline FilterKind parse_filter_kind(std::string_view s) {
  if (s == "moving-average") return FilterKind::moving_average;
  if (s == "moving-median") return FilterKind::moving_median;
  if (s == "low-pass") return FilterKind::low_pass;
  throw Error(ErrorKind::config, "unknown filter kind '" + std::string(s) + "'");
}

inline const char* to_string(FilterKind k) {
  switch (k) {
    case FilterKind::moving_average: return "moving-average";
    case FilterKind::moving_median: return "moving-median";
    case FilterKind::low_pass: return "low-pass";
  }
  return "?";
}

struct FilterParams {
  FilterKind kind = FilterKind::moving_average;
  std::size_t window = 5;        // current smoothing
  std::size_t delta_window = 7;  // median window for the delta series
  double low_pass_alpha = 0.5;
};

inline void check_window(std::size_t n) {
  if (n < 3 || n % 2 == 0)
    throw Error(ErrorKind::parameter,
                "window must be odd and >= 3, got " + std::to_string(n));
}

inline TimeSeries moving_average(const TimeSeries& series, std::size_t window) {
  check_window(window);
  const auto& x = series.values;
  const std::size_t n = x.size();
  const std::size_t half = window / 2;
  // Extended precision keeps the prefix differences exact enough on long series.
  std::vector<long double> prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  TimeSeries out{std::vector<double>(n), series.sample_period};
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(n, t + half + 1);
    out.values[t] = static_cast<double>((prefix[hi] - prefix[lo]) / static_cast<long double>(hi - lo));
  }
  return out;
}

namespace detail {

inline double sorted_median(const std::vector<double>& sorted) {
  const std::size_t m = sorted.size();
  return m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
}

// Sliding median over x[0, n) with a sorted window buffer.
inline std::vector<double> running_median(const std::vector<double>& x, std::size_t n,
                                          std::size_t window) {
  const std::size_t half = window / 2;
  std::vector<double> out(n);
  std::vector<double> buf;
  buf.reserve(window);
  std::size_t lo = 0, hi = 0;  // buffer holds x[lo, hi)
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t want_lo = t >= half ? t - half : 0;
    const std::size_t want_hi = std::min(n, t + half + 1);
    for (; hi < want_hi; ++hi) buf.insert(std::upper_bound(buf.begin(), buf.end(), x[hi]), x[hi]);
    for (; lo < want_lo; ++lo) buf.erase(std::lower_bound(buf.begin(), buf.end(), x[lo]));
    out[t] = sorted_median(buf);
  }
  return out;
}

}  // namespace detail

inline TimeSeries moving_median(const TimeSeries& series, std::size_t window) {
  check_window(window);
  return {detail::running_median(series.values, series.size(), window), series.sample_period};
}

// First-order exponential smoothing: y0 = x0, y(t) = a*x(t) + (1-a)*y(t-1).
inline TimeSeries low_pass(const TimeSeries& series, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw Error(ErrorKind::parameter, "low-pass alpha must be in (0, 1]");
  TimeSeries out{series.values, series.sample_period};
  for (std::size_t t = 1; t < out.values.size(); ++t)
    out.values[t] = alpha * series.values[t] + (1.0 - alpha) * out.values[t - 1];
  return out;
}

inline TimeSeries apply_filter(const TimeSeries& series, const FilterParams& params) {
  switch (params.kind) {
    case FilterKind::moving_average: return moving_average(series, params.window);
    case FilterKind::moving_median: return moving_median(series, params.window);
    case FilterKind::low_pass: return low_pass(series, params.low_pass_alpha);
  }
  return series;
}

// d(t) = p(t) - median(c over the window at t), t in [0, cc_end). The median
// window is truncated to the CC phase so decay samples never leak in.
inline TimeSeries delta_series(const TimeSeries& pilot, const TimeSeries& current,
                               std::size_t window, std::size_t cc_end) {
  check_window(window);
  if (pilot.size() != current.size())
    throw Error(ErrorKind::parameter, "pilot and current lengths differ");
  if (cc_end == 0) throw Error(ErrorKind::parameter, "empty CC phase");
  if (cc_end > current.size()) throw Error(ErrorKind::parameter, "cc_end beyond series");
  auto med = detail::running_median(current.values, cc_end, window);
  for (std::size_t t = 0; t < cc_end; ++t) med[t] = pilot.values[t] - med[t];
  return {std::move(med), current.sample_period};
}

}  // namespace evprof
