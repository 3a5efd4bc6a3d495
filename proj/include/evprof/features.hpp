#pragma once

// Fixed feature catalog over the tail and delta series of a segment, plus the
// feature-matrix container and its CSV form.
//
// Catalog (per series, in this order; the order is also the selection
// tie-break order):
//   length, mean, median, variance, standard_deviation, skewness, kurtosis,
//   minimum, maximum, range, quantile_q{0.05,0.25,0.75,0.95}, sum, abs_energy,
//   abs_sum_of_changes, mean_abs_change, mean_change, zero_crossings,
//   count_above_mean, count_below_mean, longest_run_above_mean,
//   longest_run_below_mean, {first,last}_location_of_{maximum,minimum},
//   autocorrelation_lag{1..10}, linear_trend_{slope,intercept,rvalue},
//   number_peaks_support3, cid_ce, binned_entropy_10, fft_abs_coeff_{1..10},
//   spectral_centroid, spectral_spread, c3_lag{1..3},
//   time_reversal_asymmetry_lag{1..3}, ratio_beyond_{1,2,3}_sigma,
//   root_mean_square, mean_second_derivative_central
//
// Every feature is total: degenerate inputs (zero variance, too-short series)
// produce 0 rather than NaN.

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fftw3.h>

#include "error.hpp"
#include "ingest.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "tail.hpp"

namespace evprof {

inline constexpr std::size_t kFeaturesPerSeries = 67;
inline constexpr std::size_t kCatalogSize = 2 * kFeaturesPerSeries;

inline const std::vector<std::string>& series_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = {
        "length", "mean", "median", "variance", "standard_deviation", "skewness", "kurtosis",
        "minimum", "maximum", "range", "quantile_q0.05", "quantile_q0.25", "quantile_q0.75",
        "quantile_q0.95", "sum", "abs_energy", "abs_sum_of_changes", "mean_abs_change",
        "mean_change", "zero_crossings", "count_above_mean", "count_below_mean",
        "longest_run_above_mean", "longest_run_below_mean", "first_location_of_maximum",
        "last_location_of_maximum", "first_location_of_minimum", "last_location_of_minimum"};
    for (int lag = 1; lag <= 10; ++lag) n.push_back("autocorrelation_lag" + std::to_string(lag));
    for (const char* s : {"linear_trend_slope", "linear_trend_intercept", "linear_trend_rvalue",
                          "number_peaks_support3", "cid_ce", "binned_entropy_10"})
      n.emplace_back(s);
    for (int k = 1; k <= 10; ++k) n.push_back("fft_abs_coeff_" + std::to_string(k));
    n.emplace_back("spectral_centroid");
    n.emplace_back("spectral_spread");
    for (int lag = 1; lag <= 3; ++lag) n.push_back("c3_lag" + std::to_string(lag));
    for (int lag = 1; lag <= 3; ++lag)
      n.push_back("time_reversal_asymmetry_lag" + std::to_string(lag));
    for (int r = 1; r <= 3; ++r) n.push_back("ratio_beyond_" + std::to_string(r) + "_sigma");
    n.emplace_back("root_mean_square");
    n.emplace_back("mean_second_derivative_central");
    return n;
  }();
  return names;
}

inline const std::vector<std::string>& feature_catalog() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const char* prefix : {"tail__", "delta__"})
      for (const auto& n : series_feature_names()) out.push_back(prefix + n);
    return out;
  }();
  return names;
}

inline std::size_t catalog_index(const std::string& name) {
  const auto& cat = feature_catalog();
  auto it = std::find(cat.begin(), cat.end(), name);
  if (it == cat.end()) throw Error(ErrorKind::parameter, "unknown feature '" + name + "'");
  return static_cast<std::size_t>(it - cat.begin());
}

namespace detail {

// |X_k| for k = 0..n-1 of the unnormalised DFT, via a real-to-complex FFT.
inline std::vector<double> dft_magnitudes(const std::vector<double>& x) {
  static std::mutex planner_mutex;  // FFTW planning is not thread-safe
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan);
  }
  std::vector<double> mag(x.size());
  for (int k = 0; k < n; ++k) mag[static_cast<std::size_t>(k)] = std::abs(out[static_cast<std::size_t>(k <= n / 2 ? k : n - k)]);
  return mag;
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

// Appends the 67 per-series features of x to out.
inline void extract_series_features(const std::vector<double>& x, std::vector<double>& out) {
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  auto push = [&](double v) { out.push_back(std::isfinite(v) ? v : 0.0); };
  if (n == 0) {
    out.insert(out.end(), kFeaturesPerSeries, 0.0);
    return;
  }

  double sum = 0.0, energy = 0.0;
  for (double v : x) {
    sum += v;
    energy += v * v;
  }
  const double mean = sum / nd;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double variance = m2 / nd;
  const double stdev = std::sqrt(variance);
  std::vector<double> sorted(x);
  std::sort(sorted.begin(), sorted.end());
  const double minimum = sorted.front();
  const double maximum = sorted.back();

  push(nd);
  push(mean);
  push(detail::quantile_sorted(sorted, 0.5));
  push(variance);
  push(stdev);
  // Bias-adjusted sample skewness and excess kurtosis.
  if (n >= 3 && m2 > 0.0) {
    const double s2 = m2 / (nd - 1.0);
    push(nd / ((nd - 1.0) * (nd - 2.0)) * m3 / std::pow(s2, 1.5));
  } else {
    push(0.0);
  }
  if (n >= 4 && m2 > 0.0) {
    const double s2 = m2 / (nd - 1.0);
    push(nd * (nd + 1.0) / ((nd - 1.0) * (nd - 2.0) * (nd - 3.0)) * m4 / (s2 * s2) -
         3.0 * (nd - 1.0) * (nd - 1.0) / ((nd - 2.0) * (nd - 3.0)));
  } else {
    push(0.0);
  }
  push(minimum);
  push(maximum);
  push(maximum - minimum);
  for (double q : {0.05, 0.25, 0.75, 0.95}) push(detail::quantile_sorted(sorted, q));
  push(sum);
  push(energy);

  double abs_changes = 0.0, sq_changes = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = x[i] - x[i - 1];
    abs_changes += std::abs(d);
    sq_changes += d * d;
  }
  push(abs_changes);
  push(n > 1 ? abs_changes / (nd - 1.0) : 0.0);
  push(n > 1 ? (x[n - 1] - x[0]) / (nd - 1.0) : 0.0);

  std::size_t crossings = 0, above = 0, below = 0, run_above = 0, run_below = 0;
  std::size_t cur_above = 0, cur_below = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && (x[i] > mean) != (x[i - 1] > mean)) ++crossings;
    if (x[i] > mean) {
      ++above;
      run_above = std::max(run_above, ++cur_above);
    } else {
      cur_above = 0;
    }
    if (x[i] < mean) {
      ++below;
      run_below = std::max(run_below, ++cur_below);
    } else {
      cur_below = 0;
    }
  }
  push(static_cast<double>(crossings));
  push(static_cast<double>(above));
  push(static_cast<double>(below));
  push(static_cast<double>(run_above));
  push(static_cast<double>(run_below));

  const auto first_max = std::max_element(x.begin(), x.end()) - x.begin();
  const auto last_max = static_cast<std::ptrdiff_t>(n) - 1 -
                        (std::max_element(x.rbegin(), x.rend()) - x.rbegin());
  const auto first_min = std::min_element(x.begin(), x.end()) - x.begin();
  const auto last_min = static_cast<std::ptrdiff_t>(n) - 1 -
                        (std::min_element(x.rbegin(), x.rend()) - x.rbegin());
  push(static_cast<double>(first_max) / nd);
  push(static_cast<double>(last_max + 1) / nd);
  push(static_cast<double>(first_min) / nd);
  push(static_cast<double>(last_min + 1) / nd);

  for (std::size_t lag = 1; lag <= 10; ++lag) {
    if (lag >= n || variance <= 0.0) {
      push(0.0);
      continue;
    }
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += (x[t] - mean) * (x[t + lag] - mean);
    push(acc / (static_cast<double>(n - lag) * variance));
  }

  {
    const double tbar = (nd - 1.0) / 2.0;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double dt = static_cast<double>(t) - tbar;
      sxx += dt * dt;
      sxy += dt * (x[t] - mean);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    push(slope);
    push(mean - slope * tbar);
    push(sxx > 0.0 && m2 > 0.0 ? sxy / std::sqrt(sxx * m2) : 0.0);
  }

  {
    constexpr std::size_t support = 3;
    std::size_t peaks = 0;
    for (std::size_t i = support; i + support < n; ++i) {
      bool peak = true;
      for (std::size_t k = 1; k <= support && peak; ++k)
        peak = x[i] > x[i - k] && x[i] > x[i + k];
      peaks += peak;
    }
    push(static_cast<double>(peaks));
  }
  push(std::sqrt(sq_changes));

  {
    double entropy = 0.0;
    if (maximum > minimum) {
      std::size_t bins[10] = {};
      const double width = (maximum - minimum) / 10.0;
      for (double v : x) {
        auto b = static_cast<std::size_t>((v - minimum) / width);
        ++bins[std::min<std::size_t>(b, 9)];
      }
      for (std::size_t c : bins)
        if (c) {
          const double p = static_cast<double>(c) / nd;
          entropy -= p * std::log(p);
        }
    }
    push(entropy);
  }

  {
    const auto mag = detail::dft_magnitudes(x);
    for (std::size_t k = 1; k <= 10; ++k) push(k < n ? mag[k] : 0.0);
    double power = 0.0, centroid = 0.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
      const double p = mag[k] * mag[k];
      power += p;
      centroid += p * static_cast<double>(k) / nd;
    }
    centroid = power > 0.0 ? centroid / power : 0.0;
    double spread = 0.0;
    if (power > 0.0) {
      for (std::size_t k = 1; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) / nd - centroid;
        spread += mag[k] * mag[k] * f * f;
      }
      spread = std::sqrt(spread / power);
    }
    push(centroid);
    push(spread);
  }

  for (std::size_t lag = 1; lag <= 3; ++lag) {
    if (n <= 2 * lag) {
      push(0.0);
      continue;
    }
    double acc = 0.0;
    for (std::size_t t = 0; t + 2 * lag < n; ++t) acc += x[t + 2 * lag] * x[t + lag] * x[t];
    push(acc / static_cast<double>(n - 2 * lag));
  }
  for (std::size_t lag = 1; lag <= 3; ++lag) {
    if (n <= 2 * lag) {
      push(0.0);
      continue;
    }
    double acc = 0.0;
    for (std::size_t t = 0; t + 2 * lag < n; ++t)
      acc += x[t + 2 * lag] * x[t + 2 * lag] * x[t + lag] - x[t + lag] * x[t] * x[t];
    push(acc / static_cast<double>(n - 2 * lag));
  }
  for (int r = 1; r <= 3; ++r) {
    std::size_t beyond = 0;
    for (double v : x) beyond += std::abs(v - mean) > r * stdev;
    push(static_cast<double>(beyond) / nd);
  }
  push(std::sqrt(energy / nd));
  {
    double acc = 0.0;
    for (std::size_t t = 0; t + 2 < n; ++t) acc += 0.5 * (x[t + 2] - 2.0 * x[t + 1] + x[t]);
    push(n >= 3 ? acc / (nd - 2.0) : 0.0);
  }
}

struct FeatureVector {
  std::string session_id;
  std::string ev_label;
  std::vector<double> values;  // catalog order

  double operator[](const std::string& name) const { return values[catalog_index(name)]; }
};

inline FeatureVector extract_features(const SegmentPair& segment) {
  FeatureVector fv;
  fv.session_id = segment.session_id;
  fv.ev_label = segment.ev_label.value_or("");
  fv.values.reserve(kCatalogSize);
  extract_series_features(segment.tail.values, fv.values);
  extract_series_features(segment.delta.values, fv.values);
  return fv;
}

// Rows of feature vectors with identities and labels. Column names default to
// the catalog; after selection they are the selected subset.
struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<std::string> session_ids;
  std::vector<std::string> labels;
  Matrix values;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }

  FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
    FeatureMatrix out;
    out.columns = columns;
    out.values = values.select_rows(idx);
    out.session_ids.reserve(idx.size());
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) {
      out.session_ids.push_back(session_ids[i]);
      out.labels.push_back(labels[i]);
    }
    return out;
  }
};

inline FeatureMatrix featurize(const std::vector<SegmentPair>& segments, std::size_t workers = 1) {
  std::vector<FeatureVector> rows(segments.size());
  parallel_for(workers, segments.size(),
               [&](std::size_t i) { rows[i] = extract_features(segments[i]); });
  FeatureMatrix m;
  m.columns = feature_catalog();
  m.values = Matrix(0, kCatalogSize);
  for (auto& r : rows) {
    m.session_ids.push_back(std::move(r.session_id));
    m.labels.push_back(std::move(r.ev_label));
    m.values.append_row(r.values);
  }
  return m;
}

inline void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
  out << "session_id,ev_label";
  for (const auto& c : m.columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << detail::csv_escape(m.session_ids[r]) << ',' << detail::csv_escape(m.labels[r]);
    for (double v : m.values.row(r)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

inline FeatureMatrix read_feature_csv(std::istream& in) {
  FeatureMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, "empty feature file");
  auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "session_id" || header[1] != "ev_label")
    throw Error(ErrorKind::parse, "feature file header must start with session_id,ev_label");
  m.columns.assign(header.begin() + 2, header.end());
  m.values = Matrix(0, m.columns.size());
  std::size_t line_no = 1;
  std::vector<double> row(m.columns.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::parse, "feature file line " + std::to_string(line_no) +
                                        ": expected " + std::to_string(header.size()) + " fields");
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = detail::parse_double(f[c + 2], line_no);
    m.session_ids.push_back(f[0]);
    m.labels.push_back(f[1]);
    m.values.append_row(row);
  }
  return m;
}

}  // namespace evprof
