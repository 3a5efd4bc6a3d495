#pragma once

// Deliberately naive reference implementations. They share no code with the
// library and trade speed for obviousness.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t n) {
  const long h = static_cast<long>(n / 2);
  const long len = static_cast<long>(x.size());
  std::vector<double> y(x.size());
  for (long t = 0; t < len; ++t) {
    double sum = 0;
    int count = 0;
    for (long j = t - h; j <= t + h; ++j)
      if (j >= 0 && j < len) {
        sum += x[static_cast<std::size_t>(j)];
        ++count;
      }
    y[static_cast<std::size_t>(t)] = sum / count;
  }
  return y;
}

inline double median_of(std::vector<double> w) {
  std::sort(w.begin(), w.end());
  const std::size_t m = w.size();
  return m % 2 ? w[m / 2] : (w[m / 2 - 1] + w[m / 2]) / 2;
}

inline std::vector<double> moving_median(const std::vector<double>& x, std::size_t n) {
  const long h = static_cast<long>(n / 2);
  const long len = static_cast<long>(x.size());
  std::vector<double> y(x.size());
  for (long t = 0; t < len; ++t) {
    std::vector<double> w;
    for (long j = t - h; j <= t + h; ++j)
      if (j >= 0 && j < len) w.push_back(x[static_cast<std::size_t>(j)]);
    y[static_cast<std::size_t>(t)] = median_of(w);
  }
  return y;
}

inline std::vector<double> low_pass(const std::vector<double>& x, double a) {
  std::vector<double> y;
  for (std::size_t t = 0; t < x.size(); ++t) y.push_back(t == 0 ? x[0] : a * x[t] + (1 - a) * y[t - 1]);
  return y;
}

// rows[i][f], labels[i]
inline std::vector<double> chi2(const std::vector<std::vector<double>>& rows, const std::vector<std::string>& labels) {
  const std::size_t d = rows.empty() ? 0 : rows[0].size();
  std::map<std::string, int> class_rows;
  for (const auto& l : labels) class_rows[l]++;
  std::vector<double> out(d, 0.0);
  for (std::size_t f = 0; f < d; ++f) {
    double total = 0;
    for (const auto& r : rows) total += r[f];
    for (const auto& [cls, count] : class_rows) {
      double observed = 0;
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (labels[i] == cls) observed += rows[i][f];
      const double expected = total * count / static_cast<double>(rows.size());
      if (expected != 0) out[f] += (observed - expected) * (observed - expected) / expected;
    }
  }
  return out;
}

inline std::vector<double> anova_f(const std::vector<std::vector<double>>& rows, const std::vector<std::string>& labels) {
  const std::size_t d = rows.empty() ? 0 : rows[0].size();
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  const double n = static_cast<double>(rows.size()), k = static_cast<double>(groups.size());
  std::vector<double> out(d);
  for (std::size_t f = 0; f < d; ++f) {
    double grand = 0;
    for (const auto& r : rows) grand += r[f];
    grand /= n;
    double between = 0, within = 0;
    for (const auto& [cls, idx] : groups) {
      double mean = 0;
      for (auto i : idx) mean += rows[i][f];
      mean /= static_cast<double>(idx.size());
      between += static_cast<double>(idx.size()) * (mean - grand) * (mean - grand);
      for (auto i : idx) within += (rows[i][f] - mean) * (rows[i][f] - mean);
    }
    const double msb = between / (k - 1), msw = within / (n - k);
    out[f] = msw == 0 ? (msb == 0 ? 0 : std::numeric_limits<double>::infinity()) : msb / msw;
  }
  return out;
}

}  // namespace oracle
