#pragma once

// Min-max scaling and univariate feature selection (chi2 / ANOVA F). Every
// fit here sees training rows only; AuditHook lets callers observe exactly
// which rows each fit consumed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "features.hpp"

namespace evprof {

struct AuditEvent {
  std::string cell;
  std::string stage;
  std::vector<std::string> row_ids;
};

// May be called concurrently from parallel cells.
using AuditHook = std::function<void(const AuditEvent&)>;

inline void audit(const AuditHook* hook, std::string_view cell, std::string_view stage,
                  const std::vector<std::string>& ids) {
  if (hook && *hook) (*hook)(AuditEvent{std::string(cell), std::string(stage), ids});
}

struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;
};

inline MinMaxScaler fit_minmax(const Matrix& train) {
  if (train.rows() == 0) throw Error(ErrorKind::selection, "cannot fit scaler on zero rows");
  MinMaxScaler s;
  s.min.assign(train.cols(), std::numeric_limits<double>::infinity());
  s.max.assign(train.cols(), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < train.rows(); ++r)
    for (std::size_t c = 0; c < train.cols(); ++c) {
      s.min[c] = std::min(s.min[c], train(r, c));
      s.max[c] = std::max(s.max[c], train(r, c));
    }
  return s;
}

// (x - min) / (max - min), clipped to [0, 1]; constant columns map to 0.
inline double minmax_value(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

inline Matrix apply_minmax(const Matrix& m, const MinMaxScaler& s) {
  if (m.cols() != s.min.size()) throw Error(ErrorKind::selection, "scaler column mismatch");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = minmax_value(m(r, c), s.min[c], s.max[c]);
  return out;
}

namespace detail {

struct ClassIndex {
  std::vector<std::string> names;         // sorted
  std::vector<std::size_t> of_row;        // class index per row
  std::vector<std::size_t> counts;
};

inline ClassIndex index_classes(const std::vector<std::string>& labels) {
  ClassIndex ci;
  std::map<std::string, std::size_t> ids;
  for (const auto& l : labels) ids.emplace(l, 0);
  for (auto& [name, id] : ids) {
    id = ci.names.size();
    ci.names.push_back(name);
  }
  ci.counts.assign(ci.names.size(), 0);
  ci.of_row.reserve(labels.size());
  for (const auto& l : labels) {
    ci.of_row.push_back(ids[l]);
    ++ci.counts[ci.of_row.back()];
  }
  return ci;
}

}  // namespace detail

inline std::vector<double> chi2_scores(const Matrix& scaled, const std::vector<std::string>& labels) {
  if (scaled.rows() != labels.size()) throw Error(ErrorKind::selection, "label count mismatch");
  const auto ci = detail::index_classes(labels);
  if (ci.names.size() < 2) throw Error(ErrorKind::selection, "chi2 needs at least two classes");
  const std::size_t k = ci.names.size();
  const double n = static_cast<double>(scaled.rows());
  std::vector<double> scores(scaled.cols(), 0.0);
  std::vector<double> observed(k);
  for (std::size_t c = 0; c < scaled.cols(); ++c) {
    std::fill(observed.begin(), observed.end(), 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < scaled.rows(); ++r) {
      const double v = scaled(r, c);
      if (v < 0.0) throw Error(ErrorKind::selection, "chi2 requires non-negative features");
      observed[ci.of_row[r]] += v;
      total += v;
    }
    double score = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double expected = static_cast<double>(ci.counts[j]) / n * total;
      if (expected > 0.0) score += (observed[j] - expected) * (observed[j] - expected) / expected;
    }
    scores[c] = score;
  }
  return scores;
}

// One-way ANOVA F per column. A column with zero within-group spread scores
// +inf when its group means differ and 0 when they do not.
inline std::vector<double> anova_f_scores(const Matrix& m, const std::vector<std::string>& labels) {
  if (m.rows() != labels.size()) throw Error(ErrorKind::selection, "label count mismatch");
  const auto ci = detail::index_classes(labels);
  const std::size_t k = ci.names.size();
  const std::size_t n = m.rows();
  if (k < 2) throw Error(ErrorKind::selection, "ANOVA needs at least two classes");
  if (n <= k) throw Error(ErrorKind::selection, "ANOVA needs more rows than classes");
  std::vector<double> scores(m.cols(), 0.0);
  std::vector<double> group_mean(k);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::fill(group_mean.begin(), group_mean.end(), 0.0);
    double grand = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      group_mean[ci.of_row[r]] += m(r, c);
      grand += m(r, c);
    }
    grand /= static_cast<double>(n);
    for (std::size_t j = 0; j < k; ++j) group_mean[j] /= static_cast<double>(ci.counts[j]);
    double within = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = m(r, c) - group_mean[ci.of_row[r]];
      within += d * d;
    }
    double between = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = group_mean[j] - grand;
      between += static_cast<double>(ci.counts[j]) * d * d;
    }
    // Rounding in the means leaves ~1e-30 residue on constant data.
    double scale = 0.0;
    for (std::size_t r = 0; r < n; ++r) scale = std::max(scale, std::abs(m(r, c)));
    const double tiny = 1e-24 * (scale * scale + 1e-300) * static_cast<double>(n);
    if (within <= tiny) {
      scores[c] = between > tiny ? std::numeric_limits<double>::infinity() : 0.0;
      continue;
    }
    scores[c] = (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
  }
  return scores;
}

enum class Scorer { chi2, anova_f };

inline Scorer parse_scorer(std::string_view s) {
  if (s == "chi2") return Scorer::chi2;
  if (s == "anova-f" || s == "f_classif") return Scorer::anova_f;
  throw Error(ErrorKind::config, "unknown scorer '" + std::string(s) + "'");
}

inline const char* to_string(Scorer s) { return s == Scorer::chi2 ? "chi2" : "anova-f"; }

struct SelectionConfig {
  std::size_t nof = 100;
  Scorer scorer = Scorer::chi2;
};

struct SelectionModel {
  Scorer scorer = Scorer::chi2;
  std::vector<std::size_t> selected;        // column indices, best first
  std::vector<std::string> selected_names;
  MinMaxScaler scaler;                      // fitted on all input columns (chi2 path)
  std::vector<double> scores;               // per input column
  std::string warning;
};

// Indices of the top-nof scores, descending; ties keep column order. NaN
// scores rank last.
inline std::vector<std::size_t> select_k_best(const std::vector<double>& scores, std::size_t nof,
                                              std::string* warning = nullptr) {
  if (nof == 0) throw Error(ErrorKind::selection, "nof must be >= 1");
  if (nof > scores.size()) {
    if (warning)
      *warning = "nof " + std::to_string(nof) + " exceeds " + std::to_string(scores.size()) +
                 " features; selecting all";
    nof = scores.size();
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    return std::isnan(scores[i]) ? -std::numeric_limits<double>::infinity() : scores[i];
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  order.resize(nof);
  return order;
}

inline SelectionModel fit_selection(const FeatureMatrix& train, const SelectionConfig& config,
                                    const AuditHook* hook = nullptr, std::string_view cell = {}) {
  SelectionModel model;
  model.scorer = config.scorer;
  audit(hook, cell, "scaler", train.session_ids);
  model.scaler = fit_minmax(train.values);
  audit(hook, cell, "selection", train.session_ids);
  model.scores = config.scorer == Scorer::chi2
                     ? chi2_scores(apply_minmax(train.values, model.scaler), train.labels)
                     : anova_f_scores(train.values, train.labels);
  model.selected = select_k_best(model.scores, config.nof, &model.warning);
  for (std::size_t c : model.selected) model.selected_names.push_back(train.columns.at(c));
  return model;
}

// Scales (chi2 path) and projects rows onto the selected columns.
inline Matrix transform_rows(const Matrix& m, const SelectionModel& model) {
  if (m.cols() != model.scaler.min.size())
    throw Error(ErrorKind::prediction, "expected " + std::to_string(model.scaler.min.size()) +
                                           " feature columns, got " + std::to_string(m.cols()));
  Matrix out(m.rows(), model.selected.size());
  const bool scale = model.scorer == Scorer::chi2;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < model.selected.size(); ++j) {
      const std::size_t c = model.selected[j];
      out(r, j) = scale ? minmax_value(m(r, c), model.scaler.min[c], model.scaler.max[c]) : m(r, c);
    }
  return out;
}

inline FeatureMatrix transform(const FeatureMatrix& m, const SelectionModel& model) {
  FeatureMatrix out;
  out.columns = model.selected_names;
  out.session_ids = m.session_ids;
  out.labels = m.labels;
  out.values = transform_rows(m.values, model);
  return out;
}

}  // namespace evprof
