#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "../error.hpp"
#include "../parallel.hpp"
#include "../random.hpp"
#include "../selection.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace evprof::learn {

namespace detail {
// Row indices grouped by class, classes in lexicographic order.
inline std::map<std::string, std::vector<std::size_t>> rows_by_class(const std::vector<std::string>& labels) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}
}  // namespace detail

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per class: test count = round(size * test_fraction) kept within [1, size - 1].
inline Split stratified_split(const std::vector<std::string>& labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(ErrorKind::parameter, "test fraction must be in (0, 1)");
  Rng rng(seed);
  Split s;
  for (auto& [label, rows] : detail::rows_by_class(labels)) {
    if (rows.size() < 2)
      throw Error(ErrorKind::split, "class '" + label + "' has " + std::to_string(rows.size()) +
                                        " row; stratified split needs at least 2");
    shuffle(std::span<std::size_t>(rows), rng);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(rows.size()) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
    s.test.insert(s.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.insert(s.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// Deals each class's shuffled rows round-robin over the folds; the starting
// fold rotates with the running row count so fold sizes stay level overall.
inline std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<std::string>& labels, std::size_t k,
                                                              std::uint64_t seed,
                                                              std::vector<std::string>* warnings = nullptr) {
  if (k < 2) throw Error(ErrorKind::parameter, "k must be >= 2, got " + std::to_string(k));
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (auto& [label, rows] : detail::rows_by_class(labels)) {
    if (rows.size() < k && warnings)
      warnings->push_back("class '" + label + "' has " + std::to_string(rows.size()) + " rows for " +
                          std::to_string(k) + " folds");
    shuffle(std::span<std::size_t>(rows), rng);
    for (std::size_t i = 0; i < rows.size(); ++i) folds[(offset + i) % k].push_back(rows[i]);
    offset = (offset + rows.size()) % k;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

enum class Scoring { f1_positive, accuracy };

inline const char* to_string(Scoring s) { return s == Scoring::accuracy ? "accuracy" : "f1-positive"; }

struct GridOptions {
  std::size_t folds = 5;
  Scoring scoring = Scoring::accuracy;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string positive = kPositiveLabel;
  const AuditHook* hook = nullptr;
  std::string cell;
};

struct CvRow {
  std::size_t combo;
  std::size_t fold;
  double score;
};

struct GridResult {
  std::size_t best_index = 0;
  ClassifierSpec best;
  double best_score = 0.0;
  std::vector<double> mean_scores;  // per grid entry
  std::vector<CvRow> table;         // combo-major, fold-minor
  TrainedModel model;               // best spec refitted on all rows
  std::vector<std::string> warnings;
};

inline double score_predictions(const std::vector<std::string>& truth, const std::vector<std::string>& pred,
                                Scoring scoring, const std::string& positive) {
  const auto r = evaluate(truth, pred, scoring == Scoring::accuracy ? Mode::multiclass : Mode::binary, positive);
  return scoring == Scoring::accuracy ? r.accuracy : r.positive_f1;
}

namespace detail {

struct FoldData {
  Matrix train_x, valid_x;
  std::vector<std::string> train_y, valid_y;
};

// kNN grids share one neighbour search per (fold, metric); voting for each
// (k, weights) reuses it. Produces exactly what KnnModel::predict_one would.
inline void knn_grid_scores(const std::vector<ClassifierSpec>& grid, const std::vector<std::size_t>& members,
                            const std::vector<FoldData>& folds, const GridOptions& opt, std::vector<double>& scores) {
  const std::size_t nf = folds.size();
  const Metric metrics[] = {Metric::euclidean, Metric::manhattan, Metric::cosine};
  std::vector<std::size_t> max_k(3, 0);
  for (std::size_t c : members) {
    auto& k = max_k[static_cast<std::size_t>(grid[c].knn.metric)];
    k = std::max(k, grid[c].knn.n_neighbors);
  }

  // neighbours[fold * 3 + metric][valid row]
  std::vector<std::vector<std::vector<Neighbor>>> neighbours(nf * 3);
  parallel_for(opt.workers, nf * 3, [&](std::size_t job) {
    const std::size_t f = job / 3, m = job % 3;
    if (max_k[m] == 0) return;
    const auto& fd = folds[f];
    auto& out = neighbours[job];
    out.resize(fd.valid_x.rows());
    for (std::size_t r = 0; r < fd.valid_x.rows(); ++r)
      out[r] = nearest(fd.train_x, fd.valid_x.row(r), metrics[m], max_k[m]);
  });

  for (std::size_t f = 0; f < nf; ++f) {
    const auto& fd = folds[f];
    const auto ci = evprof::detail::index_classes(fd.train_y);
    for (std::size_t c : members) {
      const auto& p = grid[c].knn;
      double s = -std::numeric_limits<double>::infinity();
      if (ci.names.size() >= 2 && p.n_neighbors > 0) {
        std::vector<std::string> pred;
        pred.reserve(fd.valid_y.size());
        for (const auto& nb : neighbours[f * 3 + static_cast<std::size_t>(p.metric)])
          pred.push_back(ci.names[knn_vote(nb, p.n_neighbors, p.weights, ci.of_row, ci.names.size())]);
        s = score_predictions(fd.valid_y, pred, opt.scoring, opt.positive);
      }
      scores[c * nf + f] = s;
    }
  }
}

inline std::size_t depth_limit(const std::optional<std::size_t>& d) {
  return d ? *d : std::numeric_limits<std::size_t>::max();
}

// Tree and forest members that differ only in max_depth (and, for forests,
// n_estimators) are scored from one unlimited model per fold: trees are grown
// path-seeded, so each member equals the envelope's first n trees cut at its
// depth.
inline void tree_grid_scores(const std::vector<ClassifierSpec>& grid, const std::vector<std::size_t>& members,
                             const std::vector<FoldData>& folds, const GridOptions& opt, std::vector<double>& scores) {
  const std::size_t nf = folds.size();
  ClassifierSpec envelope = grid[members.front()];
  envelope.tree.max_depth.reset();
  envelope.forest.max_depth.reset();
  envelope.forest.n_estimators = 0;
  for (std::size_t c : members) envelope.forest.n_estimators = std::max(envelope.forest.n_estimators, grid[c].forest.n_estimators);

  parallel_for(opt.workers, nf, [&](std::size_t f) {
    const auto& fd = folds[f];
    std::optional<TrainedModel> model;
    try {
      model = train(envelope, fd.train_x, fd.train_y, derive_seed(opt.seed, "cv", f));
    } catch (const Error&) {
      return;  // every member keeps -inf for this fold
    }
    for (std::size_t c : members) {
      const auto& spec = grid[c];
      std::vector<std::string> pred;
      pred.reserve(fd.valid_y.size());
      if (spec.family == Family::decision_tree) {
        const auto& t = std::get<DecisionTree>(model->state);
        const std::size_t depth = depth_limit(spec.tree.max_depth);
        for (std::size_t r = 0; r < fd.valid_x.rows(); ++r)
          pred.push_back(model->classes[t.predict_one(fd.valid_x.row(r), depth)]);
      } else {
        if (spec.forest.n_estimators == 0) continue;
        const auto& forest = std::get<ForestModel>(model->state);
        const std::size_t depth = depth_limit(spec.forest.max_depth);
        for (std::size_t r = 0; r < fd.valid_x.rows(); ++r)
          pred.push_back(
              model->classes[forest.predict_one(fd.valid_x.row(r), spec.forest.n_estimators, depth)]);
      }
      scores[c * nf + f] = score_predictions(fd.valid_y, pred, opt.scoring, opt.positive);
    }
  });
}

}  // namespace detail

// Exhaustive search over `grid` by mean k-fold score. Failing combinations
// score -inf; ties go to the earliest grid entry. The winner is refitted on
// every row of `rows`.
inline GridResult grid_search(const std::vector<ClassifierSpec>& grid, const FeatureMatrix& rows,
                              const GridOptions& opt = {}) {
  if (grid.empty()) throw Error(ErrorKind::parameter, "empty hyperparameter grid");
  GridResult res;
  const auto folds = stratified_kfold(rows.labels, opt.folds, derive_seed(opt.seed, "folds"), &res.warnings);
  const std::size_t nf = folds.size();

  std::vector<detail::FoldData> data(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<std::size_t> tr;
    for (std::size_t g = 0; g < nf; ++g)
      if (g != f) tr.insert(tr.end(), folds[g].begin(), folds[g].end());
    std::sort(tr.begin(), tr.end());
    auto t = rows.select_rows(tr);
    auto v = rows.select_rows(folds[f]);
    audit(opt.hook, opt.cell, "cv-train", t.session_ids);
    audit(opt.hook, opt.cell, "cv-validate", v.session_ids);
    data[f] = {std::move(t.values), std::move(v.values), std::move(t.labels), std::move(v.labels)};
  }

  std::vector<double> scores(grid.size() * nf, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> knn_members;
  std::map<std::tuple<Family, Criterion, std::size_t>, std::vector<std::size_t>> tree_groups;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const auto& s = grid[c];
    switch (s.family) {
      case Family::knn: knn_members.push_back(c); break;
      case Family::decision_tree: tree_groups[{s.family, s.tree.criterion, 0}].push_back(c); break;
      case Family::random_forest:
        tree_groups[{s.family, s.forest.criterion, s.forest.max_features}].push_back(c);
        break;
    }
  }
  if (!knn_members.empty()) detail::knn_grid_scores(grid, knn_members, data, opt, scores);
  for (const auto& [key, members] : tree_groups) detail::tree_grid_scores(grid, members, data, opt, scores);

  res.mean_scores.assign(grid.size(), 0.0);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    double sum = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      res.table.push_back({c, f, scores[c * nf + f]});
      sum += scores[c * nf + f];
    }
    res.mean_scores[c] = sum / static_cast<double>(nf);
  }
  res.best_index = 0;
  for (std::size_t c = 1; c < grid.size(); ++c)
    if (res.mean_scores[c] > res.mean_scores[res.best_index]) res.best_index = c;
  res.best = grid[res.best_index];
  res.best_score = res.mean_scores[res.best_index];
  audit(opt.hook, opt.cell, "refit", rows.session_ids);
  res.model = train(res.best, rows.values, rows.labels, opt.seed);
  return res;
}

inline void write_cv_table(std::ostream& out, const std::vector<ClassifierSpec>& grid, const GridResult& r,
                           bool header = true) {
  if (header) out << "family,params,fold,score\n";
  for (const auto& row : r.table) {
    out << to_string(grid[row.combo].family) << ',' << params_string(grid[row.combo]) << ',' << row.fold << ','
        << evprof::detail::format_double(row.score) << '\n';
  }
}

}  // namespace evprof::learn
