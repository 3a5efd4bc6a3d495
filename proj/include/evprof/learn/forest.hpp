#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "../random.hpp"
#include "tree.hpp"

namespace evprof::learn {

struct ForestParams {
  std::size_t n_estimators = 10;
  std::optional<std::size_t> max_depth;
  Criterion criterion = Criterion::gini;
  std::size_t max_features = 0;  // 0 = ceil(sqrt(n_features))

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

inline std::size_t default_max_features(std::size_t n_features) {
  auto m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features))));
  return std::max<std::size_t>(m, 1);
}

inline std::uint64_t tree_seed(std::uint64_t seed, std::size_t tree) { return derive_seed(seed, "tree", tree); }
inline std::uint64_t split_seed(std::uint64_t tree_seed) { return derive_seed(tree_seed, "splits"); }

// Draws n row positions with replacement from the tree's generator.
inline std::vector<std::size_t> bootstrap_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = static_cast<std::size_t>(uniform_below(rng, n));
  return rows;
}

struct ForestModel {
  ForestParams params;
  std::vector<DecisionTree> trees;
  std::size_t n_classes = 0;

  void fit(const Matrix& x, std::span<const std::size_t> y, std::size_t classes, std::uint64_t seed) {
    if (params.n_estimators == 0) throw Error(ErrorKind::training, "forest needs at least one tree");
    n_classes = classes;
    TreeOptions opts{params.criterion, params.max_depth,
                     params.max_features ? params.max_features : default_max_features(x.cols())};
    trees.assign(params.n_estimators, {});
    for (std::size_t t = 0; t < params.n_estimators; ++t) {
      const std::uint64_t ts = tree_seed(seed, t);
      Rng rng(ts);
      trees[t].fit(x, y, classes, bootstrap_indices(x.rows(), rng), opts, split_seed(ts));
    }
  }

  std::size_t predict_one(std::span<const double> row) const {
    return predict_one(row, trees.size(), std::numeric_limits<std::size_t>::max());
  }

  // Vote of the first `n_trees` trees, each cut at `max_depth`.
  std::size_t predict_one(std::span<const double> row, std::size_t n_trees, std::size_t max_depth) const {
    std::vector<std::size_t> votes(n_classes, 0);
    for (std::size_t t = 0; t < n_trees; ++t) ++votes[trees[t].predict_one(row, max_depth)];
    return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
};

}  // namespace evprof::learn
