#pragma once

// CART-style classification tree over axis-aligned thresholds. Thresholds sit
// at midpoints between consecutive distinct values; the best split minimises
// weighted child impurity, ties going to the lower feature index and then
// the lower threshold.
//
// Feature subsampling draws from a generator seeded by the node's path from
// the root, so a depth-limited tree is exactly the unlimited tree cut at that
// depth. Grid search relies on this.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "../error.hpp"
#include "../matrix.hpp"
#include "../random.hpp"

namespace evprof::learn {

enum class Criterion { gini, entropy };

inline Criterion parse_criterion(std::string_view s) {
  if (s == "gini") return Criterion::gini;
  if (s == "entropy") return Criterion::entropy;
  throw Error(ErrorKind::config, "unknown criterion '" + std::string(s) + "'");
}
inline const char* to_string(Criterion c) { return c == Criterion::gini ? "gini" : "entropy"; }

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::uint32_t klass = 0;    // majority class (meaningful at leaves)

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeOptions {
  Criterion criterion = Criterion::gini;
  std::optional<std::size_t> max_depth;  // nullopt = unlimited
  std::size_t max_features = 0;          // 0 or >= n_features = consider all
};

class DecisionTree {
public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  // Fits on the given row indices (duplicates allowed, e.g. a bootstrap).
  // `split_seed` only matters when feature subsampling is active.
  void fit(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
           std::vector<std::size_t> rows, const TreeOptions& options, std::uint64_t split_seed = 0) {
    if (rows.empty()) throw Error(ErrorKind::training, "tree needs at least one row");
    nodes_.clear();
    Builder b{x, y, n_classes, options, rows, {}, {}, {}, {}, {}};
    b.run(nodes_, split_seed);
  }

  std::size_t predict_one(std::span<const double> row) const {
    return predict_one(row, std::numeric_limits<std::size_t>::max());
  }

  // Prediction of the same tree cut at `max_depth`.
  std::size_t predict_one(std::span<const double> row, std::size_t max_depth) const {
    std::size_t i = 0;
    for (std::size_t d = 0; d < max_depth && nodes_[i].feature >= 0; ++d)
      i = row[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold ? nodes_[i].left
                                                                                 : nodes_[i].right;
    return nodes_[i].klass;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (nodes_[i].feature >= 0) {
        stack.push_back({nodes_[i].left, d + 1});
        stack.push_back({nodes_[i].right, d + 1});
      }
    }
    return best;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
  struct Builder {
    const Matrix& x;
    std::span<const std::size_t> y;
    std::size_t n_classes;
    const TreeOptions& options;
    std::vector<std::size_t>& rows;

    std::vector<std::pair<double, std::uint32_t>> pairs;
    std::vector<double> xlogx;  // c * log(c) for integer counts
    std::vector<std::size_t> left_counts, node_counts, features;

    struct Task {
      std::size_t node, begin, end, depth;
      std::uint64_t seed;
    };

    static std::uint32_t majority(const std::vector<std::size_t>& counts) {
      return static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }

    // Larger is better; equivalent to minimising weighted child impurity.
    double gain_proxy(double nl, double nr, double left_term, double right_term) const {
      if (options.criterion == Criterion::gini) return left_term / nl + right_term / nr;
      return left_term + right_term - nl * std::log(nl) - nr * std::log(nr);
    }

    void run(std::vector<TreeNode>& nodes, std::uint64_t root_seed) {
      xlogx.assign(rows.size() + 1, 0.0);
      for (std::size_t c = 1; c <= rows.size(); ++c)
        xlogx[c] = static_cast<double>(c) * std::log(static_cast<double>(c));
      features.resize(x.cols());
      nodes.push_back({});
      std::vector<Task> stack{{0, 0, rows.size(), 0, root_seed}};
      while (!stack.empty()) {
        const Task t = stack.back();
        stack.pop_back();
        node_counts.assign(n_classes, 0);
        for (std::size_t i = t.begin; i < t.end; ++i) ++node_counts[y[rows[i]]];
        nodes[t.node].klass = majority(node_counts);
        const std::size_t n = t.end - t.begin;
        const bool pure = std::count_if(node_counts.begin(), node_counts.end(),
                                        [](std::size_t c) { return c > 0; }) <= 1;
        if (pure || n < 2 || (options.max_depth && t.depth >= *options.max_depth)) continue;

        auto split = best_split(t.begin, t.end, t.seed);
        if (!split) continue;
        auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                  rows.begin() + static_cast<std::ptrdiff_t>(t.end),
                                  [&](std::size_t r) { return x(r, split->first) <= split->second; });
        const std::size_t m = static_cast<std::size_t>(mid - rows.begin());
        const auto left = static_cast<std::uint32_t>(nodes.size());
        nodes.push_back({});
        nodes.push_back({});
        nodes[t.node].feature = static_cast<std::int32_t>(split->first);
        nodes[t.node].threshold = split->second;
        nodes[t.node].left = left;
        nodes[t.node].right = left + 1;
        stack.push_back({left + 1, m, t.end, t.depth + 1, derive_seed(t.seed, 1u)});
        stack.push_back({left, t.begin, m, t.depth + 1, derive_seed(t.seed, 0u)});
      }
    }

    std::optional<std::pair<std::size_t, double>> best_split(std::size_t begin, std::size_t end,
                                                             std::uint64_t seed) {
      const std::size_t d = x.cols();
      const std::size_t want =
          options.max_features == 0 || options.max_features >= d ? d : options.max_features;
      std::iota(features.begin(), features.end(), 0);
      const bool sample = want < d;
      Rng rng(sample ? seed : 0);

      const std::vector<std::size_t> total = node_counts;
      double total_term = 0.0;
      for (std::size_t c : total)
        total_term += options.criterion == Criterion::gini ? static_cast<double>(c * c) : xlogx[c];

      std::optional<std::pair<std::size_t, double>> best;
      double best_score = -std::numeric_limits<double>::infinity();
      std::size_t best_feature = d;
      std::size_t evaluated = 0;
      for (std::size_t drawn = 0; drawn < d && evaluated < want; ++drawn) {
        if (sample) {
          const auto j = drawn + static_cast<std::size_t>(uniform_below(rng, d - drawn));
          std::swap(features[drawn], features[j]);
        }
        const std::size_t f = features[drawn];
        pairs.clear();
        for (std::size_t i = begin; i < end; ++i)
          pairs.emplace_back(x(rows[i], f), static_cast<std::uint32_t>(y[rows[i]]));
        std::sort(pairs.begin(), pairs.end());
        if (pairs.front().first == pairs.back().first) continue;  // constant here
        ++evaluated;

        left_counts.assign(n_classes, 0);
        double left_term = 0.0, right_term = total_term;
        const double n = static_cast<double>(pairs.size());
        for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
          const std::size_t c = pairs[i].second;
          const std::size_t l = left_counts[c]++;
          const std::size_t r = total[c] - l;  // right count before the move
          if (options.criterion == Criterion::gini) {
            left_term += static_cast<double>(2 * l + 1);
            right_term -= static_cast<double>(2 * r - 1);
          } else {
            left_term += xlogx[l + 1] - xlogx[l];
            right_term += xlogx[r - 1] - xlogx[r];
          }
          if (pairs[i].first == pairs[i + 1].first) continue;
          const double nl = static_cast<double>(i + 1);
          const double score = gain_proxy(nl, n - nl, left_term, right_term);
          if (score > best_score || (score == best_score && f < best_feature)) {
            best_score = score;
            best_feature = f;
            double thr = pairs[i].first + (pairs[i + 1].first - pairs[i].first) / 2.0;
            // The midpoint can round up to the right value when the two are adjacent doubles.
            if (!(thr < pairs[i + 1].first)) thr = pairs[i].first;
            best = std::make_pair(f, thr);
          }
        }
      }
      return best;
    }
  };

  std::vector<TreeNode> nodes_;
};

}  // namespace evprof::learn
