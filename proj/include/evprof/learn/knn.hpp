#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "../error.hpp"
#include "../matrix.hpp"

namespace evprof::learn {

enum class Metric { euclidean, manhattan, cosine };
enum class Weights { uniform, distance };

inline Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "manhattan") return Metric::manhattan;
  if (s == "cosine") return Metric::cosine;
  throw Error(ErrorKind::config, "unknown metric '" + std::string(s) + "'");
}
inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::euclidean: return "euclidean";
    case Metric::manhattan: return "manhattan";
    case Metric::cosine: return "cosine";
  }
  return "?";
}
inline Weights parse_weights(std::string_view s) {
  if (s == "uniform") return Weights::uniform;
  if (s == "distance") return Weights::distance;
  throw Error(ErrorKind::config, "unknown weights '" + std::string(s) + "'");
}
inline const char* to_string(Weights w) { return w == Weights::uniform ? "uniform" : "distance"; }

// Cosine distance is 1 - cos(a, b); a zero vector is at distance 1 from anything.
inline double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  switch (metric) {
    case Metric::euclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(s);
    }
    case Metric::manhattan: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
      return s;
    }
    case Metric::cosine: {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      if (na == 0.0 || nb == 0.0) return 1.0;
      return 1.0 - dot / std::sqrt(na * nb);
    }
  }
  return 0.0;
}

struct Neighbor {
  double dist;
  std::size_t index;
};

// The `count` nearest training rows ordered by (distance, row index).
inline std::vector<Neighbor> nearest(const Matrix& train, std::span<const double> query, Metric metric,
                                     std::size_t count) {
  std::vector<Neighbor> all(train.rows());
  for (std::size_t i = 0; i < train.rows(); ++i) all[i] = {distance(train.row(i), query, metric), i};
  count = std::min(count, all.size());
  auto before = [](const Neighbor& a, const Neighbor& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count), all.end(), before);
  all.resize(count);
  return all;
}

// Vote among the first k of `sorted_neighbors`. Distance weighting uses 1/d;
// when any neighbour sits at distance 0 only the exact matches vote. Ties go
// to the lowest class index.
inline std::size_t knn_vote(std::span<const Neighbor> sorted_neighbors, std::size_t k, Weights weights,
                            std::span<const std::size_t> labels, std::size_t n_classes) {
  k = std::min(k, sorted_neighbors.size());
  std::vector<double> votes(n_classes, 0.0);
  const bool exact = weights == Weights::distance && k > 0 && sorted_neighbors[0].dist == 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& nb = sorted_neighbors[i];
    double w = 1.0;
    if (weights == Weights::distance) {
      if (exact) {
        if (nb.dist != 0.0) continue;
      } else {
        w = 1.0 / nb.dist;
      }
    }
    votes[labels[nb.index]] += w;
  }
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

struct KnnParams {
  std::size_t n_neighbors = 5;
  Metric metric = Metric::euclidean;
  Weights weights = Weights::uniform;

  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

struct KnnModel {
  KnnParams params;
  Matrix rows;
  std::vector<std::size_t> labels;  // class index per stored row
  std::size_t n_classes = 0;

  std::size_t predict_one(std::span<const double> x) const {
    const auto nb = nearest(rows, x, params.metric, params.n_neighbors);
    return knn_vote(nb, params.n_neighbors, params.weights, labels, n_classes);
  }
};

}  // namespace evprof::learn
