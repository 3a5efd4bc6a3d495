#pragma once

// Classifier specs, the Table-style hyperparameter grids, training,
// prediction and JSON persistence of fitted models.

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "../error.hpp"
#include "../features.hpp"
#include "../selection.hpp"
#include "forest.hpp"
#include "knn.hpp"
#include "tree.hpp"

namespace evprof::learn {

enum class Family { knn, decision_tree, random_forest };

inline Family parse_family(std::string_view s) {
  if (s == "knn") return Family::knn;
  if (s == "dt" || s == "decision-tree") return Family::decision_tree;
  if (s == "rf" || s == "random-forest") return Family::random_forest;
  throw Error(ErrorKind::config, "unknown classifier family '" + std::string(s) + "'");
}

inline const char* to_string(Family f) {
  switch (f) {
    case Family::knn: return "knn";
    case Family::decision_tree: return "decision-tree";
    case Family::random_forest: return "random-forest";
  }
  return "?";
}

inline const char* short_name(Family f) {
  switch (f) {
    case Family::knn: return "knn";
    case Family::decision_tree: return "dt";
    case Family::random_forest: return "rf";
  }
  return "?";
}

struct TreeParams {
  Criterion criterion = Criterion::gini;
  std::optional<std::size_t> max_depth;

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct ClassifierSpec {
  Family family = Family::random_forest;
  KnnParams knn;
  TreeParams tree;
  ForestParams forest;

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

namespace detail {
inline std::string depth_string(const std::optional<std::size_t>& d) {
  return d ? std::to_string(*d) : "none";
}
inline std::optional<std::size_t> parse_depth(std::string_view s) {
  if (s == "none" || s == "None") return std::nullopt;
  try {
    return static_cast<std::size_t>(std::stoul(std::string(s)));
  } catch (const std::exception&) {
    throw Error(ErrorKind::config, "bad max_depth '" + std::string(s) + "'");
  }
}
}  // namespace detail

// Hyperparameters only, `name=value` joined by ';' so the string is a safe CSV field.
inline std::string params_string(const ClassifierSpec& s) {
  switch (s.family) {
    case Family::knn:
      return "n_neighbors=" + std::to_string(s.knn.n_neighbors) + ";metric=" + to_string(s.knn.metric) +
             ";weights=" + to_string(s.knn.weights);
    case Family::decision_tree:
      return std::string("criterion=") + to_string(s.tree.criterion) +
             ";max_depth=" + detail::depth_string(s.tree.max_depth);
    case Family::random_forest: {
      std::string out = "n_estimators=" + std::to_string(s.forest.n_estimators) +
                        ";max_depth=" + detail::depth_string(s.forest.max_depth);
      if (s.forest.criterion != Criterion::gini) out += std::string(";criterion=") + to_string(s.forest.criterion);
      if (s.forest.max_features) out += ";max_features=" + std::to_string(s.forest.max_features);
      return out;
    }
  }
  return {};
}

inline ClassifierSpec parse_spec(Family family, std::string_view params) {
  ClassifierSpec s;
  s.family = family;
  std::stringstream ss{std::string(params)};
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::config, "bad hyperparameter '" + item + "'");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    auto count = [&] {
      try {
        return static_cast<std::size_t>(std::stoul(value));
      } catch (const std::exception&) {
        throw Error(ErrorKind::config, "bad value for " + key + ": '" + value + "'");
      }
    };
    bool known = true;
    switch (family) {
      case Family::knn:
        if (key == "n_neighbors") s.knn.n_neighbors = count();
        else if (key == "metric") s.knn.metric = parse_metric(value);
        else if (key == "weights") s.knn.weights = parse_weights(value);
        else known = false;
        break;
      case Family::decision_tree:
        if (key == "criterion") s.tree.criterion = parse_criterion(value);
        else if (key == "max_depth") s.tree.max_depth = detail::parse_depth(value);
        else known = false;
        break;
      case Family::random_forest:
        if (key == "n_estimators") s.forest.n_estimators = count();
        else if (key == "max_depth") s.forest.max_depth = detail::parse_depth(value);
        else if (key == "criterion") s.forest.criterion = parse_criterion(value);
        else if (key == "max_features") s.forest.max_features = count();
        else known = false;
        break;
    }
    if (!known)
      throw Error(ErrorKind::config, "unknown hyperparameter '" + key + "' for " + to_string(family));
  }
  return s;
}

// Full grids in nested order (first listed parameter outermost).
inline std::vector<ClassifierSpec> default_grid(Family family) {
  std::vector<ClassifierSpec> grid;
  ClassifierSpec s;
  s.family = family;
  switch (family) {
    case Family::knn:
      for (std::size_t k : {3, 5, 7, 9, 11, 13, 15})
        for (Metric m : {Metric::euclidean, Metric::manhattan, Metric::cosine})
          for (Weights w : {Weights::uniform, Weights::distance}) {
            s.knn = {k, m, w};
            grid.push_back(s);
          }
      break;
    case Family::decision_tree:
      for (Criterion c : {Criterion::gini, Criterion::entropy})
        for (std::optional<std::size_t> d : {std::optional<std::size_t>{}, std::optional<std::size_t>{6},
                                             std::optional<std::size_t>{10}, std::optional<std::size_t>{18}}) {
          s.tree = {c, d};
          grid.push_back(s);
        }
      break;
    case Family::random_forest:
      for (std::size_t n : {5, 10, 15, 20, 30, 50})
        for (std::optional<std::size_t> d :
             {std::optional<std::size_t>{}, std::optional<std::size_t>{3}, std::optional<std::size_t>{5},
              std::optional<std::size_t>{10}, std::optional<std::size_t>{15}, std::optional<std::size_t>{25}}) {
          s.forest = {};
          s.forest.n_estimators = n;
          s.forest.max_depth = d;
          grid.push_back(s);
        }
      break;
  }
  return grid;
}

struct TrainedModel {
  ClassifierSpec spec;
  std::vector<std::string> classes;  // sorted; fitted state refers to these by index
  std::variant<KnnModel, DecisionTree, ForestModel> state;
  std::optional<SelectionModel> selection;
  std::uint64_t seed = 0;
  std::size_t n_features = 0;  // columns the classifier itself sees
};

inline TrainedModel train(const ClassifierSpec& spec, const Matrix& x, const std::vector<std::string>& labels,
                          std::uint64_t seed) {
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorKind::training, "empty training matrix");
  if (labels.size() != x.rows()) throw Error(ErrorKind::training, "label count does not match rows");
  const auto ci = evprof::detail::index_classes(labels);
  if (ci.names.size() < 2)
    throw Error(ErrorKind::training, "training needs at least 2 classes, got " + std::to_string(ci.names.size()));

  TrainedModel m;
  m.spec = spec;
  m.classes = ci.names;
  m.seed = seed;
  m.n_features = x.cols();
  const std::size_t k = ci.names.size();
  switch (spec.family) {
    case Family::knn: {
      if (spec.knn.n_neighbors == 0) throw Error(ErrorKind::training, "n_neighbors must be >= 1");
      m.state = KnnModel{spec.knn, x, ci.of_row, k};
      break;
    }
    case Family::decision_tree: {
      DecisionTree t;
      std::vector<std::size_t> rows(x.rows());
      std::iota(rows.begin(), rows.end(), 0);
      t.fit(x, ci.of_row, k, std::move(rows), TreeOptions{spec.tree.criterion, spec.tree.max_depth, 0});
      m.state = std::move(t);
      break;
    }
    case Family::random_forest: {
      ForestModel f;
      f.params = spec.forest;
      f.fit(x, ci.of_row, k, seed);
      m.state = std::move(f);
      break;
    }
  }
  return m;
}

inline TrainedModel train(const ClassifierSpec& spec, const FeatureMatrix& m, std::uint64_t seed) {
  return train(spec, m.values, m.labels, seed);
}

// Rows must have the classifier's own columns (already selected and scaled).
inline std::vector<std::string> predict_selected(const TrainedModel& model, const Matrix& rows) {
  if (rows.cols() != model.n_features)
    throw Error(ErrorKind::prediction, "expected " + std::to_string(model.n_features) + " columns, got " +
                                           std::to_string(rows.cols()));
  std::vector<std::string> out;
  out.reserve(rows.rows());
  std::visit(
      [&](const auto& s) {
        for (std::size_t r = 0; r < rows.rows(); ++r) out.push_back(model.classes[s.predict_one(rows.row(r))]);
      },
      model.state);
  return out;
}

// Applies the model's selection (when present) to raw catalog rows first.
inline std::vector<std::string> predict(const TrainedModel& model, const Matrix& rows) {
  if (model.selection) return predict_selected(model, transform_rows(rows, *model.selection));
  return predict_selected(model, rows);
}

// ---- persistence ----------------------------------------------------------

using nlohmann::json;

namespace detail {

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, std::size_t cols) {
  Matrix m(0, cols);
  for (const auto& row : j) {
    auto v = row.get<std::vector<double>>();
    if (v.size() != cols) throw Error(ErrorKind::parse, "model row width mismatch");
    m.append_row(v);
  }
  return m;
}

inline json tree_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes()) {
    if (n.feature < 0)
      nodes.push_back({{"leaf", n.klass}});
    else
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                       {"class", n.klass}});
  }
  return nodes;
}

inline DecisionTree tree_from_json(const json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j) {
    TreeNode t;
    if (n.contains("leaf")) {
      t.klass = n.at("leaf").get<std::uint32_t>();
    } else {
      t.feature = n.at("feature").get<std::int32_t>();
      t.threshold = n.at("threshold").get<double>();
      t.left = n.at("left").get<std::uint32_t>();
      t.right = n.at("right").get<std::uint32_t>();
      t.klass = n.at("class").get<std::uint32_t>();
    }
    nodes.push_back(t);
  }
  return DecisionTree(std::move(nodes));
}

}  // namespace detail

inline json to_json(const TrainedModel& m) {
  json j;
  j["format"] = "evprof-model";
  j["version"] = 1;
  j["family"] = to_string(m.spec.family);
  j["hyperparameters"] = params_string(m.spec);
  j["classes"] = m.classes;
  j["seed"] = m.seed;
  j["n_features"] = m.n_features;
  if (m.selection) {
    const auto& s = *m.selection;
    j["selection"] = {{"scorer", to_string(s.scorer)},
                      {"selected", s.selected},
                      {"selected_names", s.selected_names},
                      {"scaler_min", s.scaler.min},
                      {"scaler_max", s.scaler.max}};
  }
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          j["neighbors"] = {{"rows", detail::matrix_json(s.rows)}, {"labels", s.labels}};
        } else if constexpr (std::is_same_v<T, DecisionTree>) {
          j["tree"] = detail::tree_json(s);
        } else {
          json trees = json::array();
          for (const auto& t : s.trees) trees.push_back(detail::tree_json(t));
          j["trees"] = std::move(trees);
        }
      },
      m.state);
  return j;
}

inline TrainedModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "evprof-model") throw Error(ErrorKind::parse, "not a model document");
    TrainedModel m;
    const Family fam = parse_family(j.at("family").get<std::string>());
    m.spec = parse_spec(fam, j.at("hyperparameters").get<std::string>());
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_features = j.at("n_features").get<std::size_t>();
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      SelectionModel sel;
      sel.scorer = parse_scorer(s.at("scorer").get<std::string>());
      sel.selected = s.at("selected").get<std::vector<std::size_t>>();
      sel.selected_names = s.at("selected_names").get<std::vector<std::string>>();
      sel.scaler.min = s.at("scaler_min").get<std::vector<double>>();
      sel.scaler.max = s.at("scaler_max").get<std::vector<double>>();
      m.selection = std::move(sel);
    }
    switch (fam) {
      case Family::knn: {
        KnnModel k;
        k.params = m.spec.knn;
        k.rows = detail::matrix_from_json(j.at("neighbors").at("rows"), m.n_features);
        k.labels = j.at("neighbors").at("labels").get<std::vector<std::size_t>>();
        k.n_classes = m.classes.size();
        m.state = std::move(k);
        break;
      }
      case Family::decision_tree:
        m.state = detail::tree_from_json(j.at("tree"));
        break;
      case Family::random_forest: {
        ForestModel f;
        f.params = m.spec.forest;
        f.n_classes = m.classes.size();
        for (const auto& t : j.at("trees")) f.trees.push_back(detail::tree_from_json(t));
        m.state = std::move(f);
        break;
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed model document: ") + e.what());
  }
}

}  // namespace evprof::learn
