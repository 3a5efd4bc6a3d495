#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "../error.hpp"

namespace evprof::learn {

enum class Mode { binary, multiclass };

inline const std::string kPositiveLabel = "1";
inline const std::string kNegativeLabel = "0";

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::vector<std::string> labels;                  // sorted union of true and predicted
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double positive_f1 = 0.0;  // binary mode only
};

inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline MetricsReport evaluate(std::span<const std::string> truth, std::span<const std::string> predicted,
                              Mode mode, const std::string& positive = kPositiveLabel) {
  if (truth.empty()) throw Error(ErrorKind::parameter, "evaluation needs at least one test row");
  if (truth.size() != predicted.size())
    throw Error(ErrorKind::parameter, "truth and prediction lengths differ");
  MetricsReport r;
  std::map<std::string, std::size_t> index;
  for (const auto& l : truth) index.emplace(l, 0);
  for (const auto& l : predicted) index.emplace(l, 0);
  for (auto& [label, i] : index) {
    i = r.labels.size();
    r.labels.push_back(label);
  }
  const std::size_t k = r.labels.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++r.confusion[index[truth[i]]][index[predicted[i]]];

  std::size_t correct = 0;
  r.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    correct += r.confusion[c][c];
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += r.confusion[c][j];
      col += r.confusion[j][c];
    }
    auto& m = r.per_class[c];
    const double tp = static_cast<double>(r.confusion[c][c]);
    m.support = row;
    m.precision = safe_ratio(tp, static_cast<double>(col));
    m.recall = safe_ratio(tp, static_cast<double>(row));
    m.f1 = safe_ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    r.macro_f1 += m.f1;
  }
  r.macro_f1 /= static_cast<double>(k);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  if (mode == Mode::binary) {
    auto it = index.find(positive);
    r.positive_f1 = it == index.end() ? 0.0 : r.per_class[it->second].f1;
  }
  return r;
}

}  // namespace evprof::learn
