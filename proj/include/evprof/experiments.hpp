#pragma once

// Experiment matrix: one-vs-all binary suites under Q / Q' balancing,
// multi-class size sweeps, fixed EV x samples grids and distribution-shaped
// sub-samples. Cells are independent jobs; everything reported is reduced
// in key order so the output never depends on scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "features.hpp"
#include "ingest.hpp"
#include "learn/metrics.hpp"
#include "learn/model.hpp"
#include "learn/validation.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "selection.hpp"

namespace evprof {

// ---- balancing --------------------------------------------------------------

enum class BalanceMode { q, q_prime };

inline BalanceMode parse_balance_mode(std::string_view s) {
  if (s == "q") return BalanceMode::q;
  if (s == "q-prime" || s == "qprime") return BalanceMode::q_prime;
  throw Error(ErrorKind::config, "unknown balance mode '" + std::string(s) + "'");
}
inline const char* to_string(BalanceMode m) { return m == BalanceMode::q ? "q" : "q-prime"; }

struct BalanceConfig {
  BalanceMode mode = BalanceMode::q_prime;
  double value = 1.0;
  std::size_t min_target_samples = 50;
};

// Negative rows wanted for n_target positives.
inline std::size_t negative_count(const BalanceConfig& b, std::size_t n_target) {
  if (!(b.value >= 1.0 && b.value <= 5.0))
    throw Error(ErrorKind::config, "balance value must lie in [1, 5], got " + detail::format_double(b.value));
  const double n = static_cast<double>(n_target);
  const double want = b.mode == BalanceMode::q_prime ? b.value * n : n / b.value;
  return static_cast<std::size_t>(std::floor(want + 1e-9));
}

struct BinaryDataset {
  FeatureMatrix matrix;  // labels are kPositiveLabel / kNegativeLabel
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

namespace detail {
inline std::map<std::string, std::vector<std::size_t>> rows_by_label(const FeatureMatrix& m) {
  std::map<std::string, std::vector<std::size_t>> g;
  for (std::size_t i = 0; i < m.rows(); ++i) g[m.labels[i]].push_back(i);
  return g;
}
}  // namespace detail

// All target rows are positives. Negatives are dealt round-robin from the
// other EVs, visited in a seed-shuffled order, each EV's rows also shuffled,
// so no single EV dominates the negative class.
inline BinaryDataset build_binary_dataset(const FeatureMatrix& m, const std::string& target,
                                          const BalanceConfig& balance, std::uint64_t seed) {
  auto groups = detail::rows_by_label(m);
  auto it = groups.find(target);
  const std::size_t n_t = it == groups.end() ? 0 : it->second.size();
  if (n_t < balance.min_target_samples)
    throw Error(ErrorKind::balance, "target '" + target + "' has " + std::to_string(n_t) + " rows, needs " +
                                        std::to_string(balance.min_target_samples));
  const std::size_t n_neg = negative_count(balance, n_t);

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> pools;
  std::size_t available = 0;
  for (auto& [label, rows] : groups) {
    if (label == target) continue;
    available += rows.size();
    pools.push_back(rows);
  }
  if (available < n_neg)
    throw Error(ErrorKind::balance, "need " + std::to_string(n_neg) + " negative rows for target '" + target +
                                        "', only " + std::to_string(available) + " available (short " +
                                        std::to_string(n_neg - available) + ")");
  shuffle(std::span<std::vector<std::size_t>>(pools), rng);
  for (auto& p : pools) shuffle(std::span<std::size_t>(p), rng);

  std::vector<std::size_t> picked = it->second;
  std::vector<std::size_t> cursor(pools.size(), 0);
  std::size_t drawn = 0;
  while (drawn < n_neg)
    for (std::size_t p = 0; p < pools.size() && drawn < n_neg; ++p)
      if (cursor[p] < pools[p].size()) {
        picked.push_back(pools[p][cursor[p]++]);
        ++drawn;
      }
  std::sort(picked.begin(), picked.end());

  BinaryDataset out;
  out.matrix = m.select_rows(picked);
  for (auto& l : out.matrix.labels) l = l == target ? learn::kPositiveLabel : learn::kNegativeLabel;
  out.n_positive = n_t;
  out.n_negative = n_neg;
  return out;
}

// ---- multi-class sub-sampling ----------------------------------------------

// n_evs unset means every EV; samples_per_ev unset keeps all rows.
struct SizeSpec {
  std::string name;
  std::optional<std::size_t> n_evs;
  std::optional<std::size_t> samples_per_ev;
};

inline SizeSpec parse_size(std::string_view s) {
  if (s == "small") return {"small", 25, std::nullopt};
  if (s == "medium") return {"medium", 75, std::nullopt};
  if (s == "large") return {"large", 140, std::nullopt};
  if (s == "complete") return {"complete", std::nullopt, std::nullopt};
  throw Error(ErrorKind::config, "unknown dataset size '" + std::string(s) + "'");
}

inline std::string size_name(const SizeSpec& s) {
  if (!s.name.empty()) return s.name;
  std::string out = s.n_evs ? std::to_string(*s.n_evs) + "evs" : "all-evs";
  if (s.samples_per_ev) out += "x" + std::to_string(*s.samples_per_ev);
  return out;
}

namespace detail {

// One label drawn from each of n equal-width strata of the ranking
// (session count descending, label ascending), so selections span the
// whole count distribution.
inline std::vector<std::string> stratified_labels(const std::vector<std::pair<std::string, std::size_t>>& evs,
                                                  std::size_t n, Rng& rng) {
  auto ranked = evs;
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.second > b.second || (a.second == b.second && a.first < b.first); });
  std::vector<std::string> out;
  const std::size_t total = ranked.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i * total / n, hi = (i + 1) * total / n;
    out.push_back(ranked[lo + static_cast<std::size_t>(uniform_below(rng, hi - lo))].first);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::size_t> take_rows(std::vector<std::size_t> rows, std::size_t count, Rng& rng) {
  if (count < rows.size()) {
    shuffle(std::span<std::size_t>(rows), rng);
    rows.resize(count);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace detail

inline FeatureMatrix subsample_multiclass(const FeatureMatrix& m, const SizeSpec& size, std::uint64_t seed) {
  const auto groups = detail::rows_by_label(m);
  std::vector<std::pair<std::string, std::size_t>> eligible;
  for (const auto& [label, rows] : groups)
    if (!size.samples_per_ev || rows.size() >= *size.samples_per_ev) eligible.emplace_back(label, rows.size());
  const std::size_t want = size.n_evs.value_or(groups.size());
  if (want == 0 || (size.samples_per_ev && *size.samples_per_ev == 0))
    throw Error(ErrorKind::subsample, "dataset size must be positive");
  if (eligible.size() < want) {
    std::string need = "need " + std::to_string(want) + " EVs";
    if (size.samples_per_ev) need += " with >= " + std::to_string(*size.samples_per_ev) + " rows";
    throw Error(ErrorKind::subsample, need + ", only " + std::to_string(eligible.size()) + " available (deficit " +
                                          std::to_string(want - eligible.size()) + ")");
  }
  Rng rng(seed);
  const auto labels = want == eligible.size() ? [&] {
    std::vector<std::string> all;
    for (const auto& e : eligible) all.push_back(e.first);
    return all;
  }()
                                              : detail::stratified_labels(eligible, want, rng);
  std::vector<std::size_t> picked;
  for (const auto& l : labels) {
    const auto& rows = groups.at(l);
    auto keep = detail::take_rows(rows, size.samples_per_ev.value_or(rows.size()), rng);
    picked.insert(picked.end(), keep.begin(), keep.end());
  }
  std::sort(picked.begin(), picked.end());
  return m.select_rows(picked);
}

// ---- distribution-shaped sub-sampling ---------------------------------------

enum class Shape { regular, normal, uniform };

inline Shape parse_shape(std::string_view s) {
  if (s == "regular") return Shape::regular;
  if (s == "normal") return Shape::normal;
  if (s == "uniform") return Shape::uniform;
  throw Error(ErrorKind::config, "unknown distribution shape '" + std::string(s) + "'");
}
inline const char* to_string(Shape s) {
  switch (s) {
    case Shape::regular: return "regular";
    case Shape::normal: return "normal";
    case Shape::uniform: return "uniform";
  }
  return "?";
}

struct DistributionParams {
  Shape shape = Shape::normal;
  std::size_t n_evs = 119;      // normal
  std::optional<double> mean;   // normal; default: median rows per EV
  std::optional<double> sigma;  // normal; default: mean / 4
  std::size_t bins = 20;        // uniform
  std::size_t per_bin = 6;      // uniform
};

// Standard normal quantile by bisection on erfc.
inline double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Target row counts for n EVs at the normal's evenly spaced quantiles,
// rounded, at least 2 (so every class survives a split), descending.
inline std::vector<std::size_t> normal_targets(std::size_t n, double mean, double sigma) {
  std::vector<std::size_t> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = sigma > 0.0 ? normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n)) : 0.0;
    t[i] = static_cast<std::size_t>(std::max(2.0, std::round(mean + sigma * z)));
  }
  std::sort(t.rbegin(), t.rend());
  return t;
}

struct UniformBin {
  double lo = 0.0, hi = 0.0;  // [lo, hi) in rows per EV
  std::size_t midpoint = 0;
};

inline std::vector<UniformBin> uniform_bins(std::size_t min_count, std::size_t max_count, std::size_t bins) {
  if (bins == 0) throw Error(ErrorKind::distribution, "bins must be >= 1");
  std::vector<UniformBin> out(bins);
  const double width = static_cast<double>(max_count - min_count + 1) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = static_cast<double>(min_count) + width * static_cast<double>(b);
    out[b].hi = out[b].lo + width;
    out[b].midpoint = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor((out[b].lo + out[b].hi) / 2.0)));
  }
  return out;
}

inline FeatureMatrix subsample_distribution(const FeatureMatrix& m, const DistributionParams& p, std::uint64_t seed) {
  const auto groups = detail::rows_by_label(m);
  if (p.shape == Shape::regular) return m;
  if (groups.empty()) throw Error(ErrorKind::distribution, "empty feature matrix");

  // (label, rows) candidates, best-fit order: fewest rows first, then label.
  std::vector<std::pair<std::size_t, std::string>> pool;
  for (const auto& [label, rows] : groups) pool.emplace_back(rows.size(), label);
  std::sort(pool.begin(), pool.end());
  std::vector<bool> used(pool.size(), false);
  auto best_fit = [&](std::size_t need) -> std::optional<std::size_t> {
    auto at = std::lower_bound(pool.begin(), pool.end(), std::make_pair(need, std::string()));
    for (auto i = static_cast<std::size_t>(at - pool.begin()); i < pool.size(); ++i)
      if (!used[i]) return i;
    return std::nullopt;
  };

  std::vector<std::pair<std::string, std::size_t>> plan;  // label, rows to keep
  std::vector<std::string> failures;
  if (p.shape == Shape::normal) {
    double mean = 0.0;
    if (p.mean) {
      mean = *p.mean;
    } else {
      std::vector<double> counts;
      for (const auto& e : pool) counts.push_back(static_cast<double>(e.first));
      mean = counts.size() % 2 ? counts[counts.size() / 2]
                               : 0.5 * (counts[counts.size() / 2 - 1] + counts[counts.size() / 2]);
    }
    const double sigma = p.sigma.value_or(mean / 4.0);
    if (p.n_evs == 0 || !(mean > 0.0) || sigma < 0.0)
      throw Error(ErrorKind::distribution, "normal shape needs n_evs >= 1, mean > 0, sigma >= 0");
    for (std::size_t target : normal_targets(p.n_evs, mean, sigma)) {
      if (auto i = best_fit(target)) {
        used[*i] = true;
        plan.emplace_back(pool[*i].second, target);
      } else {
        failures.push_back("target " + std::to_string(target) + " rows: no unused EV has enough");
      }
    }
  } else {
    if (p.per_bin == 0) throw Error(ErrorKind::distribution, "per_bin must be >= 1");
    std::size_t lo = pool.back().first, hi = 0;
    for (const auto& e : pool)
      if (e.first >= 2) {
        lo = std::min(lo, e.first);
        hi = std::max(hi, e.first);
      }
    if (hi < 2) throw Error(ErrorKind::distribution, "no EV has at least 2 rows");
    const auto bins = uniform_bins(lo, hi, p.bins);
    // High bins first: their EVs are the scarce ones.
    for (std::size_t b = bins.size(); b-- > 0;) {
      std::size_t filled = 0;
      for (; filled < p.per_bin; ++filled) {
        auto i = best_fit(bins[b].midpoint);
        if (!i) break;
        used[*i] = true;
        plan.emplace_back(pool[*i].second, bins[b].midpoint);
      }
      if (filled < p.per_bin)
        failures.push_back("bin " + std::to_string(b) + " [" + detail::format_double(bins[b].lo) + ", " +
                           detail::format_double(bins[b].hi) + "): " + std::to_string(filled) + "/" +
                           std::to_string(p.per_bin) + " EVs with >= " + std::to_string(bins[b].midpoint) + " rows");
    }
  }
  if (!failures.empty()) {
    std::string msg = "cannot fill " + std::string(to_string(p.shape)) + " shape:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw Error(ErrorKind::distribution, msg);
  }

  std::sort(plan.begin(), plan.end());
  Rng rng(seed);
  std::vector<std::size_t> picked;
  for (const auto& [label, count] : plan) {
    auto keep = detail::take_rows(groups.at(label), count, rng);
    picked.insert(picked.end(), keep.begin(), keep.end());
  }
  std::sort(picked.begin(), picked.end());
  return m.select_rows(picked);
}

// ---- aggregation ------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population convention
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) throw Error(ErrorKind::aggregation, "no runs to aggregate");
  MeanStd r;
  r.n = v.size();
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(v.size()));
  return r;
}

// Runs must share one configuration key.
inline MeanStd aggregate_runs(const std::vector<std::pair<std::string, double>>& runs) {
  if (runs.empty()) throw Error(ErrorKind::aggregation, "no runs to aggregate");
  std::vector<double> v;
  for (const auto& [key, value] : runs) {
    if (key != runs.front().first)
      throw Error(ErrorKind::aggregation, "mixed configuration keys '" + runs.front().first + "' and '" + key + "'");
    v.push_back(value);
  }
  return mean_std(v);
}

// ---- suites ----------------------------------------------------------------

enum class Suite { binary, multiclass, fixed_grid, distribution };

inline Suite parse_suite(std::string_view s) {
  if (s == "binary") return Suite::binary;
  if (s == "multiclass") return Suite::multiclass;
  if (s == "grid" || s == "fixed-grid") return Suite::fixed_grid;
  if (s == "distribution") return Suite::distribution;
  throw Error(ErrorKind::config, "unknown suite '" + std::string(s) + "'");
}
inline const char* to_string(Suite s) {
  switch (s) {
    case Suite::binary: return "binary";
    case Suite::multiclass: return "multiclass";
    case Suite::fixed_grid: return "grid";
    case Suite::distribution: return "distribution";
  }
  return "?";
}

struct ExperimentConfig {
  Suite suite = Suite::binary;
  std::vector<learn::Family> classifiers{learn::Family::random_forest, learn::Family::decision_tree,
                                         learn::Family::knn};
  std::map<learn::Family, std::vector<learn::ClassifierSpec>> grids;  // overrides of the default grids
  SelectionConfig selection{100, Scorer::chi2};
  // binary
  BalanceMode balance_mode = BalanceMode::q_prime;
  std::vector<double> balance_values{1, 2, 3, 4, 5};
  std::size_t min_target_samples = 50;
  // multiclass
  std::vector<SizeSpec> sizes;
  // fixed grid
  std::vector<std::size_t> grid_evs{50, 100, 150, 200};
  std::vector<std::size_t> grid_samples{10, 25, 50, 75};
  // distribution
  std::vector<DistributionParams> distributions;

  std::size_t repetitions = 5;
  std::size_t folds = 5;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  const AuditHook* hook = nullptr;
  bool keep_cv_tables = false;

  const std::vector<learn::ClassifierSpec>& grid(learn::Family f) {
    auto it = grids.find(f);
    if (it == grids.end()) it = grids.emplace(f, learn::default_grid(f)).first;
    return it->second;
  }
};

struct CellRecord {
  std::string suite;
  std::string dataset;
  std::string target_ev;
  std::string balance_mode;
  std::string balance_value;
  std::size_t n_evs = 0;
  std::size_t samples_per_ev = 0;  // 0 = variable
  std::size_t repetition = 0;
  std::string classifier;
  std::string best_params;
  std::string status = "ok";
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double positive_f1 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::string cv_table;  // `family,params,fold,score` rows when kept

  bool ok() const { return status == "ok"; }
  std::string id() const {
    std::string s = suite + "_" + dataset;
    if (!target_ev.empty()) s += "_" + target_ev;
    if (!balance_value.empty()) s += "_" + balance_mode + balance_value;
    return s + "_rep" + std::to_string(repetition);
  }
};

struct SummaryRow {
  std::string suite, dataset, balance_mode, balance_value, classifier;
  std::size_t n_evs = 0, samples_per_ev = 0;
  MeanStd accuracy, macro_f1, positive_f1;
  std::size_t runs = 0, failed = 0;
};

struct ExperimentReport {
  std::vector<CellRecord> cells;
  std::vector<SummaryRow> summary;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string value_string(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

struct CellJob {
  CellRecord key;  // everything but classifier and metrics
  std::function<FeatureMatrix(std::uint64_t)> build;
  std::uint64_t seed = 0;
};

inline std::vector<CellRecord> run_cell(const CellJob& job, const ExperimentConfig& config, learn::Scoring scoring,
                                        std::size_t inner_workers,
                                        const std::map<learn::Family, std::vector<learn::ClassifierSpec>>& grids) {
  std::vector<CellRecord> out;
  const std::string cell = job.key.id();
  auto fail_all = [&](const std::string& why) {
    out.clear();
    for (auto f : config.classifiers) {
      CellRecord r = job.key;
      r.classifier = learn::short_name(f);
      r.status = "failed: " + why;
      out.push_back(std::move(r));
    }
  };
  FeatureMatrix train_sel, test_sel;
  std::size_t n_evs = 0;
  try {
    const FeatureMatrix data = job.build(derive_seed(job.seed, "data"));
    n_evs = rows_by_label(data).size();
    const auto split = learn::stratified_split(data.labels, config.test_fraction, derive_seed(job.seed, "split"));
    const auto train = data.select_rows(split.train);
    const auto test = data.select_rows(split.test);
    audit(config.hook, cell, "split-train", train.session_ids);
    audit(config.hook, cell, "split-test", test.session_ids);
    const auto selection = fit_selection(train, config.selection, config.hook, cell);
    train_sel = transform(train, selection);
    test_sel = transform(test, selection);
  } catch (const Error& e) {
    fail_all(std::string(to_string(e.kind())) + ": " + e.what());
    return out;
  }
  for (auto f : config.classifiers) {
    CellRecord r = job.key;
    r.classifier = learn::short_name(f);
    r.n_evs = job.key.suite == "binary" ? job.key.n_evs : n_evs;
    r.n_train = train_sel.rows();
    r.n_test = test_sel.rows();
    try {
      const auto& grid = grids.at(f);
      learn::GridOptions opt;
      opt.folds = config.folds;
      opt.scoring = scoring;
      opt.seed = derive_seed(job.seed, "grid", learn::short_name(f));
      opt.workers = inner_workers;
      opt.hook = config.hook;
      opt.cell = cell;
      const auto g = learn::grid_search(grid, train_sel, opt);
      const auto pred = learn::predict_selected(g.model, test_sel.values);
      const auto m = learn::evaluate(test_sel.labels, pred,
                                     scoring == learn::Scoring::f1_positive ? learn::Mode::binary
                                                                            : learn::Mode::multiclass);
      r.best_params = learn::params_string(g.best);
      r.accuracy = m.accuracy;
      r.macro_f1 = m.macro_f1;
      r.positive_f1 = m.positive_f1;
      if (config.keep_cv_tables) {
        std::ostringstream cv;
        learn::write_cv_table(cv, grid, g, false);
        r.cv_table = cv.str();
      }
    } catch (const Error& e) {
      r.status = std::string("failed: ") + to_string(e.kind()) + ": " + e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

using SummaryKey = std::tuple<std::string, std::string, std::string, std::string, std::size_t, std::string>;

}  // namespace detail

// Binary cells are averaged over target EVs within each repetition first,
// then over repetitions; other suites average repetitions directly. Failed
// cells are counted but excluded from means.
inline std::vector<SummaryRow> summarize(const std::vector<CellRecord>& cells) {
  struct Acc {
    std::map<std::size_t, std::vector<const CellRecord*>> by_rep;
    std::size_t failed = 0;
    std::size_t n_evs = 0;
  };
  std::map<detail::SummaryKey, Acc> groups;
  for (const auto& c : cells) {
    auto& a = groups[{c.suite, c.dataset, c.balance_mode, c.balance_value, c.samples_per_ev, c.classifier}];
    if (!c.ok()) {
      ++a.failed;
      continue;
    }
    a.by_rep[c.repetition].push_back(&c);
    a.n_evs = std::max(a.n_evs, c.n_evs);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, a] : groups) {
    SummaryRow r;
    std::tie(r.suite, r.dataset, r.balance_mode, r.balance_value, r.samples_per_ev, r.classifier) = key;
    r.n_evs = a.n_evs;
    r.failed = a.failed;
    r.runs = a.by_rep.size();
    if (!a.by_rep.empty()) {
      std::vector<double> acc, mf1, pf1;
      for (const auto& [rep, list] : a.by_rep) {
        double s_acc = 0, s_mf1 = 0, s_pf1 = 0;
        for (const auto* c : list) {
          s_acc += c->accuracy;
          s_mf1 += c->macro_f1;
          s_pf1 += c->positive_f1;
        }
        const double n = static_cast<double>(list.size());
        acc.push_back(s_acc / n);
        mf1.push_back(s_mf1 / n);
        pf1.push_back(s_pf1 / n);
      }
      r.accuracy = mean_std(acc);
      r.macro_f1 = mean_std(mf1);
      r.positive_f1 = mean_std(pf1);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Runs the suite named in config.suite over a featurised corpus.
inline ExperimentReport run_suite(const FeatureMatrix& features, ExperimentConfig config) {
  if (config.repetitions == 0) throw Error(ErrorKind::config, "repetitions must be >= 1");
  if (config.classifiers.empty()) throw Error(ErrorKind::config, "no classifier families selected");
  std::map<learn::Family, std::vector<learn::ClassifierSpec>> grids;
  for (auto f : config.classifiers) grids[f] = config.grid(f);

  ExperimentReport report;
  std::vector<detail::CellJob> jobs;
  learn::Scoring scoring = learn::Scoring::accuracy;
  const auto base = [&](const std::string& dataset) {
    CellRecord k;
    k.suite = to_string(config.suite);
    k.dataset = dataset;
    return k;
  };

  switch (config.suite) {
    case Suite::binary: {
      scoring = learn::Scoring::f1_positive;
      std::vector<std::string> targets;
      for (const auto& [label, rows] : detail::rows_by_label(features))
        if (rows.size() >= config.min_target_samples) targets.push_back(label);
      if (targets.size() < 2)
        throw Error(ErrorKind::balance, "binary suite needs >= 2 EVs with >= " +
                                            std::to_string(config.min_target_samples) + " rows, found " +
                                            std::to_string(targets.size()));
      for (double v : config.balance_values) {
        BalanceConfig bc{config.balance_mode, v, config.min_target_samples};
        negative_count(bc, 1);  // validates the value up front
        for (std::size_t rep = 0; rep < config.repetitions; ++rep)
          for (const auto& t : targets) {
            detail::CellJob job;
            job.key = base("one-vs-all");
            job.key.target_ev = t;
            job.key.balance_mode = to_string(config.balance_mode);
            job.key.balance_value = detail::value_string(v);
            job.key.n_evs = 2;
            job.key.repetition = rep;
            job.seed = derive_seed(config.seed, rep, t);
            job.build = [&features, t, bc](std::uint64_t s) { return build_binary_dataset(features, t, bc, s).matrix; };
            jobs.push_back(std::move(job));
          }
      }
      break;
    }
    case Suite::multiclass: {
      if (config.sizes.empty()) throw Error(ErrorKind::config, "multiclass suite needs at least one dataset size");
      for (const auto& size : config.sizes)
        for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
          detail::CellJob job;
          job.key = base(size_name(size));
          job.key.samples_per_ev = size.samples_per_ev.value_or(0);
          job.key.repetition = rep;
          job.seed = derive_seed(config.seed, rep, job.key.dataset);
          job.build = [&features, size](std::uint64_t s) { return subsample_multiclass(features, size, s); };
          jobs.push_back(std::move(job));
        }
      break;
    }
    case Suite::fixed_grid: {
      for (std::size_t evs : config.grid_evs)
        for (std::size_t spe : config.grid_samples)
          for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
            const SizeSpec size{"", evs, spe};
            detail::CellJob job;
            job.key = base(size_name(size));
            job.key.n_evs = evs;
            job.key.samples_per_ev = spe;
            job.key.repetition = rep;
            job.seed = derive_seed(config.seed, rep, job.key.dataset);
            job.build = [&features, size](std::uint64_t s) { return subsample_multiclass(features, size, s); };
            jobs.push_back(std::move(job));
          }
      break;
    }
    case Suite::distribution: {
      if (config.distributions.empty())
        throw Error(ErrorKind::config, "distribution suite needs at least one shape");
      for (const auto& d : config.distributions)
        for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
          detail::CellJob job;
          job.key = base(to_string(d.shape));
          job.key.repetition = rep;
          job.seed = derive_seed(config.seed, rep, job.key.dataset);
          job.build = [&features, d](std::uint64_t s) { return subsample_distribution(features, d, s); };
          jobs.push_back(std::move(job));
        }
      break;
    }
  }

  // Cells run in parallel; a lone cell gets the workers for its grid search instead.
  const std::size_t outer = jobs.size() >= config.workers ? config.workers : 1;
  const std::size_t inner = outer == 1 ? std::max<std::size_t>(config.workers, 1) : 1;
  std::vector<std::vector<CellRecord>> results(jobs.size());
  parallel_for(outer, jobs.size(), [&](std::size_t i) { results[i] = detail::run_cell(jobs[i], config, scoring, inner, grids); });
  for (auto& r : results)
    for (auto& c : r) report.cells.push_back(std::move(c));
  report.summary = summarize(report.cells);
  return report;
}

// ---- output ----------------------------------------------------------------

inline constexpr std::string_view kCellsHeader =
    "suite,dataset,target_ev,balance_mode,balance_value,n_evs,samples_per_ev,repetition,classifier,best_params,"
    "status,accuracy,macro_f1,positive_f1,n_train,n_test";

inline constexpr std::string_view kSummaryHeader =
    "suite,dataset,balance_mode,balance_value,n_evs,samples_per_ev,classifier,runs,failed,mean_accuracy,"
    "std_accuracy,mean_macro_f1,std_macro_f1,mean_positive_f1,std_positive_f1";

namespace detail {
inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace detail

inline void write_cells(std::ostream& out, const std::vector<CellRecord>& cells) {
  out << kCellsHeader << '\n';
  for (const auto& c : cells) {
    out << c.suite << ',' << detail::csv_escape(c.dataset) << ',' << detail::csv_escape(c.target_ev) << ','
        << c.balance_mode << ',' << c.balance_value << ',' << c.n_evs << ',' << c.samples_per_ev << ','
        << c.repetition << ',' << c.classifier << ',' << c.best_params << ',' << detail::csv_escape(c.status) << ',';
    if (c.ok())
      out << detail::fixed6(c.accuracy) << ',' << detail::fixed6(c.macro_f1) << ',' << detail::fixed6(c.positive_f1);
    else
      out << ",,";
    out << ',' << c.n_train << ',' << c.n_test << '\n';
  }
}

inline std::vector<CellRecord> read_cells(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, "cells file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCellsHeader) throw Error(ErrorKind::parse, "unexpected cells header");
  std::vector<CellRecord> cells;
  std::size_t lineno = 1;
  auto count = [&](const std::string& s) -> std::size_t {
    try {
      return static_cast<std::size_t>(std::stoull(s));
    } catch (const std::exception&) {
      throw Error(ErrorKind::parse, "line " + std::to_string(lineno) + ": bad count '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 16) throw Error(ErrorKind::parse, "line " + std::to_string(lineno) + ": expected 16 fields");
    CellRecord c;
    c.suite = f[0];
    c.dataset = f[1];
    c.target_ev = f[2];
    c.balance_mode = f[3];
    c.balance_value = f[4];
    c.n_evs = count(f[5]);
    c.samples_per_ev = count(f[6]);
    c.repetition = count(f[7]);
    c.classifier = f[8];
    c.best_params = f[9];
    c.status = f[10];
    if (c.ok()) {
      c.accuracy = detail::parse_double(f[11], lineno);
      c.macro_f1 = detail::parse_double(f[12], lineno);
      c.positive_f1 = detail::parse_double(f[13], lineno);
    }
    c.n_train = count(f[14]);
    c.n_test = count(f[15]);
    cells.push_back(std::move(c));
  }
  return cells;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.suite << ',' << detail::csv_escape(r.dataset) << ',' << r.balance_mode << ',' << r.balance_value << ','
        << r.n_evs << ',' << r.samples_per_ev << ',' << r.classifier << ',' << r.runs << ',' << r.failed;
    for (const auto* m : {&r.accuracy, &r.macro_f1, &r.positive_f1}) {
      if (r.runs)
        out << ',' << detail::fixed6(m->mean) << ',' << detail::fixed6(m->std);
      else
        out << ",,";
    }
    out << '\n';
  }
}

inline void write_summary_md(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "# Experiment summary\n";
  std::string suite;
  for (const auto& r : rows) {
    if (r.suite != suite) {
      suite = r.suite;
      const bool binary = suite == "binary";
      out << "\n## " << suite << "\n\n";
      out << (binary ? "| classifier | balance | runs | failed | F1 (mean +/- std) | accuracy |\n"
                     : "| dataset | EVs | samples/EV | classifier | runs | failed | accuracy (mean +/- std) | macro-F1 |\n");
      out << (binary ? "|---|---|---|---|---|---|\n" : "|---|---|---|---|---|---|---|---|\n");
    }
    auto ms = [&](const MeanStd& m) { return r.runs ? detail::fixed6(m.mean) + " +/- " + detail::fixed6(m.std) : "n/a"; };
    if (suite == "binary")
      out << "| " << r.classifier << " | " << r.balance_mode << '=' << r.balance_value << " | " << r.runs << " | "
          << r.failed << " | " << ms(r.positive_f1) << " | " << ms(r.accuracy) << " |\n";
    else
      out << "| " << r.dataset << " | " << r.n_evs << " | " << (r.samples_per_ev ? std::to_string(r.samples_per_ev) : "all")
          << " | " << r.classifier << " | " << r.runs << " | " << r.failed << " | " << ms(r.accuracy) << " | "
          << ms(r.macro_f1) << " |\n";
  }
}

// cells.csv, summary.csv, summary.md and (when kept) cv/<cell>_<classifier>.csv.
inline std::vector<std::string> write_report(const std::filesystem::path& dir, const ExperimentReport& report) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorKind::io, "cannot write " + (dir / name).string());
    written.push_back(name);
    return f;
  };
  {
    auto f = open("cells.csv");
    write_cells(f, report.cells);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, report.summary);
  }
  {
    auto f = open("summary.md");
    write_summary_md(f, report.summary);
  }
  for (const auto& c : report.cells) {
    if (c.cv_table.empty()) continue;
    std::filesystem::create_directories(dir / "cv");
    auto f = open("cv/" + c.id() + "_" + c.classifier + ".csv");
    f << "family,params,fold,score\n" << c.cv_table;
  }
  return written;
}

}  // namespace evprof
