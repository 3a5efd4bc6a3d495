#pragma once

// Command-line dispatch shared by the evprof binary and the tests.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "features.hpp"
#include "ingest.hpp"
#include "learn/model.hpp"
#include "manifest.hpp"
#include "report.hpp"
#include "signal.hpp"
#include "synth.hpp"
#include "tail.hpp"

namespace evprof::cli {

namespace fs = std::filesystem;

// Effective value of every key: struct defaults overlaid by the config file
// and then by command-line flags. Suite-dependent keys are left out until a
// suite resolves them.
inline std::map<std::string, std::string> default_config() {
  using detail::format_double;
  const FilterParams f;
  const TailParams t;
  const PrimaryFilter pf;
  const SynthOptions so;
  return {
      {"seed", "0"},
      {"workers", "1"},
      {"ingest.min_points", std::to_string(pf.min_points)},
      {"ingest.min_sessions", std::to_string(pf.min_sessions)},
      {"filter.kind", to_string(f.kind)},
      {"filter.window", std::to_string(f.window)},
      {"filter.delta_window", std::to_string(f.delta_window)},
      {"filter.low_pass_alpha", format_double(f.low_pass_alpha)},
      {"tail.zero_eps", format_double(t.zero_eps)},
      {"tail.min_zero_run", std::to_string(t.min_zero_run)},
      {"tail.max_spike_len", std::to_string(t.max_spike_len)},
      {"tail.epsilon", format_double(t.epsilon)},
      {"tail.t_max", std::to_string(t.t_max)},
      {"tail.min_len", std::to_string(t.min_len)},
      {"tail.max_len", std::to_string(t.max_len)},
      {"selection.scorer", "chi2"},
      {"experiment.reps", "5"},
      {"experiment.folds", "5"},
      {"experiment.test_fraction", "0.2"},
      {"experiment.cv_tables", "false"},
      {"balance.mode", "q-prime"},
      {"balance.values", "1,2,3,4,5"},
      {"balance.min_target_samples", "50"},
      {"multiclass.sizes", "small,medium,large,complete"},
      {"fixed_grid.evs", "50,100,150,200"},
      {"fixed_grid.samples", "10,25,50,75"},
      {"distribution.shape", "normal"},
      {"distribution.n_evs", "119"},
      {"distribution.bins", "20"},
      {"distribution.per_bin", "6"},
      {"synth.separation", "well-separated"},
      {"synth.min_length", std::to_string(so.min_length)},
      {"synth.max_length", std::to_string(so.max_length)},
      {"synth.truncate_prob", format_double(so.truncate_prob)},
      {"synth.termination_current", format_double(so.termination_current)},
  };
}

struct Settings {
  Config config;  // resolved

  std::string str(const std::string& key) const { return config.get(key, std::string()); }
  template <class T>
  T num(const std::string& key) const {
    return Config::convert<T>(key, str(key));
  }
  template <class T>
  std::vector<T> list(const std::string& key) const {
    return config.get_list<T>(key, {});
  }

  FilterParams filter() const {
    FilterParams f;
    f.kind = parse_filter_kind(str("filter.kind"));
    f.window = num<std::size_t>("filter.window");
    f.delta_window = num<std::size_t>("filter.delta_window");
    f.low_pass_alpha = num<double>("filter.low_pass_alpha");
    return f;
  }
  TailParams tail() const {
    TailParams t;
    t.zero_eps = num<double>("tail.zero_eps");
    t.min_zero_run = num<std::size_t>("tail.min_zero_run");
    t.max_spike_len = num<std::size_t>("tail.max_spike_len");
    t.epsilon = num<double>("tail.epsilon");
    t.t_max = num<std::size_t>("tail.t_max");
    t.min_len = num<std::size_t>("tail.min_len");
    t.max_len = num<std::size_t>("tail.max_len");
    return t;
  }
};

// Flags bound to config keys: only flags actually given override the file.
class Bindings {
public:
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = slots_.emplace_back(std::make_unique<std::string>());
    CLI::Option* opt = app->add_option(flag, *slot, help);
    entries_.push_back({opt, slot.get(), key});
  }
  void apply(Config& config) const {
    for (const auto& e : entries_)
      if (e.option->count() > 0) config.set(e.key, *e.value);
  }

private:
  struct Entry {
    CLI::Option* option;
    std::string* value;
    std::string key;
  };
  std::vector<std::unique_ptr<std::string>> slots_;
  std::vector<Entry> entries_;
};

inline SessionFormat format_for_path(const std::string& path, const std::string& explicit_format) {
  if (!explicit_format.empty()) return parse_format(explicit_format);
  return fs::path(path).extension() == ".csv" ? SessionFormat::csv : SessionFormat::acn_json;
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot write " + path.string());
  return f;
}

inline FeatureMatrix load_features(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot open features file " + path);
  return read_feature_csv(f);
}

inline std::vector<learn::ClassifierSpec> parse_grid(learn::Family family, const std::string& text) {
  std::vector<learn::ClassifierSpec> grid;
  for (const auto& item : Config::split(text, '|')) grid.push_back(learn::parse_spec(family, item));
  if (grid.empty()) throw Error(ErrorKind::config, "empty grid for " + std::string(learn::to_string(family)));
  return grid;
}

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"evprof: EV profiling from charging current time series"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  Bindings global;
  app.add_option("--config", config_path, "flat key = value config file");
  global.bind(&app, "--workers", "workers", "worker threads (results do not depend on it)");
  global.bind(&app, "--seed", "seed", "master seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse raw sessions and apply the primary filters");
  std::string ingest_in, ingest_format, ingest_out, ingest_out_format;
  Bindings b_ingest;
  ingest->add_option("--input", ingest_in, "raw session file")->required();
  ingest->add_option("--format", ingest_format, "acn-json | csv")->required();
  ingest->add_option("--out", ingest_out, "filtered corpus")->required();
  ingest->add_option("--out-format", ingest_out_format, "acn-json | csv (default from extension)");
  b_ingest.bind(ingest, "--min-points", "ingest.min_points", "minimum samples per series");
  b_ingest.bind(ingest, "--min-sessions", "ingest.min_sessions", "minimum sessions per EV");

  // extract
  auto* extract = app.add_subcommand("extract", "segment sessions into tail and delta series");
  std::string ex_sessions, ex_format, ex_out, ex_rejects;
  Bindings b_extract;
  extract->add_option("--sessions", ex_sessions, "session corpus")->required();
  extract->add_option("--format", ex_format, "acn-json | csv (default from extension)");
  extract->add_option("--out", ex_out, "segments file (JSON lines)")->required();
  extract->add_option("--rejects", ex_rejects, "rejects CSV")->required();
  b_extract.bind(extract, "--filter", "filter.kind", "moving-average | moving-median | low-pass");
  b_extract.bind(extract, "--window", "filter.window", "smoothing window");
  b_extract.bind(extract, "--epsilon", "tail.epsilon", "tail walk tolerance");
  b_extract.bind(extract, "--t-max", "tail.t_max", "tail walk patience");

  // featurize
  auto* featurize_cmd = app.add_subcommand("featurize", "compute the feature catalog per segment pair");
  std::string fz_segments, fz_out;
  featurize_cmd->add_option("--segments", fz_segments, "segments file")->required();
  featurize_cmd->add_option("--out", fz_out, "feature CSV")->required();

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run an experiment suite");
  experiment->require_subcommand(1);
  experiment->fallthrough();
  struct SuiteArgs {
    std::string features, out;
    bool cv_tables = false;
    Bindings bind;
  };
  std::map<std::string, SuiteArgs> suites;
  auto add_suite = [&](const std::string& name, const std::string& help) {
    auto* sub = experiment->add_subcommand(name, help);
    auto& a = suites[name];
    sub->add_option("--features", a.features, "feature CSV")->required();
    sub->add_option("--out", a.out, "output directory")->required();
    sub->add_flag("--cv-tables", a.cv_tables, "also write per-cell CV tables");
    a.bind.bind(sub, "--nof", "selection.nof", "features kept after selection");
    a.bind.bind(sub, "--scorer", "selection.scorer", "chi2 | anova-f");
    a.bind.bind(sub, "--reps", "experiment.reps", "repetitions");
    a.bind.bind(sub, "--classifiers", "experiment.classifiers", "comma list of rf, dt, knn");
    return std::make_pair(sub, &a);
  };
  {
    auto [sub, a] = add_suite("binary", "one-vs-all suites under Q or Q' balancing");
    a->bind.bind(sub, "--balance", "balance.mode", "q | q-prime");
    a->bind.bind(sub, "--values", "balance.values", "comma list of ratios in [1, 5]");
    a->bind.bind(sub, "--min-target", "balance.min_target_samples", "rows a target EV needs");
  }
  {
    auto [sub, a] = add_suite("multiclass", "multi-class suites over dataset sizes");
    a->bind.bind(sub, "--size", "multiclass.sizes", "comma list of small, medium, large, complete");
  }
  {
    auto [sub, a] = add_suite("grid", "fixed EVs x samples-per-EV grid");
    a->bind.bind(sub, "--evs", "fixed_grid.evs", "comma list of EV counts");
    a->bind.bind(sub, "--samples", "fixed_grid.samples", "comma list of samples per EV");
    a->bind.bind(sub, "--classifier", "experiment.classifiers", "classifier families (default rf)");
  }
  {
    auto [sub, a] = add_suite("distribution", "normal / uniform shaped sub-samples");
    a->bind.bind(sub, "--shape", "distribution.shape", "comma list of regular, normal, uniform");
    a->bind.bind(sub, "--n-evs", "distribution.n_evs", "EVs in the normal shape");
    a->bind.bind(sub, "--mean", "distribution.mean", "normal mean rows per EV");
    a->bind.bind(sub, "--sigma", "distribution.sigma", "normal std of rows per EV");
    a->bind.bind(sub, "--bins", "distribution.bins", "uniform bins");
    a->bind.bind(sub, "--per-bin", "distribution.per_bin", "uniform EVs per bin");
  }

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labelled synthetic corpus");
  std::string sy_out;
  std::size_t sy_evs = 0, sy_sessions = 0;
  Bindings b_synth;
  synth->add_option("--evs", sy_evs, "EV count")->required();
  synth->add_option("--sessions", sy_sessions, "sessions per EV")->required();
  synth->add_option("--out", sy_out, "output (acn-json, or csv by extension)")->required();
  b_synth.bind(synth, "--separation", "synth.separation", "well-separated | overlapping");
  b_synth.bind(synth, "--truncate-prob", "synth.truncate_prob", "chance a session ends before its tail");
  b_synth.bind(synth, "--noise-sigma", "synth.noise_sigma", "override per-sample noise (A)");

  // report
  auto* report = app.add_subcommand("report", "pivot cells.csv into plot-ready tables");
  std::string rp_in, rp_out;
  report->add_option("--in", rp_in, "experiment output directory")->required();
  report->add_option("--out", rp_out, "destination (default: --in)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    Settings s;
    for (const auto& [k, v] : default_config()) s.config.set(k, v);
    if (!config_path.empty()) s.config.merge(Config::load(config_path));
    global.apply(s.config);
    const std::size_t workers = std::max<std::size_t>(1, s.num<std::size_t>("workers"));
    const auto seed = s.num<std::uint64_t>("seed");

    if (ingest->parsed()) {
      b_ingest.apply(s.config);
      RunManifest m("ingest");
      m.set_seed(seed);
      m.add_input(ingest_in);
      const PrimaryFilter pf{s.num<std::size_t>("ingest.min_points"), s.num<std::size_t>("ingest.min_sessions")};
      const Corpus raw = m.stage("parse", [&] { return parse_sessions(ingest_in, parse_format(ingest_format)); });
      m.count("records", raw.stats.records);
      m.count("dropped_missing", raw.stats.dropped_missing);
      m.count("truncated", raw.stats.truncated);
      m.count("clamped_samples", raw.stats.clamped_samples);
      const Corpus kept = m.stage("primary-filter", [&] { return apply_primary_filters(raw, pf); });
      const auto summary = dataset_summary(kept, 10);
      m.count("sessions", summary.n_sessions);
      m.count("evs", summary.n_evs);
      {
        auto f = open_output(ingest_out);
        write_sessions(f, kept, format_for_path(ingest_out, ingest_out_format));
      }
      m.add_output(ingest_out);
      m.set_config(s.config.values());
      m.write(ingest_out + ".manifest.json");
      out << "ingested " << raw.stats.records << " records, dropped " << raw.stats.dropped_missing
          << "; kept " << summary.n_sessions << " sessions from " << summary.n_evs << " EVs\n";
      return 0;
    }

    if (extract->parsed()) {
      b_extract.apply(s.config);
      RunManifest m("extract");
      m.set_seed(seed);
      m.add_input(ex_sessions);
      const auto filter = s.filter();
      const auto tail = s.tail();
      const Corpus corpus = parse_sessions(ex_sessions, format_for_path(ex_sessions, ex_format));
      const auto res = m.stage("segment", [&] { return segment_corpus(corpus, filter, tail, workers); });
      m.count("sessions", corpus.sessions.size());
      m.count("segments", res.segments.size());
      m.count("rejected", res.rejects.size());
      std::map<std::string, std::uint64_t> by_code;
      for (const auto& r : res.rejects) ++by_code[to_string(r.reason.code)];
      for (const auto& [code, n] : by_code) m.count("rejected." + code, n);
      {
        auto f = open_output(ex_out);
        write_segments(f, res.segments);
      }
      {
        auto f = open_output(ex_rejects);
        write_rejects(f, res.rejects);
      }
      m.add_output(ex_out);
      m.add_output(ex_rejects);
      m.set_config(s.config.values());
      m.write(ex_out + ".manifest.json");
      out << "segmented " << res.segments.size() << " of " << corpus.sessions.size() << " sessions ("
          << res.rejects.size() << " rejected)\n";
      return 0;
    }

    if (featurize_cmd->parsed()) {
      RunManifest m("featurize");
      m.set_seed(seed);
      m.add_input(fz_segments);
      std::ifstream in(fz_segments, std::ios::binary);
      if (!in) throw Error(ErrorKind::io, "cannot open segments file " + fz_segments);
      const auto segments = read_segments(in);
      const auto fm = m.stage("featurize", [&] { return featurize(segments, workers); });
      m.count("rows", fm.rows());
      m.count("columns", fm.cols());
      {
        auto f = open_output(fz_out);
        write_feature_csv(f, fm);
      }
      m.add_output(fz_out);
      m.set_config(s.config.values());
      m.write(fz_out + ".manifest.json");
      out << "featurized " << fm.rows() << " segment pairs into " << fm.cols() << " columns\n";
      return 0;
    }

    if (experiment->parsed()) {
      std::string name;
      for (auto* sub : experiment->get_subcommands())
        if (sub->parsed()) name = sub->get_name();
      auto& a = suites.at(name);
      a.bind.apply(s.config);
      ExperimentConfig cfg;
      cfg.suite = parse_suite(name);
      cfg.seed = seed;
      cfg.workers = workers;
      cfg.keep_cv_tables = a.cv_tables || s.num<bool>("experiment.cv_tables");
      cfg.repetitions = s.num<std::size_t>("experiment.reps");
      cfg.folds = s.num<std::size_t>("experiment.folds");
      cfg.test_fraction = s.num<double>("experiment.test_fraction");
      cfg.selection.scorer = parse_scorer(s.str("selection.scorer"));
      const bool binary = cfg.suite == Suite::binary;
      if (!s.config.has("selection.nof")) s.config.set("selection.nof", binary ? "100" : "200");
      cfg.selection.nof = s.num<std::size_t>("selection.nof");
      if (!s.config.has("experiment.classifiers"))
        s.config.set("experiment.classifiers", cfg.suite == Suite::fixed_grid ? "rf" : "rf,dt,knn");
      cfg.classifiers.clear();
      for (const auto& c : s.list<std::string>("experiment.classifiers")) cfg.classifiers.push_back(learn::parse_family(c));
      for (const auto* key : {"grid.rf", "grid.dt", "grid.knn"})
        if (s.config.has(key)) {
          const auto fam = learn::parse_family(std::string(key).substr(5));
          cfg.grids[fam] = parse_grid(fam, s.str(key));
        }
      cfg.balance_mode = parse_balance_mode(s.str("balance.mode"));
      cfg.balance_values = s.list<double>("balance.values");
      cfg.min_target_samples = s.num<std::size_t>("balance.min_target_samples");
      for (const auto& sz : s.list<std::string>("multiclass.sizes")) cfg.sizes.push_back(parse_size(sz));
      cfg.grid_evs = s.list<std::size_t>("fixed_grid.evs");
      cfg.grid_samples = s.list<std::size_t>("fixed_grid.samples");
      for (const auto& shape : s.list<std::string>("distribution.shape")) {
        DistributionParams d;
        d.shape = parse_shape(shape);
        d.n_evs = s.num<std::size_t>("distribution.n_evs");
        if (s.config.has("distribution.mean")) d.mean = s.num<double>("distribution.mean");
        if (s.config.has("distribution.sigma")) d.sigma = s.num<double>("distribution.sigma");
        d.bins = s.num<std::size_t>("distribution.bins");
        d.per_bin = s.num<std::size_t>("distribution.per_bin");
        cfg.distributions.push_back(d);
      }

      RunManifest m("experiment " + name);
      m.set_seed(seed);
      m.add_input(a.features);
      const auto fm = m.stage("load", [&] { return load_features(a.features); });
      m.count("rows", fm.rows());
      const auto rep = m.stage("run", [&] { return run_suite(fm, cfg); });
      std::size_t failed = 0;
      for (const auto& c : rep.cells) failed += c.ok() ? 0 : 1;
      m.count("cells", rep.cells.size());
      m.count("failed_cells", failed);
      for (const auto& f : write_report(a.out, rep)) m.add_output(f);
      m.set_config(s.config.values());
      m.write(fs::path(a.out) / "manifest.json");
      out << "wrote " << rep.cells.size() << " cells (" << failed << " failed) to " << a.out << '\n';
      return 0;
    }

    if (synth->parsed()) {
      b_synth.apply(s.config);
      SynthOptions so;
      so.separation = parse_separation(s.str("synth.separation"));
      so.min_length = s.num<std::size_t>("synth.min_length");
      so.max_length = s.num<std::size_t>("synth.max_length");
      so.truncate_prob = s.num<double>("synth.truncate_prob");
      so.termination_current = s.num<double>("synth.termination_current");
      if (s.config.has("synth.noise_sigma")) so.noise_sigma = s.num<double>("synth.noise_sigma");
      if (!(so.truncate_prob >= 0.0 && so.truncate_prob <= 1.0))
        throw Error(ErrorKind::parameter, "truncate probability must be in [0, 1]");
      RunManifest m("synth");
      m.set_seed(seed);
      const Corpus c = m.stage("generate", [&] { return generate_corpus(sy_evs, sy_sessions, seed, so); });
      m.count("sessions", c.sessions.size());
      m.count("evs", sy_evs);
      {
        auto f = open_output(sy_out);
        write_sessions(f, c, format_for_path(sy_out, ""));
      }
      m.add_output(sy_out);
      m.set_config(s.config.values());
      m.write(sy_out + ".manifest.json");
      out << "generated " << c.sessions.size() << " sessions for " << sy_evs << " EVs\n";
      return 0;
    }

    if (report->parsed()) {
      const fs::path in_dir = rp_in;
      const fs::path out_dir = rp_out.empty() ? in_dir : fs::path(rp_out);
      RunManifest m("report");
      m.set_seed(seed);
      m.add_input(in_dir / "cells.csv");
      const auto cells = load_cells(in_dir);
      const auto written = m.stage("pivot", [&] { return write_pivots(out_dir, cells); });
      m.count("cells", cells.size());
      for (const auto& f : written) m.add_output(f);
      m.set_config(s.config.values());
      // A directory keeps one manifest: fold the report into an existing one.
      const auto manifest_path = out_dir / "manifest.json";
      if (fs::exists(manifest_path)) {
        std::ifstream mf(manifest_path);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(mf);
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorKind::parse, manifest_path.string() + ": " + e.what());
        }
        j["report"] = m.to_json();
        for (const auto& f : written)
          if (std::find(j["outputs"].begin(), j["outputs"].end(), f) == j["outputs"].end()) j["outputs"].push_back(f);
        auto f = open_output(manifest_path);
        f << j.dump(2) << '\n';
      } else {
        m.write(manifest_path);
      }
      out << "wrote " << written.size() << " report files to " << out_dir.string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error [io]: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace evprof::cli
