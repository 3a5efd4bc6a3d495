#pragma once

// Flat `key = value` configuration. Lines starting with '#' are comments.
// Unknown keys are rejected so typos surface instead of silently falling
// back to defaults.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace evprof {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "seed", "workers",
      "ingest.min_points", "ingest.min_sessions",
      "filter.kind", "filter.window", "filter.delta_window", "filter.low_pass_alpha",
      "tail.zero_eps", "tail.min_zero_run", "tail.max_spike_len", "tail.epsilon", "tail.t_max", "tail.min_len",
      "tail.max_len",
      "selection.nof", "selection.scorer",
      "experiment.classifiers", "experiment.reps", "experiment.folds", "experiment.test_fraction",
      "experiment.cv_tables", "grid.rf", "grid.dt", "grid.knn",
      "balance.mode", "balance.values", "balance.min_target_samples",
      "multiclass.sizes", "fixed_grid.evs", "fixed_grid.samples",
      "distribution.shape", "distribution.n_evs", "distribution.mean", "distribution.sigma", "distribution.bins",
      "distribution.per_bin",
      "synth.separation", "synth.min_length", "synth.max_length", "synth.truncate_prob", "synth.noise_sigma",
      "synth.termination_current",
  };
  return keys;
}

class Config {
public:
  static Config parse(std::istream& in, const std::string& origin = "config") {
    Config c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": expected key = value");
      c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::io, "cannot open config file " + path);
    return parse(f, path);
  }

  void set(const std::string& key, const std::string& value) {
    if (!known_config_keys().count(key)) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    values_[key] = value;
  }

  // Later values win.
  void merge(const Config& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return convert<T>(key, it->second);
  }

  template <class T>
  std::vector<T> get_list(const std::string& key, std::vector<T> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<T> out;
    for (const auto& item : split(it->second, ',')) out.push_back(convert<T>(key, item));
    return out;
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto end = std::min(s.find(sep, start), s.size());
      const std::string item = trim(s.substr(start, end - start));
      if (!item.empty()) out.push_back(item);
      start = end + 1;
    }
    return out;
  }

  template <class T>
  static T convert(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw Error(ErrorKind::config, key + ": expected a boolean, got '" + text + "'");
    } else {
      T v{};
      auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw Error(ErrorKind::config, key + ": cannot parse '" + text + "'");
      return v;
    }
  }

private:
  static std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace evprof
