#pragma once

// Charging-session corpora: acn-json / csv readers and writers, admission
// filters and corpus composition summaries.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "series.hpp"

namespace evprof {

struct ChargingSession {
  std::string session_id;
  std::optional<std::string> ev_label;  // dataset "userID"
  std::string station_id;
  std::string connect_time;  // ISO-8601, provenance only
  TimeSeries pilot;
  TimeSeries current;

  friend bool operator==(const ChargingSession&, const ChargingSession&) = default;
};

struct IngestStats {
  std::size_t records = 0;
  std::size_t dropped_missing = 0;   // no session id, pilot or current
  std::size_t truncated = 0;         // pilot/current length mismatch
  std::size_t clamped_samples = 0;   // negative current samples set to 0
};

struct Corpus {
  std::vector<ChargingSession> sessions;
  std::string provenance;
  IngestStats stats;
};

enum class SessionFormat { acn_json, csv };

inline SessionFormat parse_format(std::string_view tag) {
  if (tag == "acn-json") return SessionFormat::acn_json;
  if (tag == "csv") return SessionFormat::csv;
  throw Error(ErrorKind::config, "unknown session format '" + std::string(tag) + "'");
}

inline const char* to_string(SessionFormat f) {
  return f == SessionFormat::acn_json ? "acn-json" : "csv";
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t record) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error(ErrorKind::parse,
                "record " + std::to_string(record) + ": bad number '" + std::string(s) + "'");
  return v;
}

// Splits one CSV line, honouring double-quoted fields.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<double> parse_series_field(std::string_view s, std::size_t record) {
  std::vector<double> values;
  if (s.empty()) return values;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find(';', start), s.size());
    values.push_back(parse_double(s.substr(start, end - start), record));
    start = end + 1;
  }
  return values;
}

// Applies the admission rules shared by both formats. Returns false when the
// record must be dropped.
inline bool admit(ChargingSession& s, std::vector<double> pilot, std::vector<double> current,
                  double period, IngestStats& stats) {
  if (s.session_id.empty() || pilot.empty() || current.empty()) {
    ++stats.dropped_missing;
    return false;
  }
  if (pilot.size() != current.size()) {
    const std::size_t n = std::min(pilot.size(), current.size());
    pilot.resize(n);
    current.resize(n);
    ++stats.truncated;
  }
  for (double& v : current) {
    if (v < 0.0) {
      v = 0.0;
      ++stats.clamped_samples;
    }
  }
  s.pilot = TimeSeries{std::move(pilot), period};
  s.current = TimeSeries{std::move(current), period};
  return true;
}

inline Corpus parse_acn_json(std::istream& in, std::string provenance) {
  Corpus corpus;
  corpus.provenance = std::move(provenance);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object())
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected an object");
    ++corpus.stats.records;

    auto read_series = [&](const char* key) {
      std::vector<double> out;
      auto it = rec.find(key);
      if (it == rec.end() || it->is_null()) return out;
      if (!it->is_array())
        throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + key +
                                          " must be an array");
      out.reserve(it->size());
      for (const auto& v : *it) {
        if (!v.is_number())
          throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + key +
                                            " holds a non-number");
        out.push_back(v.get<double>());
      }
      return out;
    };
    auto read_string = [&](const char* key) -> std::optional<std::string> {
      auto it = rec.find(key);
      if (it == rec.end() || it->is_null()) return std::nullopt;
      if (it->is_string()) return it->get<std::string>();
      if (it->is_number()) return it->dump();
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + key +
                                        " must be a string");
    };

    ChargingSession s;
    s.session_id = read_string("sessionID").value_or("");
    s.ev_label = read_string("userID");
    if (s.ev_label && s.ev_label->empty()) s.ev_label.reset();
    s.station_id = read_string("stationID").value_or("");
    s.connect_time = read_string("connectionTime").value_or("");
    double period = 1.0;
    if (auto it = rec.find("samplePeriodSec"); it != rec.end() && !it->is_null()) {
      if (!it->is_number() || !(it->get<double>() > 0.0))
        throw Error(ErrorKind::parse,
                    "line " + std::to_string(line_no) + ": samplePeriodSec must be positive");
      period = it->get<double>();
    }
    if (!admit(s, read_series("pilotSignal"), read_series("chargingCurrent"), period,
               corpus.stats))
      continue;
    if (!seen.insert(s.session_id).second)
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) +
                                        ": duplicate session id '" + s.session_id + "'");
    corpus.sessions.push_back(std::move(s));
  }
  return corpus;
}

inline constexpr std::string_view kCsvHeader =
    "sessionID,userID,stationID,connectionTime,samplePeriodSec,pilotSignal,chargingCurrent";

inline Corpus parse_csv(std::istream& in, std::string provenance) {
  Corpus corpus;
  corpus.provenance = std::move(provenance);
  std::string line;
  if (!std::getline(in, line)) return corpus;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw Error(ErrorKind::parse, "line 1: unexpected csv header");
  std::size_t line_no = 1;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv_line(line);
    if (f.size() != 7)
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                        std::to_string(f.size()));
    ++corpus.stats.records;
    ChargingSession s;
    s.session_id = f[0];
    if (!f[1].empty()) s.ev_label = f[1];
    s.station_id = f[2];
    s.connect_time = f[3];
    double period = 1.0;
    if (!f[4].empty()) {
      period = parse_double(f[4], line_no);
      if (!(period > 0.0))
        throw Error(ErrorKind::parse,
                    "line " + std::to_string(line_no) + ": samplePeriodSec must be positive");
    }
    if (!admit(s, parse_series_field(f[5], line_no), parse_series_field(f[6], line_no), period,
               corpus.stats))
      continue;
    if (!seen.insert(s.session_id).second)
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) +
                                        ": duplicate session id '" + s.session_id + "'");
    corpus.sessions.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace detail

inline Corpus parse_sessions(std::istream& in, SessionFormat format,
                             std::string provenance = "stream") {
  return format == SessionFormat::acn_json ? detail::parse_acn_json(in, std::move(provenance))
                                           : detail::parse_csv(in, std::move(provenance));
}

inline Corpus parse_sessions(const std::string& path, SessionFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse, "cannot open '" + path + "'");
  return parse_sessions(in, format, path);
}

inline void write_session_json(std::ostream& out, const ChargingSession& s) {
  nlohmann::ordered_json rec;
  rec["sessionID"] = s.session_id;
  rec["userID"] = s.ev_label ? nlohmann::ordered_json(*s.ev_label) : nlohmann::ordered_json(nullptr);
  rec["stationID"] = s.station_id;
  rec["connectionTime"] = s.connect_time;
  rec["samplePeriodSec"] = s.current.sample_period;
  rec["pilotSignal"] = s.pilot.values;
  rec["chargingCurrent"] = s.current.values;
  out << rec.dump() << '\n';
}

inline void write_sessions(std::ostream& out, const Corpus& corpus, SessionFormat format) {
  if (format == SessionFormat::acn_json) {
    for (const auto& s : corpus.sessions) write_session_json(out, s);
    return;
  }
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ';';
      s += detail::format_double(v[i]);
    }
    return s;
  };
  out << detail::kCsvHeader << '\n';
  for (const auto& s : corpus.sessions) {
    out << detail::csv_escape(s.session_id) << ',' << detail::csv_escape(s.ev_label.value_or(""))
        << ',' << detail::csv_escape(s.station_id) << ',' << detail::csv_escape(s.connect_time)
        << ',' << detail::format_double(s.current.sample_period) << ',' << join(s.pilot.values)
        << ',' << join(s.current.values) << '\n';
  }
}

struct PrimaryFilter {
  std::size_t min_points = 100;
  std::size_t min_sessions = 10;
};

// Keeps labelled sessions with both series >= min_points, then drops every EV
// left with fewer than min_sessions of them. Idempotent.
inline Corpus apply_primary_filters(const Corpus& corpus, PrimaryFilter filter = {}) {
  std::map<std::string, std::size_t> per_ev;
  auto qualifies = [&](const ChargingSession& s) {
    return s.ev_label.has_value() && !s.ev_label->empty() &&
           s.pilot.size() >= filter.min_points && s.current.size() >= filter.min_points;
  };
  for (const auto& s : corpus.sessions)
    if (qualifies(s)) ++per_ev[*s.ev_label];

  Corpus out;
  out.provenance = corpus.provenance;
  out.stats = corpus.stats;
  for (const auto& s : corpus.sessions)
    if (qualifies(s) && per_ev[*s.ev_label] >= filter.min_sessions) out.sessions.push_back(s);
  return out;
}

struct DatasetSummary {
  std::size_t bin_width = 0;
  std::vector<std::size_t> ev_counts;  // bin i covers [i*w, (i+1)*w)
  std::size_t n_evs = 0;
  std::size_t n_sessions = 0;  // labelled sessions only
  double mean_sessions_per_ev = 0.0;
};

inline std::map<std::string, std::size_t> sessions_per_ev(const Corpus& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus.sessions)
    if (s.ev_label) ++counts[*s.ev_label];
  return counts;
}

inline DatasetSummary dataset_summary(const Corpus& corpus, std::size_t bin_width) {
  if (bin_width == 0) throw Error(ErrorKind::config, "bin width must be positive");
  DatasetSummary summary;
  summary.bin_width = bin_width;
  const auto counts = sessions_per_ev(corpus);
  if (counts.empty()) return summary;
  std::size_t max_count = 0;
  for (const auto& [ev, n] : counts) {
    max_count = std::max(max_count, n);
    summary.n_sessions += n;
  }
  summary.ev_counts.assign(max_count / bin_width + 1, 0);
  for (const auto& [ev, n] : counts) ++summary.ev_counts[n / bin_width];
  summary.n_evs = counts.size();
  summary.mean_sessions_per_ev =
      static_cast<double>(summary.n_sessions) / static_cast<double>(summary.n_evs);
  return summary;
}

}  // namespace evprof
