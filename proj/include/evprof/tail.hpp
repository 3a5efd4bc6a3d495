#pragma once

// CV-phase tail identification. A filtered current series is scanned from the
// end for its steady zero region (anchor t_s), then walked backward while the
// values keep rising; the rising stretch is the tail and everything before it
// is the CC phase.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "ingest.hpp"
#include "parallel.hpp"
#include "series.hpp"
#include "signal.hpp"

namespace evprof {

struct TailParams {
  double zero_eps = 0.5;          // values <= zero_eps count as zero
  std::size_t min_zero_run = 5;   // zero samples required in the anchor region
  std::size_t max_spike_len = 3;  // non-zero runs shorter than this inside the zero region are noise
  double epsilon = 0.12;          // minimum backward rise that counts as "increasing"
  std::size_t t_max = 4;          // consecutive non-increasing steps that end the walk
  std::size_t min_len = 20;
  std::size_t max_len = 2000;
};

inline void validate(const TailParams& p) {
  if (!(p.zero_eps >= 0.0)) throw Error(ErrorKind::parameter, "tail.zero_eps must be >= 0");
  if (!(p.epsilon > 0.0)) throw Error(ErrorKind::parameter, "tail.epsilon must be > 0");
  if (p.t_max < 1) throw Error(ErrorKind::parameter, "tail.t_max must be >= 1");
  if (!(p.min_len > 0 && p.min_len < p.max_len))
    throw Error(ErrorKind::parameter, "tail lengths need 0 < min_len < max_len");
}

enum class RejectCode {
  no_zero_anchor,
  tail_too_short,
  tail_too_long,
  delta_too_short,
  delta_too_long,
  zero_valued_segment,
  empty_cc,
};

inline const char* to_string(RejectCode c) {
  switch (c) {
    case RejectCode::no_zero_anchor: return "no-zero-anchor";
    case RejectCode::tail_too_short: return "tail-too-short";
    case RejectCode::tail_too_long: return "tail-too-long";
    case RejectCode::delta_too_short: return "delta-too-short";
    case RejectCode::delta_too_long: return "delta-too-long";
    case RejectCode::zero_valued_segment: return "zero-valued-segment";
    case RejectCode::empty_cc: return "empty-cc";
  }
  return "?";
}

struct RejectionReason {
  RejectCode code;
  std::string detail;
};

struct SegmentPair {
  std::string session_id;
  std::optional<std::string> ev_label;
  TimeSeries tail;   // filtered current on [t_start, t_s)
  TimeSeries delta;  // length t_start
  std::size_t t_start = 0;
  std::size_t t_s = 0;

  friend bool operator==(const SegmentPair&, const SegmentPair&) = default;
};

// Earliest index of the terminal zero region, or nullopt when the series has
// no such region with at least min_zero_run zeros, or is zero throughout.
inline std::optional<std::size_t> find_zero_anchor(const TimeSeries& series,
                                                   const TailParams& params) {
  const auto& y = series.values;
  auto is_zero = [&](std::size_t i) { return y[i] <= params.zero_eps; };
  std::size_t i = y.size();
  std::size_t zeros = 0;
  std::optional<std::size_t> earliest;
  while (i > 0) {
    std::size_t j = i;
    while (j > 0 && !is_zero(j - 1)) --j;
    const std::size_t spike = i - j;
    if (spike >= params.max_spike_len || (spike > 0 && j == 0)) break;
    std::size_t k = j;
    while (k > 0 && is_zero(k - 1)) --k;
    zeros += j - k;
    earliest = k;
    i = k;
  }
  if (!earliest || zeros < params.min_zero_run || *earliest == 0) return std::nullopt;
  return earliest;
}

// Walks backward from t_s - 1. A step to the previous sample is increasing when
// that sample exceeds the current one by more than epsilon; increasing steps
// reset the counter, anything else advances it, and t_max consecutive
// non-increasing steps stop the walk. Returns t_start, one past the earliest
// sample reached by an increasing step (t_s when there is none).
inline std::size_t extract_tail(const TimeSeries& series, std::size_t t_s,
                                const TailParams& params) {
  if (t_s == 0 || t_s > series.size()) throw Error(ErrorKind::parameter, "empty tail");
  const auto& y = series.values;
  std::size_t i = t_s - 1;
  std::size_t last_reset = i;
  std::size_t counter = 0;
  while (i > 0) {
    const double rise = y[i - 1] - y[i];
    --i;
    if (rise > params.epsilon) {
      counter = 0;
      last_reset = i;
    } else if (++counter >= params.t_max) {
      break;
    }
  }
  return last_reset + 1;
}

inline std::optional<RejectionReason> validate_segments(const TimeSeries& tail,
                                                        const TimeSeries& delta,
                                                        const TailParams& params) {
  auto len = [](const TimeSeries& s) { return std::to_string(s.size()); };
  if (tail.size() < params.min_len) return RejectionReason{RejectCode::tail_too_short, len(tail)};
  if (tail.size() > params.max_len) return RejectionReason{RejectCode::tail_too_long, len(tail)};
  if (delta.size() < params.min_len)
    return RejectionReason{RejectCode::delta_too_short, len(delta)};
  if (delta.size() > params.max_len)
    return RejectionReason{RejectCode::delta_too_long, len(delta)};
  auto peak = [](const TimeSeries& s) {
    double m = 0.0;
    for (double v : s.values) m = std::max(m, std::abs(v));
    return m;
  };
  if (!(peak(tail) > params.zero_eps))
    return RejectionReason{RejectCode::zero_valued_segment, "tail"};
  if (!(peak(delta) > params.zero_eps))
    return RejectionReason{RejectCode::zero_valued_segment, "delta"};
  return std::nullopt;
}

using SegmentResult = std::variant<SegmentPair, RejectionReason>;

inline SegmentResult segment_session(const ChargingSession& session, const FilterParams& filter,
                                     const TailParams& params) {
  const TimeSeries smoothed = apply_filter(session.current, filter);
  const auto t_s = find_zero_anchor(smoothed, params);
  if (!t_s) return RejectionReason{RejectCode::no_zero_anchor, ""};
  const std::size_t t_start = extract_tail(smoothed, *t_s, params);
  if (t_start == 0) return RejectionReason{RejectCode::empty_cc, ""};

  SegmentPair seg;
  seg.session_id = session.session_id;
  seg.ev_label = session.ev_label;
  seg.t_start = t_start;
  seg.t_s = *t_s;
  seg.tail = TimeSeries{{smoothed.values.begin() + static_cast<std::ptrdiff_t>(t_start),
                         smoothed.values.begin() + static_cast<std::ptrdiff_t>(*t_s)},
                        smoothed.sample_period};
  seg.delta = delta_series(session.pilot, session.current, filter.delta_window, t_start);
  if (auto reject = validate_segments(seg.tail, seg.delta, params)) return *reject;
  return seg;
}

struct Rejection {
  std::string session_id;
  RejectionReason reason;
};

struct SegmentationResult {
  std::vector<SegmentPair> segments;
  std::vector<Rejection> rejects;
};

// Corpus order is preserved in both outputs regardless of worker count.
inline SegmentationResult segment_corpus(const Corpus& corpus, const FilterParams& filter,
                                         const TailParams& params, std::size_t workers = 1) {
  validate(params);
  std::vector<std::optional<SegmentResult>> results(corpus.sessions.size());
  parallel_for(workers, corpus.sessions.size(), [&](std::size_t i) {
    results[i] = segment_session(corpus.sessions[i], filter, params);
  });
  SegmentationResult out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (auto* seg = std::get_if<SegmentPair>(&*results[i]))
      out.segments.push_back(std::move(*seg));
    else
      out.rejects.push_back({corpus.sessions[i].session_id, std::get<RejectionReason>(*results[i])});
  }
  return out;
}

// Segment files are newline-delimited JSON, one SegmentPair per line.
inline void write_segments(std::ostream& out, const std::vector<SegmentPair>& segments) {
  for (const auto& s : segments) {
    nlohmann::ordered_json rec;
    rec["sessionID"] = s.session_id;
    rec["userID"] = s.ev_label ? nlohmann::ordered_json(*s.ev_label) : nlohmann::ordered_json(nullptr);
    rec["tStart"] = s.t_start;
    rec["tS"] = s.t_s;
    rec["samplePeriodSec"] = s.tail.sample_period;
    rec["tail"] = s.tail.values;
    rec["delta"] = s.delta.values;
    out << rec.dump() << '\n';
  }
}

inline std::vector<SegmentPair> read_segments(std::istream& in) {
  std::vector<SegmentPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      SegmentPair s;
      s.session_id = rec.at("sessionID").get<std::string>();
      if (!rec.at("userID").is_null()) s.ev_label = rec.at("userID").get<std::string>();
      s.t_start = rec.at("tStart").get<std::size_t>();
      s.t_s = rec.at("tS").get<std::size_t>();
      const double period = rec.value("samplePeriodSec", 1.0);
      s.tail = {rec.at("tail").get<std::vector<double>>(), period};
      s.delta = {rec.at("delta").get<std::vector<double>>(), period};
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, "segments line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_rejects(std::ostream& out, const std::vector<Rejection>& rejects) {
  out << "session_id,code,detail\n";
  for (const auto& r : rejects)
    out << detail::csv_escape(r.session_id) << ',' << to_string(r.reason.code) << ','
        << detail::csv_escape(r.reason.detail) << '\n';
}

}  // namespace evprof
