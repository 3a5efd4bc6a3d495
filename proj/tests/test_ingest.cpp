#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "evprof/ingest.hpp"
#include "util.hpp"

using namespace evprof;
using testutil::expect_error;

namespace {

std::string json_record(const std::string& id, const std::string& user, std::size_t n, bool with_pilot = true) {
  std::string pilot = "[", current = "[";
  for (std::size_t i = 0; i < n; ++i) {
    pilot += (i ? "," : "") + std::string("32");
    current += (i ? "," : "") + std::to_string(30 - static_cast<int>(i % 7));
  }
  pilot += "]";
  current += "]";
  std::string rec = "{\"sessionID\":\"" + id + "\",\"userID\":" + user +
                    ",\"stationID\":\"CA-1\",\"connectionTime\":\"2019-05-01T08:00:00Z\"";
  if (with_pilot) rec += ",\"pilotSignal\":" + pilot;
  return rec + ",\"chargingCurrent\":" + current + "}\n";
}

ChargingSession session(const std::string& id, const std::string& ev, std::size_t n) {
  ChargingSession s;
  s.session_id = id;
  s.ev_label = ev;
  s.pilot = TimeSeries{std::vector<double>(n, 32.0), 1.0};
  s.current = TimeSeries{std::vector<double>(n, 16.0), 1.0};
  return s;
}

Corpus random_corpus(std::mt19937_64& rng) {
  Corpus c;
  const std::size_t n_evs = 1 + rng() % 12;
  int id = 0;
  for (std::size_t ev = 0; ev < n_evs; ++ev) {
    const std::size_t n = rng() % 25;
    for (std::size_t j = 0; j < n; ++j)
      c.sessions.push_back(session("s" + std::to_string(id++), "EV" + std::to_string(ev), 60 + rng() % 80));
  }
  for (std::size_t j = rng() % 4; j > 0; --j) {
    auto s = session("u" + std::to_string(id++), "", 150);
    s.ev_label.reset();
    c.sessions.push_back(s);
  }
  return c;
}

}  // namespace

TEST(ParseSessions, JsonRecordMapsFields) {
  std::istringstream in(json_record("S1", "\"EV7\"", 120));
  const auto c = parse_sessions(in, SessionFormat::acn_json);
  ASSERT_EQ(c.sessions.size(), 1u);
  EXPECT_EQ(c.sessions[0].session_id, "S1");
  EXPECT_EQ(c.sessions[0].ev_label, "EV7");
  EXPECT_EQ(c.sessions[0].pilot.size(), 120u);
  EXPECT_EQ(c.sessions[0].current.size(), 120u);
  EXPECT_EQ(c.sessions[0].station_id, "CA-1");
}

TEST(ParseSessions, NullUserIdLeavesSessionUnlabelled) {
  std::istringstream in(json_record("S1", "null", 10));
  const auto c = parse_sessions(in, SessionFormat::acn_json);
  ASSERT_EQ(c.sessions.size(), 1u);
  EXPECT_FALSE(c.sessions[0].ev_label.has_value());
}

TEST(ParseSessions, MissingPilotIsDropped) {
  std::istringstream in(json_record("S1", "\"EV7\"", 50, false) + json_record("S2", "\"EV7\"", 50));
  const auto c = parse_sessions(in, SessionFormat::acn_json);
  EXPECT_EQ(c.sessions.size(), 1u);
  EXPECT_EQ(c.stats.dropped_missing, 1u);
  EXPECT_EQ(c.stats.records, 2u);
}

TEST(ParseSessions, NegativeCurrentClampedAndLengthsAligned) {
  std::istringstream in(
      "{\"sessionID\":\"a\",\"userID\":\"1\",\"pilotSignal\":[32,32,32],\"chargingCurrent\":[5,-2]}\n");
  const auto c = parse_sessions(in, SessionFormat::acn_json);
  ASSERT_EQ(c.sessions.size(), 1u);
  EXPECT_EQ(c.sessions[0].current.values, (std::vector<double>{5, 0}));
  EXPECT_EQ(c.sessions[0].pilot.size(), 2u);
  EXPECT_EQ(c.stats.truncated, 1u);
  EXPECT_EQ(c.stats.clamped_samples, 1u);
}

TEST(ParseSessions, CsvDuplicateIdsAreFatal) {
  std::string text(detail::kCsvHeader);
  text += "\n";
  for (int i = 0; i < 3; ++i) text += "dup,EV1,st,t,1,32;32,10;10\n";
  std::istringstream in(text);
  expect_error([&] { parse_sessions(in, SessionFormat::csv); }, ErrorKind::parse);
}

TEST(ParseSessions, MalformedInputReportsLine) {
  std::istringstream in(json_record("S1", "\"EV7\"", 5) + "{not json\n");
  try {
    parse_sessions(in, SessionFormat::acn_json);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseSessions, UnknownFormatTagIsConfigError) {
  expect_error([] { parse_format("parquet"); }, ErrorKind::config);
}

TEST(ParseSessions, RoundTripIsBitExact) {
  Corpus c;
  auto s = session("id,with\"quote", "EV 1", 4);
  s.current.values = {0.1, 1e-300, 31.999999999999996, 2.0 / 3.0};
  s.pilot.values = {32, 32, 24.5, -7.25e-12};
  s.current.sample_period = s.pilot.sample_period = 0.25;
  s.station_id = "CA-313";
  s.connect_time = "2019-01-02T03:04:05Z";
  c.sessions.push_back(s);
  auto u = session("x2", "", 3);
  u.ev_label.reset();
  c.sessions.push_back(u);
  for (auto format : {SessionFormat::acn_json, SessionFormat::csv}) {
    std::stringstream first;
    write_sessions(first, c, format);
    const auto parsed = parse_sessions(first, format);
    ASSERT_EQ(parsed.sessions.size(), 2u) << to_string(format);
    EXPECT_EQ(parsed.sessions, c.sessions) << to_string(format);
    std::stringstream second;
    write_sessions(second, parsed, format);
    EXPECT_EQ(first.str(), second.str());
  }
}

TEST(PrimaryFilters, ShortSessionsDroppedBeforeCounting) {
  Corpus c;
  for (int i = 0; i < 12; ++i) c.sessions.push_back(session("a" + std::to_string(i), "A", i < 2 ? 80 : 120));
  for (int i = 0; i < 9; ++i) c.sessions.push_back(session("b" + std::to_string(i), "B", 200));
  const auto out = apply_primary_filters(c);
  EXPECT_EQ(out.sessions.size(), 10u);
  for (const auto& s : out.sessions) EXPECT_EQ(*s.ev_label, "A");
}

TEST(PrimaryFilters, QualifyingCorpusUnchanged) {
  Corpus c;
  for (int i = 0; i < 10; ++i) c.sessions.push_back(session("a" + std::to_string(i), "A", 100));
  EXPECT_EQ(apply_primary_filters(c).sessions, c.sessions);
}

TEST(PrimaryFilters, Idempotent) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_corpus(rng);
    const auto once = apply_primary_filters(c);
    EXPECT_EQ(apply_primary_filters(once).sessions, once.sessions);
  }
}

TEST(DatasetSummary, HistogramAndMean) {
  Corpus c;
  int id = 0;
  for (auto [ev, n] : {std::pair{"A", 5}, {"B", 7}, {"C", 30}})
    for (int i = 0; i < n; ++i) c.sessions.push_back(session(std::to_string(id++), ev, 100));
  const auto s = dataset_summary(c, 25);
  EXPECT_EQ(s.ev_counts, (std::vector<std::size_t>{2, 1}));
  EXPECT_DOUBLE_EQ(s.mean_sessions_per_ev, 14.0);
  EXPECT_EQ(s.n_evs, 3u);
  EXPECT_EQ(s.n_sessions, 42u);
}

TEST(DatasetSummary, EmptyAndSingleEv) {
  const auto empty = dataset_summary(Corpus{}, 10);
  EXPECT_EQ(empty.n_evs, 0u);
  EXPECT_EQ(empty.n_sessions, 0u);
  EXPECT_EQ(empty.mean_sessions_per_ev, 0.0);
  Corpus c;
  for (int i = 0; i < 50; ++i) c.sessions.push_back(session(std::to_string(i), "A", 100));
  EXPECT_DOUBLE_EQ(dataset_summary(c, 10).mean_sessions_per_ev, 50.0);
  expect_error([&] { dataset_summary(c, 0); }, ErrorKind::config);
}

TEST(DatasetSummary, TotalsMatchDirectCounts) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_corpus(rng);
    const std::size_t w = 1 + rng() % 10;
    const auto s = dataset_summary(c, w);
    std::map<std::string, std::size_t> direct;
    std::size_t labelled = 0;
    for (const auto& x : c.sessions)
      if (x.ev_label) {
        ++direct[*x.ev_label];
        ++labelled;
      }
    EXPECT_EQ(s.n_sessions, labelled);
    EXPECT_EQ(s.n_evs, direct.size());
    std::size_t binned = 0;
    for (auto n : s.ev_counts) binned += n;
    EXPECT_EQ(binned, direct.size());
    for (const auto& [ev, n] : direct) EXPECT_GT(s.ev_counts.at(n / w), 0u);
  }
}
