#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "evprof/experiments.hpp"
#include "evprof/synth.hpp"
#include "util.hpp"

using namespace evprof;
using testutil::expect_error;

namespace {

bool same_signature(const SyntheticSignature& a, const SyntheticSignature& b) {
  return a.pilot_level == b.pilot_level && a.cc_gap == b.cc_gap && a.decay_rate == b.decay_rate &&
         a.spike_period == b.spike_period && a.spike_amplitude == b.spike_amplitude &&
         a.noise_sigma == b.noise_sigma && a.cv_onset_fraction == b.cv_onset_fraction;
}

std::string serialize(const Corpus& c) {
  std::ostringstream out;
  write_sessions(out, c, SessionFormat::acn_json);
  return out.str();
}

double mean_accuracy(Separation sep) {
  double total = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SynthOptions opt;
    opt.separation = sep;
    const auto corpus = generate_corpus(10, 20, seed, opt);
    const auto seg = segment_corpus(corpus, FilterParams{}, TailParams{});
    const auto fm = featurize(seg.segments);
    const auto split = learn::stratified_split(fm.labels, 0.25, seed);
    const auto train = fm.select_rows(split.train), test = fm.select_rows(split.test);
    const auto sel = fit_selection(train, SelectionConfig{40, Scorer::chi2});
    const auto model = learn::train(learn::parse_spec(learn::Family::random_forest, "n_estimators=30"),
                                    transform(train, sel), seed);
    const auto pred = learn::predict_selected(model, transform(test, sel).values);
    total += learn::evaluate(test.labels, pred, learn::Mode::multiclass).accuracy;
  }
  return total / 3.0;
}

}  // namespace

TEST(Signature, DeterministicPerSeedAndIndex) {
  for (auto sep : {Separation::well_separated, Separation::overlapping}) {
    EXPECT_TRUE(same_signature(generate_signature(4, 11, sep), generate_signature(4, 11, sep)));
    EXPECT_FALSE(same_signature(generate_signature(4, 11, sep), generate_signature(5, 11, sep)));
  }
}

TEST(Signature, WellSeparatedDecayRatesSpacedByGridStep) {
  std::vector<double> rates;
  for (std::size_t ev = 0; ev < 25; ++ev) rates.push_back(generate_signature(ev, 3, Separation::well_separated).decay_rate);
  for (std::size_t i = 0; i < rates.size(); ++i)
    for (std::size_t j = i + 1; j < rates.size(); ++j)
      EXPECT_GE(std::abs(rates[i] - rates[j]), SignatureGrid::decay_step - 1e-12);
}

TEST(Signature, OverlappingModeHasCloseGaps) {
  std::vector<SyntheticSignature> sigs;
  for (std::size_t ev = 0; ev < 100; ++ev) sigs.push_back(generate_signature(ev, 3, Separation::overlapping));
  bool close = false;
  for (std::size_t i = 0; i < sigs.size() && !close; ++i)
    for (std::size_t j = i + 1; j < sigs.size() && !close; ++j)
      close = std::abs(sigs[i].cc_gap - sigs[j].cc_gap) <= sigs[i].noise_sigma;
  EXPECT_TRUE(close);
}

TEST(Session, ShortLengthRejected) {
  const auto sig = generate_signature(0, 1, Separation::well_separated);
  expect_error([&] { generate_session(sig, 1, 119, 0.0); }, ErrorKind::parameter);
}

TEST(Session, NoiselessShapeIsExact) {
  const auto sig = generate_signature(2, 1, Separation::well_separated);
  SynthOptions opt;
  opt.noise_sigma = 0;
  opt.session_jitter = 0;
  const auto p = generate_planted_session(sig, 5, 600, opt);
  const auto& c = p.session.current.values;
  const double plateau = sig.pilot_level - sig.cc_gap;
  for (std::size_t t = 0; t < p.cv_onset; ++t) ASSERT_EQ(c[t], plateau);
  for (std::size_t t = p.zero_onset; t < c.size(); ++t) ASSERT_EQ(c[t], 0.0);
  EXPECT_LT(p.cv_onset, p.zero_onset);
  EXPECT_EQ(c[p.cv_onset], plateau);
  EXPECT_NEAR(c[p.cv_onset + 1], plateau * std::exp(-sig.decay_rate), 1e-12);
  for (double v : p.session.pilot.values) EXPECT_EQ(v, sig.pilot_level);
}

TEST(Session, NoiselessSessionsDifferOnlyByLength) {
  const auto sig = generate_signature(7, 2, Separation::well_separated);
  SynthOptions opt;
  opt.noise_sigma = 0;
  opt.session_jitter = 0;
  const auto a = generate_planted_session(sig, 1, 500, opt), b = generate_planted_session(sig, 99, 500, opt);
  EXPECT_EQ(a.session.current, b.session.current);
  const auto longer = generate_planted_session(sig, 1, 700, opt);
  EXPECT_NE(longer.cv_onset, a.cv_onset);
  const auto& x = a.session.current.values;
  const auto& y = longer.session.current.values;
  for (std::size_t k = 0; a.cv_onset + k < a.zero_onset; ++k) EXPECT_EQ(x[a.cv_onset + k], y[longer.cv_onset + k]);
}

TEST(Session, SeedsChangeNoiseNotLevel) {
  const auto sig = generate_signature(1, 4, Separation::well_separated);
  const auto a = generate_planted_session(sig, 1, 500), b = generate_planted_session(sig, 2, 500);
  EXPECT_NE(a.session.current, b.session.current);
  auto median_plateau = [](const PlantedSession& p) {
    std::vector<double> v(p.session.current.values.begin(), p.session.current.values.begin() + static_cast<long>(p.cv_onset));
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  EXPECT_NEAR(median_plateau(a), median_plateau(b), 0.5);
}

TEST(Corpus, ArithmeticAndByteIdenticalRegeneration) {
  const auto c = generate_corpus(25, 50, 8);
  EXPECT_EQ(c.sessions.size(), 1250u);
  std::set<std::string> labels, ids;
  for (const auto& s : c.sessions) {
    labels.insert(*s.ev_label);
    ids.insert(s.session_id);
  }
  EXPECT_EQ(labels.size(), 25u);
  EXPECT_EQ(ids.size(), 1250u);
  EXPECT_EQ(serialize(c), serialize(generate_corpus(25, 50, 8)));
  EXPECT_NE(serialize(c), serialize(generate_corpus(25, 50, 9)));
}

TEST(Corpus, TruncationRejectedAtAboutTheRequestedRate) {
  SynthOptions opt;
  opt.truncate_prob = 0.1;
  const auto c = generate_corpus(25, 50, 12, opt);
  const auto res = segment_corpus(c, FilterParams{}, TailParams{});
  // 1250 draws at p = 0.1: mean 125, sd ~10.6; allow four sd.
  EXPECT_GE(res.rejects.size(), 83u);
  EXPECT_LE(res.rejects.size(), 167u);
}

TEST(Corpus, WellSeparatedAtLeastAsAccurateAsOverlapping) {
  EXPECT_GE(mean_accuracy(Separation::well_separated), mean_accuracy(Separation::overlapping));
}
