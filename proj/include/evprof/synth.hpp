#pragma once

// Synthetic CC/CV charging sessions with per-EV planted signatures: a flat CC
// plateau below the pilot level, an exponential CV decay carrying periodic
// single-sample spikes, then zeros once the decay falls under the termination
// current.

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "ingest.hpp"
#include "random.hpp"

namespace evprof {

enum class Separation { well_separated, overlapping };

inline Separation parse_separation(std::string_view s) {
  if (s == "well-separated") return Separation::well_separated;
  if (s == "overlapping") return Separation::overlapping;
  throw Error(ErrorKind::config, "unknown separation '" + std::string(s) + "'");
}

struct SyntheticSignature {
  double pilot_level = 32.0;  // A
  double cc_gap = 1.0;        // pilot minus CC current, A
  double decay_rate = 0.07;   // per sample
  std::size_t spike_period = 9;
  double spike_amplitude = 1.5;
  double noise_sigma = 0.0;
  double cv_onset_fraction = 0.7;

  friend bool operator==(const SyntheticSignature&, const SyntheticSignature&) = default;
};

// Parameter grids for well-separated signatures. Decay and gap indices advance
// together; 25 and 8 are coprime, so the first 200 EVs get distinct (decay, gap)
// pairs and any 25 consecutive EVs have pairwise distinct decay rates.
struct SignatureGrid {
  static constexpr std::size_t decay_levels = 25;
  static constexpr double decay_lo = 0.06;
  static constexpr double decay_step = 0.0015;
  static constexpr std::size_t gap_levels = 8;
  static constexpr double gap_lo = 0.75;
  static constexpr double gap_step = 0.5;
  static constexpr double pilots[2] = {24.0, 32.0};
};

inline SyntheticSignature generate_signature(std::size_t ev_index, std::uint64_t seed,
                                             Separation separation) {
  Rng rng(derive_seed(seed, "signature", static_cast<std::uint64_t>(ev_index)));
  SyntheticSignature sig;
  if (separation == Separation::well_separated) {
    using G = SignatureGrid;
    const std::size_t decay_idx = ev_index % G::decay_levels;
    const std::size_t gap_idx = ev_index % G::gap_levels;
    const std::size_t pilot_idx = (ev_index / (G::decay_levels * G::gap_levels)) % 2;
    sig.decay_rate = G::decay_lo + G::decay_step * static_cast<double>(decay_idx);
    sig.cc_gap = G::gap_lo + G::gap_step * static_cast<double>(gap_idx);
    sig.pilot_level = G::pilots[pilot_idx];
    sig.spike_period = 6 + (ev_index * 7) % 9;
    sig.spike_amplitude = 1.0 + 0.5 * static_cast<double>((ev_index * 3) % 5);
    sig.noise_sigma = 0.1;
    sig.cv_onset_fraction = 0.6 + 0.2 * uniform01(rng);
  } else {
    sig.decay_rate = uniform_real(rng, SignatureGrid::decay_lo,
                                  SignatureGrid::decay_lo + SignatureGrid::decay_step * 24.0);
    sig.cc_gap = uniform_real(rng, 0.75, 2.75);
    sig.pilot_level = SignatureGrid::pilots[uniform_below(rng, 2)];
    sig.spike_period = 6 + static_cast<std::size_t>(uniform_below(rng, 9));
    sig.spike_amplitude = uniform_real(rng, 1.0, 3.0);
    sig.noise_sigma = 0.1;
    sig.cv_onset_fraction = uniform_real(rng, 0.6, 0.8);
  }
  return sig;
}

struct SynthOptions {
  Separation separation = Separation::well_separated;
  std::size_t min_length = 300;
  std::size_t max_length = 1200;
  double truncate_prob = 0.0;
  double termination_current = 1.8;  // decay below this drops to zero
  double noise_sigma = -1.0;         // >= 0 overrides the signature's noise
  double session_jitter = 0.02;      // relative per-session spread of gap and decay
};

// Ground truth for one generated session.
struct PlantedSession {
  ChargingSession session;
  std::size_t cv_onset = 0;
  std::size_t zero_onset = 0;  // first index of the terminal zeros (== length if none)
  bool truncated = false;
};

inline PlantedSession generate_planted_session(const SyntheticSignature& sig,
                                               std::uint64_t session_seed, std::size_t length,
                                               const SynthOptions& options = {}) {
  if (length < 120) throw Error(ErrorKind::parameter, "session length must be >= 120");
  Rng rng(session_seed);
  const double sigma = options.noise_sigma >= 0.0 ? options.noise_sigma : sig.noise_sigma;
  const double jitter_gap = options.session_jitter > 0.0
                                ? 1.0 + options.session_jitter * standard_normal(rng)
                                : 1.0;
  const double jitter_decay = options.session_jitter > 0.0
                                  ? 1.0 + options.session_jitter * standard_normal(rng)
                                  : 1.0;
  const double plateau = sig.pilot_level - sig.cc_gap * jitter_gap;
  const double rate = sig.decay_rate * jitter_decay;

  PlantedSession out;
  out.cv_onset = static_cast<std::size_t>(std::floor(sig.cv_onset_fraction * static_cast<double>(length)));
  std::vector<double> current(length, 0.0);
  std::size_t t = 0;
  for (; t < out.cv_onset; ++t) current[t] = std::max(0.0, plateau + sigma * standard_normal(rng));
  out.zero_onset = length;
  for (; t < length; ++t) {
    const std::size_t k = t - out.cv_onset;
    const double base = plateau * std::exp(-rate * static_cast<double>(k));
    if (base < options.termination_current) {
      out.zero_onset = t;
      break;
    }
    double v = base + sigma * standard_normal(rng);
    if (k > 0 && k % sig.spike_period == 0 && base >= 2.0 * options.termination_current)
      v += sig.spike_amplitude;
    current[t] = std::max(0.0, v);
  }
  std::size_t final_length = length;
  if (options.truncate_prob > 0.0 && uniform01(rng) < options.truncate_prob) {
    const std::size_t lo = out.cv_onset / 2;
    final_length = lo + static_cast<std::size_t>(uniform_below(rng, out.cv_onset - lo));
    out.truncated = true;
    current.resize(final_length);
    out.zero_onset = final_length;
  }
  out.session.current = TimeSeries{std::move(current), 1.0};
  out.session.pilot = TimeSeries{std::vector<double>(final_length, sig.pilot_level), 1.0};
  return out;
}

inline ChargingSession generate_session(const SyntheticSignature& sig, std::uint64_t session_seed,
                                        std::size_t length, double truncate_prob) {
  SynthOptions options;
  options.truncate_prob = truncate_prob;
  return generate_planted_session(sig, session_seed, length, options).session;
}

inline std::string synthetic_label(std::size_t ev) { return "SYN-" + std::to_string(ev); }

inline Corpus generate_corpus(std::size_t n_evs, std::size_t sessions_per_ev, std::uint64_t seed,
                              const SynthOptions& options = {}) {
  if (n_evs == 0 || sessions_per_ev == 0)
    throw Error(ErrorKind::parameter, "need at least one EV and one session");
  if (options.min_length < 120 || options.max_length < options.min_length)
    throw Error(ErrorKind::parameter, "bad session length bounds");
  Corpus corpus;
  corpus.provenance = "synth seed=" + std::to_string(seed);
  corpus.sessions.reserve(n_evs * sessions_per_ev);
  for (std::size_t ev = 0; ev < n_evs; ++ev) {
    const auto sig = generate_signature(ev, seed, options.separation);
    for (std::size_t j = 0; j < sessions_per_ev; ++j) {
      const std::uint64_t session_seed =
          derive_seed(seed, "session", static_cast<std::uint64_t>(ev), static_cast<std::uint64_t>(j));
      Rng len_rng(derive_seed(session_seed, "length"));
      const std::size_t length =
          options.min_length +
          static_cast<std::size_t>(uniform_below(len_rng, options.max_length - options.min_length + 1));
      auto planted = generate_planted_session(sig, session_seed, length, options);
      auto& s = planted.session;
      s.session_id = synthetic_label(ev) + "-" + std::to_string(j);
      s.ev_label = synthetic_label(ev);
      s.station_id = "SYN-ST-" + std::to_string((ev + j) % 54);
      char stamp[32];
      std::snprintf(stamp, sizeof stamp, "2019-%02zu-%02zuT%02zu:00:00Z", (j / 28) % 12 + 1,
                    j % 28 + 1, ev % 24);
      s.connect_time = stamp;
      corpus.sessions.push_back(std::move(s));
    }
  }
  return corpus;
}

}  // namespace evprof
