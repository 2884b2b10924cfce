// include/xvec/speaker_sim.hpp

// Copyright 2026  xvec authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xvec/rng.hpp"
#include "xvec/wave.hpp"

namespace xvec {

/// Synthetic speaker: a glottal-like pulse train at pitch_hz shaped by a
/// small set of fixed resonances plus a spectral tilt.  Speakers differ in
/// pitch and resonance layout; utterances of one speaker differ by jitter
/// whose magnitude grows with corpus difficulty.
struct Resonance {
  double center_hz;
  double bandwidth_hz;
  double gain;
};

struct SpeakerModel {
  std::string id;
  std::vector<Resonance> resonances;
  double pitch_hz = 120.0;
  double spectral_tilt = 0.3;
};

struct CorpusConfig {
  int n_speakers = 200;
  int utts_per_speaker = 30;
  double dur_min_s = 1.8;
  double dur_max_s = 2.6;
  double difficulty = 0.3;  // in [0, 1]
  int sample_rate = 8000;

  void validate() const {
    if (n_speakers < 2) throw std::invalid_argument("need >= 2 speakers");
    if (utts_per_speaker < 1) throw std::invalid_argument("need >= 1 utterance");
    if (!(dur_min_s > 0.0 && dur_max_s >= dur_min_s))
      throw std::invalid_argument("degenerate duration range");
    if (difficulty < 0.0 || difficulty > 1.0)
      throw std::invalid_argument("difficulty must be in [0, 1]");
  }
};

inline std::string speaker_id_str(int speaker) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%04d", speaker);
  return buf;
}

inline std::string utt_id_str(int speaker, int utt) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%04d_utt%04d", speaker, utt);
  return buf;
}

/// Speaker identity is a pure function of (seed, index).
inline SpeakerModel sample_speaker(int index, const CorpusConfig& cfg,
                                   uint64_t seed) {
  Rng rng = Rng::derive(seed, "speaker", static_cast<uint64_t>(index));
  SpeakerModel spk;
  spk.id = speaker_id_str(index);
  spk.pitch_hz = rng.uniform(85.0, 255.0);
  const double nyquist = cfg.sample_rate / 2.0;
  const double bands[4][2] = {
      {250.0, 900.0}, {950.0, 2400.0}, {2500.0, 0.93 * nyquist}, {0, 0}};
  for (int f = 0; f < 3; ++f) {
    Resonance r;
    r.center_hz = rng.uniform(bands[f][0], std::min(bands[f][1], 0.95 * nyquist));
    r.bandwidth_hz = rng.uniform(60.0, 180.0);
    r.gain = rng.uniform(0.7, 1.3);
    spk.resonances.push_back(r);
  }
  spk.spectral_tilt = rng.uniform(0.0, 0.7);
  return spk;
}

namespace detail {

/// Two-pole resonator section, applied in place.
inline void apply_resonator(std::vector<double>& x, double center_hz,
                            double bandwidth_hz, double gain, int sample_rate) {
  const double r = std::exp(-M_PI * bandwidth_hz / sample_rate);
  const double w0 = 2.0 * M_PI * center_hz / sample_rate;
  const double a1 = -2.0 * r * std::cos(w0);
  const double a2 = r * r;
  const double b0 = gain * (1.0 - r);  // keeps the section gain bounded
  double y1 = 0.0, y2 = 0.0;
  for (double& s : x) {
    const double y = b0 * s - a1 * y1 - a2 * y2;
    y2 = y1;
    y1 = y;
    s = y;
  }
}

}  // namespace detail

/// Deterministic per-utterance synthesis.  Difficulty drives both the
/// additive noise level and the per-utterance drift of pitch/resonances.
inline WaveSignal synth_utterance(const SpeakerModel& spk,
                                  const CorpusConfig& cfg, uint64_t seed,
                                  int speaker_index, int utt_index) {
  Rng rng = Rng::derive(seed, "utt", static_cast<uint64_t>(speaker_index),
                        static_cast<uint64_t>(utt_index));
  const double dur = rng.uniform(cfg.dur_min_s, cfg.dur_max_s);
  const double lead_s = rng.uniform(0.06, 0.22);
  const double trail_s = rng.uniform(0.06, 0.22);
  const int sr = cfg.sample_rate;
  const size_t n_voiced = static_cast<size_t>(std::lround(dur * sr));
  const size_t n_lead = static_cast<size_t>(std::lround(lead_s * sr));
  const size_t n_trail = static_cast<size_t>(std::lround(trail_s * sr));

  const double pitch_jitter = 0.02 + 0.08 * cfg.difficulty;
  const double formant_jitter = 0.01 + 0.05 * cfg.difficulty;
  const double noise_level = 0.45 * cfg.difficulty;

  const double pitch = spk.pitch_hz * (1.0 + rng.uniform(-pitch_jitter, pitch_jitter));

  // Impulse-train excitation with mild period/amplitude modulation.
  std::vector<double> voiced(n_voiced, 0.0);
  double pos = rng.uniform(0.0, sr / pitch);
  while (pos < static_cast<double>(n_voiced)) {
    const size_t idx = static_cast<size_t>(pos);
    voiced[idx] = rng.uniform(0.8, 1.2);
    pos += (sr / pitch) * (1.0 + rng.uniform(-0.03, 0.03));
  }
  for (const auto& res : spk.resonances) {
    const double center = res.center_hz * (1.0 + rng.uniform(-formant_jitter, formant_jitter));
    detail::apply_resonator(voiced, std::min(center, 0.97 * sr / 2.0),
                            res.bandwidth_hz, res.gain, sr);
  }
  // Spectral tilt as a first-difference mix.
  if (spk.spectral_tilt > 0.0) {
    double prev = 0.0;
    for (double& s : voiced) {
      const double cur = s;
      s = s - spk.spectral_tilt * prev;
      prev = cur;
    }
  }
  // Additive noise relative to the voiced RMS.
  if (noise_level > 0.0) {
    double ms = 0.0;
    for (double s : voiced) ms += s * s;
    const double rms = std::sqrt(ms / std::max<size_t>(1, voiced.size()));
    for (double& s : voiced) s += noise_level * rms * rng.gaussian();
  }

  WaveSignal wave;
  wave.sample_rate = sr;
  wave.samples.assign(n_lead, 0.0);
  wave.samples.insert(wave.samples.end(), voiced.begin(), voiced.end());
  wave.samples.insert(wave.samples.end(), n_trail, 0.0);

  const double peak = wave.peak();
  if (peak > 0.0) {
    const double scale = 0.5 / peak;
    for (double& s : wave.samples) s *= scale;
  }
  return wave;
}

struct CorpusUtterance {
  int speaker_index;
  int utt_index;
  std::string utt_id;
  std::string speaker_id;
};

/// Streams the corpus one utterance at a time so callers never hold all the
/// audio in memory.
inline void for_each_utterance(
    const CorpusConfig& cfg, uint64_t seed,
    const std::function<void(const CorpusUtterance&, const WaveSignal&)>& fn) {
  cfg.validate();
  for (int s = 0; s < cfg.n_speakers; ++s) {
    const SpeakerModel spk = sample_speaker(s, cfg, seed);
    for (int u = 0; u < cfg.utts_per_speaker; ++u) {
      CorpusUtterance info{s, u, utt_id_str(s, u), spk.id};
      fn(info, synth_utterance(spk, cfg, seed, s, u));
    }
  }
}

/// Convenience collector for small corpora (tests).
inline std::vector<std::pair<std::string, WaveSignal>> generate_corpus(
    const CorpusConfig& cfg, uint64_t seed) {
  std::vector<std::pair<std::string, WaveSignal>> out;
  out.reserve(static_cast<size_t>(cfg.n_speakers) * cfg.utts_per_speaker);
  for_each_utterance(cfg, seed,
                     [&](const CorpusUtterance& info, const WaveSignal& wave) {
                       out.emplace_back(info.speaker_id, wave);
                     });
  return out;
}

}  // namespace xvec
