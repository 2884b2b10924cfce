// include/xvec/augment.hpp

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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "xvec/fft.hpp"
#include "xvec/rng.hpp"
#include "xvec/wave.hpp"

namespace xvec {

/// Room impulse response.  taps[0] is the direct path.
struct Rir {
  std::vector<double> taps;
  int sample_rate = 8000;
};

struct SnrSpec {
  double low_db = 0.0;
  double high_db = 0.0;

  void validate() const {
    if (low_db > high_db) throw std::invalid_argument("snr low_db > high_db");
  }
  double draw(Rng& rng) const {
    return low_db == high_db ? low_db : rng.uniform(low_db, high_db);
  }
};

namespace detail {

/// Wraps (tiles) or truncates `src` to exactly n samples.  Interferers are
/// tiled rather than zero-padded so the measured power stays meaningful.
inline std::vector<double> tile_to_length(const std::vector<double>& src,
                                          size_t n) {
  if (src.empty()) throw std::invalid_argument("cannot tile empty signal");
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = src[i % src.size()];
  return out;
}

inline double mean_square(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double s : v) acc += s * s;
  return acc / v.size();
}

}  // namespace detail

/// Adds `interferer` (tiled/truncated to the signal length) at the requested
/// SNR.  The gain is g = sqrt(P_s / (P_i * 10^(snr/10))) with P the mean
/// square amplitude, so the realized component SNR equals snr_db exactly.
inline WaveSignal mix_at_snr(const WaveSignal& signal,
                             const WaveSignal& interferer, double snr_db) {
  if (signal.samples.empty() || interferer.samples.empty())
    throw std::invalid_argument("empty signal");
  if (signal.sample_rate != interferer.sample_rate)
    throw std::invalid_argument("sample rate mismatch");
  const double p_s = signal.power();
  if (p_s <= 0.0) throw std::runtime_error("silent signal");
  auto tiled = detail::tile_to_length(interferer.samples, signal.samples.size());
  const double p_i = detail::mean_square(tiled);
  if (p_i <= 0.0) throw std::runtime_error("silent interferer");
  const double gain = std::sqrt(p_s / (p_i * std::pow(10.0, snr_db / 10.0)));
  WaveSignal out = signal;
  for (size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] += gain * tiled[i];
  return out;
}

/// Babble: sums k randomly chosen pool signals (without replacement), then
/// mixes the sum at an SNR drawn uniformly from `snr`.  The SNR is measured
/// against the summed babble, not each component.
inline WaveSignal make_babble(const WaveSignal& signal,
                              const std::vector<WaveSignal>& speech_pool,
                              int k, const SnrSpec& snr, Rng& rng) {
  snr.validate();
  if (speech_pool.empty()) throw std::invalid_argument("empty speech pool");
  if (k < 1 || static_cast<size_t>(k) > speech_pool.size())
    throw std::invalid_argument("babble k out of range");
  std::vector<size_t> order(speech_pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  WaveSignal babble;
  babble.sample_rate = signal.sample_rate;
  babble.samples.assign(signal.samples.size(), 0.0);
  for (int j = 0; j < k; ++j) {
    const auto& src = speech_pool[order[static_cast<size_t>(j)]];
    if (src.sample_rate != signal.sample_rate)
      throw std::invalid_argument("sample rate mismatch in pool");
    auto tiled = detail::tile_to_length(src.samples, signal.samples.size());
    for (size_t i = 0; i < tiled.size(); ++i) babble.samples[i] += tiled[i];
  }
  return mix_at_snr(signal, babble, snr.draw(rng));
}

/// Places a fresh pool noise segment at every interval boundary.  Each
/// segment gets its own SNR draw, measured against the full-signal power.
inline WaveSignal add_interval_noise(const WaveSignal& signal,
                                     const std::vector<WaveSignal>& noise_pool,
                                     const SnrSpec& snr, double interval_s,
                                     Rng& rng) {
  snr.validate();
  if (noise_pool.empty()) throw std::invalid_argument("empty noise pool");
  if (interval_s <= 0.0) throw std::invalid_argument("interval must be > 0");
  if (signal.samples.empty()) throw std::invalid_argument("empty signal");
  const double p_s = signal.power();
  if (p_s <= 0.0) throw std::runtime_error("silent signal");

  WaveSignal out = signal;
  const size_t interval =
      std::max<size_t>(1, static_cast<size_t>(std::lround(interval_s * signal.sample_rate)));
  for (size_t start = 0; start < out.samples.size(); start += interval) {
    const size_t len = std::min(interval, out.samples.size() - start);
    const auto& src =
        noise_pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(noise_pool.size()) - 1))];
    if (src.sample_rate != signal.sample_rate)
      throw std::invalid_argument("sample rate mismatch in pool");
    auto seg = detail::tile_to_length(src.samples, len);
    const double p_n = detail::mean_square(seg);
    if (p_n <= 0.0) throw std::runtime_error("silent interferer");
    const double snr_db = snr.draw(rng);
    const double gain = std::sqrt(p_s / (p_n * std::pow(10.0, snr_db / 10.0)));
    for (size_t i = 0; i < len; ++i) out.samples[start + i] += gain * seg[i];
  }
  return out;
}

/// Full convolution with the RIR, truncated to the input length and
/// renormalized to the input's peak.  Short kernels convolve directly;
/// longer ones go through the frequency domain.
inline WaveSignal reverberate(const WaveSignal& signal, const Rir& rir) {
  if (rir.taps.empty()) throw std::invalid_argument("empty RIR");
  if (rir.sample_rate != signal.sample_rate)
    throw std::invalid_argument("sample rate mismatch");
  if (signal.samples.empty()) throw std::invalid_argument("empty signal");

  const size_t n = signal.samples.size();
  const size_t m = rir.taps.size();
  WaveSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(n);
  if (m <= 128) {
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const size_t kmax = std::min(m - 1, i);
      for (size_t k = 0; k <= kmax; ++k) acc += rir.taps[k] * signal.samples[i - k];
      out.samples[i] = acc;
    }
  } else {
    const size_t fft_n = next_pow2(n + m - 1);
    std::vector<std::complex<double>> a(fft_n, {0.0, 0.0}), b(fft_n, {0.0, 0.0});
    for (size_t i = 0; i < n; ++i) a[i] = {signal.samples[i], 0.0};
    for (size_t i = 0; i < m; ++i) b[i] = {rir.taps[i], 0.0};
    fft_inplace(a, false);
    fft_inplace(b, false);
    for (size_t i = 0; i < fft_n; ++i) a[i] *= b[i];
    fft_inplace(a, true);
    for (size_t i = 0; i < n; ++i) out.samples[i] = a[i].real();
  }

  const double peak_in = signal.peak();
  const double peak_out = out.peak();
  if (peak_in > 0.0 && peak_out > 0.0) {
    const double scale = peak_in / peak_out;
    for (double& s : out.samples) s *= scale;
  }
  return out;
}

/// Synthetic RIR: unit direct-path tap followed by white noise shaped by an
/// exponential envelope that reaches -60 dB energy at decay_time_s.
inline Rir synth_rir(double decay_time_s, double length_s, int sample_rate,
                     Rng& rng) {
  if (decay_time_s <= 0.0 || length_s <= 0.0 || sample_rate <= 0)
    throw std::invalid_argument("rir durations must be > 0");
  Rir rir;
  rir.sample_rate = sample_rate;
  const size_t n = std::max<size_t>(
      1, static_cast<size_t>(std::lround(length_s * sample_rate)));
  rir.taps.resize(n);
  rir.taps[0] = 1.0;
  // exp(-6.91 * t / T) is amplitude 1e-3 (energy -60 dB) at t = T.
  for (size_t i = 1; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    rir.taps[i] = 0.3 * rng.gaussian() * std::exp(-6.91 * t / decay_time_s);
  }
  return rir;
}

/// Music-like interferer: a few slowly changing tones with harmonics.
/// Stands in for a real music corpus.
inline WaveSignal synth_music_clip(double dur_s, int sample_rate, Rng& rng) {
  WaveSignal out;
  out.sample_rate = sample_rate;
  const size_t n = static_cast<size_t>(std::lround(dur_s * sample_rate));
  out.samples.assign(n, 0.0);
  const double note_s = 0.4;
  const size_t note_len = static_cast<size_t>(note_s * sample_rate);
  for (size_t start = 0; start < n; start += note_len) {
    const double f0 = 110.0 * std::pow(2.0, rng.uniform_int(0, 24) / 12.0);
    const size_t len = std::min(note_len, n - start);
    for (int h = 1; h <= 3; ++h) {
      const double amp = 0.3 / h;
      const double w = 2.0 * M_PI * f0 * h / sample_rate;
      if (f0 * h >= sample_rate / 2.0) continue;
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (size_t i = 0; i < len; ++i)
        out.samples[start + i] += amp * std::sin(w * static_cast<double>(i) + phase);
    }
  }
  return out;
}

/// Colored-noise interferer (one-pole filtered white noise).
inline WaveSignal synth_noise_clip(double dur_s, int sample_rate, Rng& rng) {
  WaveSignal out;
  out.sample_rate = sample_rate;
  const size_t n = static_cast<size_t>(std::lround(dur_s * sample_rate));
  out.samples.resize(n);
  const double pole = rng.uniform(0.0, 0.9);
  double prev = 0.0;
  for (size_t i = 0; i < n; ++i) {
    prev = pole * prev + (1.0 - pole) * rng.gaussian();
    out.samples[i] = 0.3 * prev;
  }
  return out;
}

}  // namespace xvec
