// tests/test_augment.cpp

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

#include <catch2/catch_amalgamated.hpp>

#include "xvec/augment.hpp"
#include "xvec/rng.hpp"

using namespace xvec;

namespace {

WaveSignal random_wave(size_t n, uint64_t seed, int sr = 8000, double amp = 0.2) {
  WaveSignal w;
  w.sample_rate = sr;
  w.samples.resize(n);
  Rng rng(seed);
  for (auto& s : w.samples) s = amp * rng.gaussian();
  return w;
}

double measured_snr_db(const WaveSignal& clean, const WaveSignal& mix) {
  WaveSignal diff = clean;
  for (size_t i = 0; i < diff.samples.size(); ++i)
    diff.samples[i] = mix.samples[i] - clean.samples[i];
  return 10.0 * std::log10(clean.power() / diff.power());
}

}  // namespace

TEST_CASE("mix_at_snr gain and measured SNR") {
  // Equal powers at 0 dB: gain 1, output is the plain sum.
  WaveSignal s = random_wave(4000, 1);
  WaveSignal i = random_wave(4000, 2);
  const double scale = std::sqrt(s.power() / i.power());
  for (auto& x : i.samples) x *= scale;
  const WaveSignal mix0 = mix_at_snr(s, i, 0.0);
  for (size_t k = 0; k < s.samples.size(); ++k)
    REQUIRE(mix0.samples[k] ==
            Catch::Approx(s.samples[k] + i.samples[k]).margin(1e-12));

  // Very high SNR leaves almost nothing of the interferer.
  const WaveSignal mix100 = mix_at_snr(s, i, 100.0);
  WaveSignal residual = s;
  for (size_t k = 0; k < s.samples.size(); ++k)
    residual.samples[k] = mix100.samples[k] - s.samples[k];
  REQUIRE(std::sqrt(residual.power() / i.power()) <= 1e-5 + 1e-12);

  // Direct power-ratio oracle at 13 dB.
  const WaveSignal mix13 = mix_at_snr(s, random_wave(900, 3), 13.0);
  REQUIRE(measured_snr_db(s, mix13) == Catch::Approx(13.0).margin(0.01));
}

TEST_CASE("mix_at_snr holds the SNR contract across [-30, 60] dB") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    WaveSignal s = random_wave(3000 + 100 * trial, 100 + trial);
    WaveSignal i = random_wave(1000 + 37 * trial, 200 + trial);
    const double snr = rng.uniform(-30.0, 60.0);
    const WaveSignal mix = mix_at_snr(s, i, snr);
    REQUIRE(measured_snr_db(s, mix) == Catch::Approx(snr).margin(0.01));
    for (double x : mix.samples) REQUIRE(std::isfinite(x));
  }
}

TEST_CASE("mix_at_snr error paths") {
  WaveSignal s = random_wave(1000, 4);
  WaveSignal silent;
  silent.sample_rate = 8000;
  silent.samples.assign(1000, 0.0);
  REQUIRE_THROWS_WITH(mix_at_snr(s, silent, 10.0),
                      Catch::Matchers::ContainsSubstring("silent interferer"));
  REQUIRE_THROWS_WITH(mix_at_snr(silent, s, 10.0),
                      Catch::Matchers::ContainsSubstring("silent signal"));
}

TEST_CASE("make_babble") {
  WaveSignal s = random_wave(4000, 10);
  std::vector<WaveSignal> pool;
  for (int k = 0; k < 6; ++k) pool.push_back(random_wave(2500 + 100 * k, 20 + k));

  // Degenerate babble with a single-signal pool equals mix_at_snr.
  Rng r1(5);
  const WaveSignal one = make_babble(s, {pool[0]}, 1, {15.0, 15.0}, r1);
  const WaveSignal direct = mix_at_snr(s, pool[0], 15.0);
  for (size_t k = 0; k < s.samples.size(); ++k)
    REQUIRE(one.samples[k] == Catch::Approx(direct.samples[k]).margin(1e-12));

  // Deterministic given the seed.
  Rng ra(42), rb(42);
  const WaveSignal ba = make_babble(s, pool, 3, {13.0, 20.0}, ra);
  const WaveSignal bb = make_babble(s, pool, 3, {13.0, 20.0}, rb);
  REQUIRE(ba.samples == bb.samples);

  // The summed babble meets its SNR draw (power-ratio oracle).
  Rng rc(43);
  const WaveSignal mix = make_babble(s, pool, 4, {13.0, 13.0}, rc);
  REQUIRE(measured_snr_db(s, mix) == Catch::Approx(13.0).margin(0.01));

  REQUIRE_THROWS(make_babble(s, {}, 1, {10.0, 10.0}, r1));
  REQUIRE_THROWS(make_babble(s, pool, 9, {10.0, 10.0}, r1));
}

TEST_CASE("add_interval_noise placement and per-segment SNR") {
  std::vector<WaveSignal> pool;
  for (int k = 0; k < 4; ++k) pool.push_back(random_wave(1700 + 31 * k, 50 + k));

  // Shorter than one interval: exactly one placement.
  WaveSignal brief = random_wave(4000, 60);  // 0.5 s at 8 kHz
  Rng r0(1);
  const WaveSignal one = add_interval_noise(brief, pool, {5.0, 5.0}, 1.0, r0);
  REQUIRE(measured_snr_db(brief, one) == Catch::Approx(5.0).margin(0.01));

  // 3.5 s at 1 s intervals: 4 placements starting at 0, 1, 2, 3 s, each
  // meeting its own draw against the full-signal power.
  WaveSignal s = random_wave(28000, 61);
  Rng r1(2);
  const WaveSignal out = add_interval_noise(s, pool, {8.0, 8.0}, 1.0, r1);
  const double p_s = s.power();
  int placements = 0;
  for (size_t start = 0; start < s.samples.size(); start += 8000) {
    const size_t len = std::min<size_t>(8000, s.samples.size() - start);
    double p_seg = 0.0;
    bool nonzero = false;
    for (size_t k = 0; k < len; ++k) {
      const double d = out.samples[start + k] - s.samples[start + k];
      p_seg += d * d;
      nonzero |= d != 0.0;
    }
    REQUIRE(nonzero);
    ++placements;
    p_seg /= static_cast<double>(len);
    REQUIRE(10.0 * std::log10(p_s / p_seg) == Catch::Approx(8.0).margin(0.01));
  }
  REQUIRE(placements == 4);

  REQUIRE_THROWS(add_interval_noise(s, {}, {5.0, 5.0}, 1.0, r1));
  REQUIRE_THROWS(add_interval_noise(s, pool, {5.0, 5.0}, 0.0, r1));
}

TEST_CASE("reverberate identity, shift and the convolution oracle") {
  WaveSignal s = random_wave(5000, 70);

  Rir unit{{1.0}, 8000};
  const WaveSignal same = reverberate(s, unit);
  REQUIRE(same.samples == s.samples);

  // Delayed unit impulse shifts the signal.  Keep the peak early so the
  // truncation does not change it.
  WaveSignal peaked = s;
  peaked.samples[10] = 0.9;
  Rir delayed{{0.0, 0.0, 0.0, 1.0}, 8000};
  const WaveSignal shifted = reverberate(peaked, delayed);
  for (size_t k = 3; k < peaked.samples.size(); ++k)
    REQUIRE(shifted.samples[k] == Catch::Approx(peaked.samples[k - 3]).margin(1e-12));
  for (size_t k = 0; k < 3; ++k) REQUIRE(shifted.samples[k] == 0.0);

  // FFT path against the naive O(N*M) convolution oracle.
  Rng rng(71);
  Rir rir;
  rir.sample_rate = 8000;
  rir.taps.resize(600);
  for (auto& t : rir.taps) t = 0.2 * rng.gaussian();
  rir.taps[0] = 1.0;
  const WaveSignal got = reverberate(s, rir);
  std::vector<double> naive(s.samples.size(), 0.0);
  for (size_t i = 0; i < naive.size(); ++i) {
    const size_t kmax = std::min(rir.taps.size() - 1, i);
    for (size_t k = 0; k <= kmax; ++k) naive[i] += rir.taps[k] * s.samples[i - k];
  }
  double peak_naive = 0.0;
  for (double v : naive) peak_naive = std::max(peak_naive, std::abs(v));
  const double scale = s.peak() / peak_naive;
  for (size_t i = 0; i < naive.size(); ++i)
    REQUIRE(got.samples[i] == Catch::Approx(naive[i] * scale).margin(1e-6));

  REQUIRE_THROWS(reverberate(s, Rir{{}, 8000}));
}

TEST_CASE("synth_rir envelope") {
  Rng rng(81);
  const double t60 = 0.25;
  Rir rir = synth_rir(t60, 0.5, 16000, rng);
  REQUIRE(rir.taps[0] == 1.0);

  // Least-squares slope of log|tap| over the tail recovers the -60 dB/T60
  // energy decay within 1 dB.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 1; i < rir.taps.size(); ++i) {
    if (rir.taps[i] == 0.0) continue;
    const double x = static_cast<double>(i) / rir.sample_rate;
    const double y = std::log(std::abs(rir.taps[i]));
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double decay_db_at_t60 = -20.0 * slope * t60 / std::log(10.0);
  REQUIRE(decay_db_at_t60 == Catch::Approx(60.0).margin(1.0));

  // Vanishing decay time: the tail carries almost no energy.
  Rng rng2(82);
  Rir quick = synth_rir(1e-5, 0.2, 16000, rng2);
  double head = quick.taps[0] * quick.taps[0], tail = 0.0;
  for (size_t i = 1; i < quick.taps.size(); ++i) tail += quick.taps[i] * quick.taps[i];
  REQUIRE(tail / (head + tail) < 1e-6);

  REQUIRE_THROWS(synth_rir(0.0, 0.5, 16000, rng));
  REQUIRE_THROWS(synth_rir(0.3, -0.1, 16000, rng));
}

TEST_CASE("augmentations are deterministic and finite") {
  WaveSignal s = random_wave(6000, 90);
  std::vector<WaveSignal> pool{random_wave(3000, 91), random_wave(2000, 92)};
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng ra(seed), rb(seed);
    const auto a = add_interval_noise(s, pool, {0.0, 15.0}, 1.0, ra);
    const auto b = add_interval_noise(s, pool, {0.0, 15.0}, 1.0, rb);
    REQUIRE(a.samples == b.samples);
    for (double x : a.samples) REQUIRE(std::isfinite(x));
    Rng rc(seed), rd(seed);
    REQUIRE(synth_rir(0.3, 0.4, 8000, rc).taps == synth_rir(0.3, 0.4, 8000, rd).taps);
  }
}
