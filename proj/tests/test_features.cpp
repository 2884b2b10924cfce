// tests/test_features.cpp

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

#include "xvec/features.hpp"
#include "xvec/rng.hpp"

using namespace xvec;

namespace {

WaveSignal sine_wave(double freq, double dur_s, int sr, double amp = 0.4) {
  WaveSignal w;
  w.sample_rate = sr;
  const size_t n = static_cast<size_t>(dur_s * sr);
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / sr);
  return w;
}

// Straight-line reference pipeline: naive DFT, explicit per-frame loops.
// Independent of the FFT-based implementation path.
FeatureMatrix reference_mfcc(const WaveSignal& wave, const FeatureConfig& cfg) {
  const int sr = wave.sample_rate;
  const int win = cfg.window_samples(sr);
  const int shift = cfg.shift_samples(sr);
  const int n_frames = static_cast<int>((wave.samples.size() - win) / shift) + 1;
  const int n_bins = cfg.n_fft / 2 + 1;

  FeatureMatrix out(n_frames, cfg.n_mfcc);
  for (int t = 0; t < n_frames; ++t) {
    const int off = t * shift;
    std::vector<double> frame(static_cast<size_t>(cfg.n_fft), 0.0);
    for (int i = 0; i < win; ++i) {
      const double prev = (off + i > 0) ? wave.samples[off + i - 1] : wave.samples[0];
      const double ham = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));
      frame[static_cast<size_t>(i)] =
          cfg.waveform_scale * (wave.samples[off + i] - cfg.preemphasis * prev) * ham;
    }
    std::vector<double> spec(static_cast<size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
      double re = 0.0, im = 0.0;
      for (int n = 0; n < cfg.n_fft; ++n) {
        const double ang = -2.0 * M_PI * k * n / cfg.n_fft;
        re += frame[static_cast<size_t>(n)] * std::cos(ang);
        im += frame[static_cast<size_t>(n)] * std::sin(ang);
      }
      spec[static_cast<size_t>(k)] = re * re + im * im;
    }
    const double nyquist = sr / 2.0;
    const double mel_lo = 1127.0 * std::log(1.0 + cfg.mel_low_hz / 700.0);
    const double mel_hi = 1127.0 * std::log(1.0 + nyquist / 700.0);
    std::vector<double> logmel(static_cast<size_t>(cfg.n_mels));
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double left = mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1);
      const double center = mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1);
      const double right = mel_lo + (mel_hi - mel_lo) * (m + 2) / (cfg.n_mels + 1);
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) {
        const double mel = 1127.0 * std::log(1.0 + (k * static_cast<double>(sr) / cfg.n_fft) / 700.0);
        double w = 0.0;
        if (mel > left && mel < right)
          w = mel <= center ? (mel - left) / (center - left)
                            : (right - mel) / (right - center);
        e += w * spec[static_cast<size_t>(k)];
      }
      logmel[static_cast<size_t>(m)] = std::log(std::max(e, cfg.log_floor));
    }
    for (int i = 0; i < cfg.n_mfcc; ++i) {
      const double scale = std::sqrt((i == 0 ? 1.0 : 2.0) / cfg.n_mels);
      double c = 0.0;
      for (int m = 0; m < cfg.n_mels; ++m)
        c += scale * std::cos(M_PI * i * (m + 0.5) / cfg.n_mels) * logmel[static_cast<size_t>(m)];
      out(t, i) = c;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("compute_mfcc frame count follows the closed form") {
  FeatureConfig cfg;
  WaveSignal w = sine_wave(440.0, 1.0, 8000);
  REQUIRE(compute_mfcc(w, cfg).rows() == 98);

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int win = 200, shift = 80;
    const size_t len = static_cast<size_t>(rng.uniform_int(win, 6000));
    WaveSignal v;
    v.sample_rate = 8000;
    v.samples.assign(len, 0.0);
    for (auto& s : v.samples) s = 0.1 * rng.gaussian();
    const auto feats = compute_mfcc(v, cfg);
    REQUIRE(feats.rows() == static_cast<Eigen::Index>((len - win) / shift) + 1);
    REQUIRE(feats.cols() == 23);
    REQUIRE(feats.allFinite());
  }
}

TEST_CASE("compute_mfcc on silence yields constant DCT-of-floor rows") {
  FeatureConfig cfg;
  WaveSignal w;
  w.sample_rate = 8000;
  w.samples.assign(8000, 0.0);
  const auto feats = compute_mfcc(w, cfg);
  const double c0 = std::sqrt(1.0 / 23.0) * 23.0 * std::log(cfg.log_floor);
  for (Eigen::Index t = 0; t < feats.rows(); ++t) {
    REQUIRE(feats(t, 0) == Catch::Approx(c0).margin(1e-9));
    for (Eigen::Index d = 1; d < feats.cols(); ++d)
      REQUIRE(std::abs(feats(t, d)) < 1e-9);
  }
}

TEST_CASE("compute_mfcc matches the straight-line DSP oracle") {
  FeatureConfig cfg;
  WaveSignal w = sine_wave(700.0, 0.3, 8000);
  const auto fast = compute_mfcc(w, cfg);
  const auto slow = reference_mfcc(w, cfg);
  REQUIRE(fast.rows() == slow.rows());
  REQUIRE((fast - slow).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("compute_mfcc rejects bad input") {
  FeatureConfig cfg;
  WaveSignal w;
  w.sample_rate = 8000;
  w.samples.assign(100, 0.0);  // shorter than the 200-sample window
  REQUIRE_THROWS_WITH(compute_mfcc(w, cfg), Catch::Matchers::ContainsSubstring("too short"));
  w.samples.assign(400, 0.0);
  w.samples[10] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_WITH(compute_mfcc(w, cfg), Catch::Matchers::ContainsSubstring("invalid audio"));
}

TEST_CASE("sliding_cmn basics") {
  FeatureMatrix constant = FeatureMatrix::Constant(12, 23, 3.25);
  REQUIRE(sliding_cmn(constant, 5).cwiseAbs().maxCoeff() < 1e-12);

  Rng rng(5);
  FeatureMatrix feats(10, 23);
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = rng.gaussian();

  // Window covering the whole utterance equals global mean subtraction.
  const FeatureMatrix wide = sliding_cmn(feats, 2 * 10 + 1);
  const FeatureMatrix global = feats.rowwise() - feats.colwise().mean();
  REQUIRE((wide - global).cwiseAbs().maxCoeff() < 1e-12);

  // Brute-force per-frame window oracle.
  const int window = 5;
  const FeatureMatrix got = sliding_cmn(feats, window);
  for (Eigen::Index t = 0; t < feats.rows(); ++t) {
    Eigen::Index lo = std::max<Eigen::Index>(0, t - (window - 1) / 2);
    Eigen::Index hi = std::min<Eigen::Index>(feats.rows(), t - (window - 1) / 2 + window);
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(23);
    for (Eigen::Index u = lo; u < hi; ++u) mean += feats.row(u);
    mean /= static_cast<double>(hi - lo);
    REQUIRE((got.row(t) - (feats.row(t) - mean)).cwiseAbs().maxCoeff() < 1e-12);
  }

  // Empty input passes through.
  FeatureMatrix empty(0, 23);
  REQUIRE(sliding_cmn(empty, 300).rows() == 0);
}

TEST_CASE("sliding_cmn with a full window zeroes the column means") {
  Rng rng(17);
  FeatureMatrix feats(40, 23);
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = rng.gaussian();
  const FeatureMatrix out = sliding_cmn(feats, 2 * 40 + 1);
  REQUIRE(out.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("energy_vad accepts uniformly loud frames and removes silence") {
  VadConfig vad;
  FeatureMatrix loud = FeatureMatrix::Zero(20, 23);
  loud.col(0).setConstant(30.0);  // above 5.5 + 0.5 * 30
  auto mask = energy_vad(loud, vad);
  for (auto m : mask) REQUIRE(m == 1);

  // Loud / silent / loud; the silent stretch must be removed with the
  // boundaries within +-context frames of the truth.
  FeatureMatrix feats = FeatureMatrix::Zero(60, 23);
  for (int t = 0; t < 60; ++t) feats(t, 0) = (t >= 20 && t < 40) ? -80.0 : 30.0;
  mask = energy_vad(feats, vad);
  for (int t = 0; t < 60; ++t) {
    const bool truth = !(t >= 20 && t < 40);
    if (t >= 20 + vad.context && t < 40 - vad.context) REQUIRE(mask[static_cast<size_t>(t)] == 0);
    if (truth && (t < 20 - vad.context || t >= 40 + vad.context))
      REQUIRE(mask[static_cast<size_t>(t)] == 1);
  }

  // Applying the mask keeps exactly sum(mask) frames.
  size_t voiced = 0;
  for (auto m : mask) voiced += m;
  REQUIRE(static_cast<size_t>(apply_mask(feats, mask).rows()) == voiced);

  REQUIRE(energy_vad(FeatureMatrix(0, 23), vad).empty());
}

TEST_CASE("energy_vad scale-free configuration is shift invariant") {
  VadConfig vad;
  vad.energy_threshold = 0.0;
  vad.energy_mean_scale = 1.0;
  Rng rng(3);
  FeatureMatrix feats(50, 23);
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = rng.gaussian();
  const auto base = energy_vad(feats, vad);
  FeatureMatrix shifted = feats;
  shifted.col(0).array() += 42.0;
  REQUIRE(energy_vad(shifted, vad) == base);
}

TEST_CASE("estimate_norm_stats") {
  FeatureMatrix constant = FeatureMatrix::Constant(5, 23, 2.5);
  const NormStats st = estimate_norm_stats({constant});
  REQUIRE(st.mean.isApproxToConstant(2.5, 1e-12));
  REQUIRE(st.std.isApproxToConstant(1e-8, 1e-12));

  // Two matrices match the concatenate-then-compute oracle.
  Rng rng(9);
  FeatureMatrix a(7, 4), b(9, 4);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 2.0 + rng.gaussian();
  FeatureMatrix cat(16, 4);
  cat << a, b;
  const NormStats split = estimate_norm_stats({a, b});
  const Eigen::VectorXd mean = cat.colwise().mean().transpose();
  Eigen::VectorXd var =
      (cat.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  REQUIRE((split.mean - mean).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((split.std - var.cwiseSqrt()).cwiseAbs().maxCoeff() < 1e-12);

  // Normalize, re-estimate: stats come back as (0, 1).
  const FeatureMatrix normed = global_normalize(cat, split, NormMode::kMeanVar);
  const NormStats back = estimate_norm_stats({normed});
  REQUIRE(back.mean.cwiseAbs().maxCoeff() < 1e-6);
  REQUIRE((back.std.array() - 1.0).abs().maxCoeff() < 1e-6);

  REQUIRE_THROWS_WITH(estimate_norm_stats({FeatureMatrix(1, 4)}),
                      Catch::Matchers::ContainsSubstring("insufficient data"));
}

TEST_CASE("global_normalize") {
  Rng rng(21);
  FeatureMatrix feats(6, 3);
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = rng.gaussian();

  NormStats identity;
  identity.mean = Eigen::VectorXd::Zero(3);
  identity.std = Eigen::VectorXd::Ones(3);
  REQUIRE((global_normalize(feats, identity, NormMode::kMeanVar) - feats)
              .cwiseAbs()
              .maxCoeff() < 1e-12);

  NormStats st = estimate_norm_stats({feats});
  FeatureMatrix at_mean = FeatureMatrix::Zero(2, 3);
  at_mean.row(0) = st.mean.transpose();
  at_mean.row(1) = st.mean.transpose();
  REQUIRE(global_normalize(at_mean, st, NormMode::kMeanOnly).cwiseAbs().maxCoeff() < 1e-12);

  // Round trip.
  const FeatureMatrix normed = global_normalize(feats, st, NormMode::kMeanVar);
  FeatureMatrix recovered = normed;
  recovered.array().rowwise() *= st.std.transpose().array();
  recovered.rowwise() += st.mean.transpose();
  REQUIRE((recovered - feats).cwiseAbs().maxCoeff() < 1e-6);

  NormStats bad;
  bad.mean = Eigen::VectorXd::Zero(4);
  bad.std = Eigen::VectorXd::Ones(4);
  REQUIRE_THROWS(global_normalize(feats, bad, NormMode::kMeanOnly));
}

TEST_CASE("add_feature_noise") {
  Rng rng(33);
  FeatureMatrix feats(8, 5);
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = rng.gaussian();
  const Eigen::VectorXd stds = Eigen::VectorXd::LinSpaced(5, 0.5, 2.5);

  Rng r0(1);
  REQUIRE((add_feature_noise(feats, stds, 0.0, r0) - feats).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE_THROWS(add_feature_noise(feats, stds, -0.1, r0));

  // Same seed twice is bit-identical.
  Rng ra(7), rb(7);
  const FeatureMatrix na = add_feature_noise(feats, stds, 0.2, ra);
  const FeatureMatrix nb = add_feature_noise(feats, stds, 0.2, rb);
  REQUIRE((na - nb).cwiseAbs().maxCoeff() == 0.0);

  // Monte-Carlo: realized per-dimension noise std within 3% of the target.
  FeatureMatrix big = FeatureMatrix::Zero(100000, 5);
  Rng rc(99);
  const FeatureMatrix noisy = add_feature_noise(big, stds, 0.2, rc);
  for (Eigen::Index d = 0; d < 5; ++d) {
    const double emp = std::sqrt(noisy.col(d).array().square().mean());
    REQUIRE(emp == Catch::Approx(0.2 * stds(d)).epsilon(0.03));
  }
}
