// include/xvec/features.hpp

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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "xvec/fft.hpp"
#include "xvec/rng.hpp"
#include "xvec/wave.hpp"

namespace xvec {

/// T x D feature matrix, one frame per row.  Kept in double; archives store
/// the values as f32.
using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Energy VAD: a frame is voiced iff C0 > threshold + mean_scale * mean(C0),
/// then the raw decisions are smoothed by a majority vote over +-context
/// frames (strictly more than half of the counted frames must be voiced).
struct VadConfig {
  double energy_threshold = 5.5;
  double energy_mean_scale = 0.5;
  int context = 2;
};

struct FeatureConfig {
  int n_mfcc = 23;
  double window_ms = 25.0;
  double shift_ms = 10.0;
  int n_fft = 256;
  int n_mels = 23;
  int cmn_window = 300;       // frames, centered
  double preemphasis = 0.97;
  double log_floor = 1e-10;
  double waveform_scale = 32768.0;  // int16 convention; the VAD threshold
                                    // defaults assume this energy scale
  double mel_low_hz = 20.0;
  double mel_high_hz = 0.0;   // 0 -> Nyquist
  VadConfig vad;

  int window_samples(int sample_rate) const {
    return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
  }
  int shift_samples(int sample_rate) const {
    return static_cast<int>(std::lround(shift_ms * sample_rate / 1000.0));
  }

  void validate() const {
    if (n_mfcc > n_mels) throw std::invalid_argument("n_mfcc must be <= n_mels");
    if (!(window_ms > shift_ms && shift_ms > 0))
      throw std::invalid_argument("need window_ms > shift_ms > 0");
    if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0)
      throw std::invalid_argument("n_fft must be a power of two");
  }
};

/// Per-dimension mean / standard deviation used for fixed input
/// normalization; std components are floored at 1e-8.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

enum class NormMode { kMeanOnly, kMeanVar };

namespace detail {

inline double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

/// Triangular mel filterbank over FFT bins 0..n_fft/2, weights in mel space.
inline std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& cfg,
                                                       int sample_rate) {
  const double nyquist = sample_rate / 2.0;
  const double high = cfg.mel_high_hz > 0.0 ? cfg.mel_high_hz : nyquist;
  const double mel_lo = hz_to_mel(cfg.mel_low_hz);
  const double mel_hi = hz_to_mel(high);
  const int n_bins = cfg.n_fft / 2 + 1;
  std::vector<std::vector<double>> fb(cfg.n_mels,
                                      std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1);
    const double center = mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1);
    const double right = mel_lo + (mel_hi - mel_lo) * (m + 2) / (cfg.n_mels + 1);
    for (int k = 0; k < n_bins; ++k) {
      const double mel = hz_to_mel(k * static_cast<double>(sample_rate) / cfg.n_fft);
      double w = 0.0;
      if (mel > left && mel < right) {
        w = mel <= center ? (mel - left) / (center - left)
                          : (right - mel) / (right - center);
      }
      fb[m][k] = w;
    }
  }
  return fb;
}

/// Orthonormal DCT-II matrix rows 0..n_mfcc-1 over n_mels inputs.
inline std::vector<std::vector<double>> dct_matrix(int n_mfcc, int n_mels) {
  std::vector<std::vector<double>> dct(n_mfcc, std::vector<double>(n_mels));
  for (int i = 0; i < n_mfcc; ++i) {
    const double scale =
        std::sqrt((i == 0 ? 1.0 : 2.0) / static_cast<double>(n_mels));
    for (int m = 0; m < n_mels; ++m)
      dct[i][m] = scale * std::cos(M_PI * i * (m + 0.5) / n_mels);
  }
  return dct;
}

}  // namespace detail

/// MFCC extraction: pre-emphasis, Hamming window, power spectrum, mel
/// filterbank, floored log, DCT-II keeping n_mfcc coefficients.  C0 is kept
/// as the energy-bearing coefficient (the energy VAD reads it).
inline FeatureMatrix compute_mfcc(const WaveSignal& wave,
                                  const FeatureConfig& cfg) {
  cfg.validate();
  wave.check_finite();
  const int win = cfg.window_samples(wave.sample_rate);
  const int shift = cfg.shift_samples(wave.sample_rate);
  if (static_cast<int>(wave.samples.size()) < win)
    throw std::runtime_error("too short: signal shorter than one window");
  if (win > cfg.n_fft) throw std::invalid_argument("window longer than n_fft");

  const int n_frames =
      static_cast<int>((wave.samples.size() - win) / shift) + 1;
  const auto fb = detail::mel_filterbank(cfg, wave.sample_rate);
  const auto dct = detail::dct_matrix(cfg.n_mfcc, cfg.n_mels);

  std::vector<double> hamming(win);
  for (int i = 0; i < win; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));

  FeatureMatrix feats(n_frames, cfg.n_mfcc);
  std::vector<double> frame(win);
  for (int t = 0; t < n_frames; ++t) {
    const int off = t * shift;
    // Pre-emphasis within the frame, then the window.
    for (int i = 0; i < win; ++i) {
      const double prev = (off + i > 0) ? wave.samples[off + i - 1] : wave.samples[0];
      frame[i] = cfg.waveform_scale *
                 (wave.samples[off + i] - cfg.preemphasis * prev) * hamming[i];
    }
    const auto spec = power_spectrum(frame, static_cast<size_t>(cfg.n_fft));
    std::vector<double> logmel(cfg.n_mels);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (size_t k = 0; k < spec.size(); ++k) e += fb[m][k] * spec[k];
      logmel[m] = std::log(std::max(e, cfg.log_floor));
    }
    for (int i = 0; i < cfg.n_mfcc; ++i) {
      double c = 0.0;
      for (int m = 0; m < cfg.n_mels; ++m) c += dct[i][m] * logmel[m];
      feats(t, i) = c;
    }
  }
  return feats;
}

/// Sliding-window cepstral mean normalization.  The window is centered on
/// each frame and clipped at the utterance edges.
inline FeatureMatrix sliding_cmn(const FeatureMatrix& feats, int window) {
  if (window < 1) throw std::invalid_argument("cmn window must be >= 1");
  const Eigen::Index t_count = feats.rows();
  if (t_count == 0) return feats;
  FeatureMatrix out(feats.rows(), feats.cols());
  for (Eigen::Index t = 0; t < t_count; ++t) {
    Eigen::Index lo = t - (window - 1) / 2;
    Eigen::Index hi = lo + window;  // exclusive
    lo = std::max<Eigen::Index>(lo, 0);
    hi = std::min<Eigen::Index>(hi, t_count);
    const auto mean = feats.middleRows(lo, hi - lo).colwise().mean();
    out.row(t) = feats.row(t) - mean;
  }
  return out;
}

/// Frame mask from the energy VAD.  Must be fed pre-CMN features (C0 carries
/// the log energy).
inline std::vector<uint8_t> energy_vad(const FeatureMatrix& feats,
                                       const VadConfig& vad) {
  const Eigen::Index t_count = feats.rows();
  std::vector<uint8_t> mask(static_cast<size_t>(t_count), 0);
  if (t_count == 0) return mask;
  const double mean_c0 = feats.col(0).mean();
  const double threshold = vad.energy_threshold + vad.energy_mean_scale * mean_c0;
  std::vector<uint8_t> raw(static_cast<size_t>(t_count));
  for (Eigen::Index t = 0; t < t_count; ++t)
    raw[static_cast<size_t>(t)] = feats(t, 0) > threshold ? 1 : 0;
  for (Eigen::Index t = 0; t < t_count; ++t) {
    int voiced = 0, counted = 0;
    for (Eigen::Index u = t - vad.context; u <= t + vad.context; ++u) {
      if (u < 0 || u >= t_count) continue;
      ++counted;
      voiced += raw[static_cast<size_t>(u)];
    }
    mask[static_cast<size_t>(t)] = (2 * voiced > counted) ? 1 : 0;
  }
  return mask;
}

inline FeatureMatrix apply_mask(const FeatureMatrix& feats,
                                const std::vector<uint8_t>& mask) {
  if (static_cast<size_t>(feats.rows()) != mask.size())
    throw std::invalid_argument("mask length mismatch");
  Eigen::Index kept = 0;
  for (uint8_t m : mask) kept += m ? 1 : 0;
  FeatureMatrix out(kept, feats.cols());
  Eigen::Index r = 0;
  for (Eigen::Index t = 0; t < feats.rows(); ++t)
    if (mask[static_cast<size_t>(t)]) out.row(r++) = feats.row(t);
  return out;
}

/// Pooled per-dimension mean/std over every frame of the given matrices.
inline NormStats estimate_norm_stats(const std::vector<FeatureMatrix>& corpus) {
  Eigen::Index total = 0;
  Eigen::Index dim = -1;
  for (const auto& m : corpus) {
    if (m.rows() == 0) continue;
    if (dim < 0) dim = m.cols();
    if (m.cols() != dim) throw std::invalid_argument("dimension mismatch");
    total += m.rows();
  }
  if (total < 2) throw std::runtime_error("insufficient data: need >= 2 frames");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dim);
  for (const auto& m : corpus) {
    if (m.rows() == 0) continue;
    sum += m.colwise().sum().transpose();
    sumsq += m.array().square().matrix().colwise().sum().transpose();
  }
  NormStats stats;
  stats.mean = sum / static_cast<double>(total);
  Eigen::VectorXd var =
      sumsq / static_cast<double>(total) - stats.mean.cwiseProduct(stats.mean);
  stats.std = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-8);
  return stats;
}

inline FeatureMatrix global_normalize(const FeatureMatrix& feats,
                                      const NormStats& stats, NormMode mode) {
  if (feats.cols() != stats.mean.size() || feats.cols() != stats.std.size())
    throw std::invalid_argument("norm stats dimension mismatch");
  FeatureMatrix out = feats.rowwise() - stats.mean.transpose();
  if (mode == NormMode::kMeanVar)
    out.array().rowwise() /= stats.std.transpose().array();
  return out;
}

/// Adds zero-mean Gaussian noise with per-dimension std scale * per_dim_std.
inline FeatureMatrix add_feature_noise(const FeatureMatrix& feats,
                                       const Eigen::VectorXd& per_dim_std,
                                       double scale, Rng& rng) {
  if (scale < 0.0) throw std::invalid_argument("noise scale must be >= 0");
  if (feats.cols() != per_dim_std.size())
    throw std::invalid_argument("per_dim_std dimension mismatch");
  if (scale == 0.0) return feats;
  FeatureMatrix out = feats;
  for (Eigen::Index t = 0; t < out.rows(); ++t)
    for (Eigen::Index d = 0; d < out.cols(); ++d)
      out(t, d) += scale * per_dim_std(d) * rng.gaussian();
  return out;
}

}  // namespace xvec
