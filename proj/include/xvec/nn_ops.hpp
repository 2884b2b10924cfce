// include/xvec/nn_ops.hpp

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
#include <cmath>
#include <span>
#include <type_traits>
#include <stdexcept>
#include <vector>

#include "xvec/rng.hpp"
#include "xvec/topology.hpp"

namespace xvec {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Phase { kTrain, kInfer };

/// Frame-level activations in time-major layout: row t*batch + b holds frame
/// t of example b.  This keeps each tap of a temporal convolution a single
/// contiguous block, so the whole layer is one GEMM per tap.
template <class S>
struct Frames {
  Mat<S> x;
  int batch = 1;

  Eigen::Index frames() const { return batch > 0 ? x.rows() / batch : 0; }
};

namespace nn {

// --- temporal convolution (valid, no padding) ------------------------------

/// Forward pass of a frame layer.  `w` stacks one (in_dim x out_dim) block
/// per tap; taps are accumulated in order, so a TDNN layer is exactly the
/// matching CNN layer with the unused taps removed.
template <class S>
Frames<S> conv_forward(const Frames<S>& in, const Mat<S>& w, const Vec<S>& b,
                       const std::vector<int>& taps, int kernel) {
  const int B = in.batch;
  const Eigen::Index T = in.frames();
  const Eigen::Index Tp = T - kernel + 1;
  if (Tp < 1) throw std::runtime_error("context exceeds frames");
  const Eigen::Index din = in.x.cols();
  const Eigen::Index dout = w.cols();
  if (w.rows() != static_cast<Eigen::Index>(taps.size()) * din)
    throw std::invalid_argument("conv weight shape mismatch");

  Frames<S> out;
  out.batch = B;
  out.x.setZero(Tp * B, dout);
  for (size_t j = 0; j < taps.size(); ++j) {
    out.x.noalias() +=
        in.x.middleRows(taps[j] * B, Tp * B) * w.middleRows(static_cast<Eigen::Index>(j) * din, din);
  }
  out.x.rowwise() += b.transpose();
  return out;
}

template <class S>
Frames<S> conv_backward(const Frames<S>& in, const Frames<S>& dout,
                        const Mat<S>& w, const std::vector<int>& taps,
                        int kernel, Mat<S>& dw, Vec<S>& db) {
  const int B = in.batch;
  const Eigen::Index T = in.frames();
  const Eigen::Index Tp = T - kernel + 1;
  const Eigen::Index din = in.x.cols();
  Frames<S> din_frames;
  din_frames.batch = B;
  din_frames.x.setZero(in.x.rows(), din);
  for (size_t j = 0; j < taps.size(); ++j) {
    const Eigen::Index wrow = static_cast<Eigen::Index>(j) * din;
    din_frames.x.middleRows(taps[j] * B, Tp * B).noalias() +=
        dout.x * w.middleRows(wrow, din).transpose();
    dw.middleRows(wrow, din).noalias() +=
        in.x.middleRows(taps[j] * B, Tp * B).transpose() * dout.x;
  }
  db += dout.x.colwise().sum().transpose();
  return din_frames;
}

// --- batch normalization -----------------------------------------------------

/// Learnable scale/offset plus running statistics for one BN site.
template <class S>
struct BnSite {
  Vec<S> gamma, beta;
  Vec<S> running_mean, running_var;
  bool initialized = false;

  void init(Eigen::Index dim) {
    gamma = Vec<S>::Ones(dim);
    beta = Vec<S>::Zero(dim);
    running_mean = Vec<S>::Zero(dim);
    running_var = Vec<S>::Ones(dim);
    initialized = false;
  }
};

template <class S>
struct BnCache {
  Mat<S> xhat;
  Vec<S> inv_std;
  bool batch_stats = false;
};

/// Normalizes per channel over all rows (batch x time for frame layers).
/// Train phase uses batch statistics and updates the running ones as
/// running = momentum * running + (1 - momentum) * batch.
template <class S>
Mat<S> bn_forward(const Mat<S>& x, BnSite<S>& site, Phase phase,
                  double momentum, double eps,
                  std::type_identity_t<BnCache<S>*> cache) {
  const Eigen::Index rows = x.rows();
  Mat<S> y;
  if (phase == Phase::kTrain) {
    if (rows < 2)
      throw std::runtime_error("batchnorm needs >= 2 rows per channel");
    const Vec<S> mean = x.colwise().mean().transpose();
    Vec<S> var = (x.rowwise() - mean.transpose())
                     .array()
                     .square()
                     .colwise()
                     .mean()
                     .transpose();
    var = var.cwiseMax(S(0));
    const Vec<S> inv_std =
        (var.array() + static_cast<S>(eps)).rsqrt().matrix();
    Mat<S> xhat = x.rowwise() - mean.transpose();
    xhat.array().rowwise() *= inv_std.transpose().array();
    y = xhat;
    y.array().rowwise() *= site.gamma.transpose().array();
    y.rowwise() += site.beta.transpose();
    const S m = static_cast<S>(momentum);
    site.running_mean = m * site.running_mean + (S(1) - m) * mean;
    site.running_var = m * site.running_var + (S(1) - m) * var;
    site.initialized = true;
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = inv_std;
      cache->batch_stats = true;
    }
  } else {
    if (!site.initialized)
      throw std::runtime_error("uninitialized running stats");
    const Vec<S> inv_std =
        (site.running_var.array() + static_cast<S>(eps)).rsqrt().matrix();
    y = x.rowwise() - site.running_mean.transpose();
    y.array().rowwise() *= (inv_std.cwiseProduct(site.gamma)).transpose().array();
    y.rowwise() += site.beta.transpose();
    if (cache) {
      cache->inv_std = inv_std;
      cache->batch_stats = false;
    }
  }
  return y;
}

template <class S>
Mat<S> bn_backward(const Mat<S>& dy, const BnCache<S>& cache,
                   const BnSite<S>& site, Vec<S>& dgamma, Vec<S>& dbeta) {
  if (!cache.batch_stats)
    throw std::logic_error("bn_backward requires a train-phase cache");
  const Eigen::Index rows = dy.rows();
  dgamma += dy.cwiseProduct(cache.xhat).colwise().sum().transpose();
  dbeta += dy.colwise().sum().transpose();
  Mat<S> dxhat = dy;
  dxhat.array().rowwise() *= site.gamma.transpose().array();
  const Vec<S> sum_dxhat = dxhat.colwise().sum().transpose();
  const Vec<S> sum_dxhat_xhat =
      dxhat.cwiseProduct(cache.xhat).colwise().sum().transpose();
  Mat<S> dx = static_cast<S>(rows) * dxhat;
  dx.rowwise() -= sum_dxhat.transpose();
  dx -= cache.xhat * sum_dxhat_xhat.asDiagonal();
  dx.array().rowwise() *=
      (cache.inv_std / static_cast<S>(rows)).transpose().array();
  return dx;
}

// --- activations -------------------------------------------------------------

template <class S>
Mat<S> act_forward(const Mat<S>& x, Activation kind, double lrelu_slope,
                   std::type_identity_t<const Vec<S>*> prelu) {
  switch (kind) {
    case Activation::kRelu:
      return x.cwiseMax(S(0));
    case Activation::kLrelu: {
      const S a = static_cast<S>(lrelu_slope);
      return (x.array() >= S(0)).select(x, a * x);
    }
    case Activation::kPrelu: {
      Mat<S> y = x;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const S a = (*prelu)(c);
        for (Eigen::Index r = 0; r < x.rows(); ++r)
          if (y(r, c) < S(0)) y(r, c) *= a;
      }
      return y;
    }
  }
  throw std::logic_error("unreachable");
}

/// dprelu, when given, accumulates the per-channel slope gradient.
template <class S>
Mat<S> act_backward(const Mat<S>& dy, const Mat<S>& x_pre, Activation kind,
                    double lrelu_slope, std::type_identity_t<const Vec<S>*> prelu,
                    std::type_identity_t<Vec<S>*> dprelu) {
  Mat<S> dx = dy;
  switch (kind) {
    case Activation::kRelu:
      dx = (x_pre.array() >= S(0)).select(dy, Mat<S>::Zero(dy.rows(), dy.cols()));
      break;
    case Activation::kLrelu: {
      const S a = static_cast<S>(lrelu_slope);
      dx = (x_pre.array() >= S(0)).select(dy, a * dy);
      break;
    }
    case Activation::kPrelu:
      for (Eigen::Index c = 0; c < dy.cols(); ++c) {
        const S a = (*prelu)(c);
        S grad_a = S(0);
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
          if (x_pre(r, c) < S(0)) {
            grad_a += dy(r, c) * x_pre(r, c);
            dx(r, c) = dy(r, c) * a;
          }
        }
        if (dprelu) (*dprelu)(c) += grad_a;
      }
      break;
  }
  return dx;
}

// --- pooling -----------------------------------------------------------------

template <class S>
struct StatsPoolCache {
  Mat<S> input;      // (T*B, D) time-major
  int batch = 1;
  Mat<S> mean;       // (B, D)
  Mat<S> var;        // unfloored
  Mat<S> stddev;     // floored
};

/// Concatenates per-channel mean and standard deviation over time.  The
/// variance is floored before the square root so constant inputs stay
/// differentiable.
template <class S>
Mat<S> stats_pool(const Frames<S>& h, double var_floor,
                  std::type_identity_t<StatsPoolCache<S>*> cache) {
  const int B = h.batch;
  const Eigen::Index T = h.frames();
  if (T < 1) throw std::runtime_error("stats pooling over zero frames");
  const Eigen::Index D = h.x.cols();
  Mat<S> sum = Mat<S>::Zero(B, D), sumsq = Mat<S>::Zero(B, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto slice = h.x.middleRows(t * B, B);
    sum += slice;
    sumsq.array() += slice.array().square();
  }
  const S inv_t = S(1) / static_cast<S>(T);
  const Mat<S> mean = sum * inv_t;
  Mat<S> var = sumsq * inv_t - mean.cwiseProduct(mean);
  const Mat<S> stddev =
      var.cwiseMax(static_cast<S>(var_floor)).cwiseSqrt();
  Mat<S> out(B, 2 * D);
  out.leftCols(D) = mean;
  out.rightCols(D) = stddev;
  if (cache) {
    cache->input = h.x;
    cache->batch = B;
    cache->mean = mean;
    cache->var = std::move(var);
    cache->stddev = stddev;
  }
  return out;
}

template <class S>
Frames<S> stats_pool_backward(const Mat<S>& dout, const StatsPoolCache<S>& c,
                              double var_floor) {
  const int B = c.batch;
  const Eigen::Index D = c.mean.cols();
  const Eigen::Index T = c.input.rows() / B;
  const auto dmean_dir = dout.leftCols(D);
  const auto dstd = dout.rightCols(D);
  // d std = d var / (2 std); flat where the floor clamps.
  Mat<S> dvar = (c.var.array() > static_cast<S>(var_floor))
                    .select(dstd.array() / (S(2) * c.stddev.array()),
                            Mat<S>::Zero(B, D).array());
  const Mat<S> g1 = dmean_dir - S(2) * c.mean.cwiseProduct(dvar);
  const S inv_t = S(1) / static_cast<S>(T);
  Frames<S> dh;
  dh.batch = B;
  dh.x.resize(c.input.rows(), D);
  for (Eigen::Index t = 0; t < T; ++t) {
    dh.x.middleRows(t * B, B) =
        (g1 + S(2) * dvar.cwiseProduct(c.input.middleRows(t * B, B))) * inv_t;
  }
  return dh;
}

template <class S>
struct AttnParams {
  Mat<S> w;  // (key_dim, attn_dim)
  Vec<S> b;  // attn_dim
  Vec<S> v;  // attn_dim
};

template <class S>
struct AttnPoolCache {
  Mat<S> input;  // (T*B, D)
  int batch = 1;
  PoolingKind mode = PoolingKind::kAttnShared;
  Mat<S> tanh_proj;   // tanh(K w + b), (T*B, attn_dim)
  Vec<S> alpha;       // (T*B), softmax over t within each example
  Mat<S> mean, var, stddev;  // (B, value_dim)
};

/// Attentive statistics: scores e = v' tanh(K w + b), alpha = softmax over
/// time, output the alpha-weighted mean and standard deviation of the
/// values.  Shared mode scores and pools the same activations; split mode
/// halves the input into keys (left) and values (right).
template <class S>
Mat<S> attention_pool(const Frames<S>& h, const AttnParams<S>& p,
                      PoolingKind mode, double var_floor,
                      std::type_identity_t<AttnPoolCache<S>*> cache) {
  const int B = h.batch;
  const Eigen::Index T = h.frames();
  if (T < 1) throw std::runtime_error("attention pooling over zero frames");
  const Eigen::Index D = h.x.cols();
  const Eigen::Index kd = mode == PoolingKind::kAttnSplit ? D / 2 : D;
  const auto keys = h.x.leftCols(kd);
  const auto values =
      mode == PoolingKind::kAttnSplit ? h.x.rightCols(D - kd) : h.x.leftCols(D);
  const Eigen::Index vd = values.cols();

  Mat<S> a = keys * p.w;
  a.rowwise() += p.b.transpose();
  a = a.array().tanh().matrix();
  Vec<S> scores = a * p.v;

  // Per-example softmax over time; rows of one example are strided by B.
  Vec<S> alpha(scores.size());
  for (int b = 0; b < B; ++b) {
    S mx = scores(b);
    for (Eigen::Index t = 1; t < T; ++t) mx = std::max(mx, scores(t * B + b));
    S denom = S(0);
    for (Eigen::Index t = 0; t < T; ++t) {
      const S e = std::exp(scores(t * B + b) - mx);
      alpha(t * B + b) = e;
      denom += e;
    }
    for (Eigen::Index t = 0; t < T; ++t) alpha(t * B + b) /= denom;
  }

  Mat<S> mean = Mat<S>::Zero(B, vd), m2 = Mat<S>::Zero(B, vd);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto slice = values.middleRows(t * B, B);
    const auto w_t = alpha.segment(t * B, B);
    mean.array() += slice.array().colwise() * w_t.array();
    m2.array() += slice.array().square().colwise() * w_t.array();
  }
  Mat<S> var = m2 - mean.cwiseProduct(mean);
  const Mat<S> stddev = var.cwiseMax(static_cast<S>(var_floor)).cwiseSqrt();

  Mat<S> out(B, 2 * vd);
  out.leftCols(vd) = mean;
  out.rightCols(vd) = stddev;
  if (cache) {
    cache->input = h.x;
    cache->batch = B;
    cache->mode = mode;
    cache->tanh_proj = std::move(a);
    cache->alpha = std::move(alpha);
    cache->mean = mean;
    cache->var = std::move(var);
    cache->stddev = stddev;
  }
  return out;
}

template <class S>
Frames<S> attention_pool_backward(const Mat<S>& dout, const AttnPoolCache<S>& c,
                                  const AttnParams<S>& p, double var_floor,
                                  Mat<S>& dw, Vec<S>& db, Vec<S>& dv) {
  const int B = c.batch;
  const Eigen::Index D = c.input.cols();
  const Eigen::Index T = c.input.rows() / B;
  const Eigen::Index kd = c.mode == PoolingKind::kAttnSplit ? D / 2 : D;
  const auto keys = c.input.leftCols(kd);
  const auto values = c.mode == PoolingKind::kAttnSplit
                          ? c.input.rightCols(D - kd)
                          : c.input.leftCols(D);
  const Eigen::Index vd = values.cols();

  const auto dmean_dir = dout.leftCols(vd);
  const auto dstd = dout.rightCols(vd);
  Mat<S> dvar = (c.var.array() > static_cast<S>(var_floor))
                    .select(dstd.array() / (S(2) * c.stddev.array()),
                            Mat<S>::Zero(B, vd).array());
  const Mat<S> g1 = dmean_dir - S(2) * c.mean.cwiseProduct(dvar);

  // Value and score gradients.
  Mat<S> dvalues(values.rows(), vd);
  Vec<S> dalpha(c.alpha.size());
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto slice = values.middleRows(t * B, B);
    const auto w_t = c.alpha.segment(t * B, B);
    dvalues.middleRows(t * B, B) =
        ((g1.array() + S(2) * dvar.array() * slice.array()).colwise() *
         w_t.array())
            .matrix();
    dalpha.segment(t * B, B) =
        (g1.array() * slice.array() + dvar.array() * slice.array().square())
            .rowwise()
            .sum();
  }
  // Softmax backward per example.
  Vec<S> dscores(dalpha.size());
  for (int b = 0; b < B; ++b) {
    S dot = S(0);
    for (Eigen::Index t = 0; t < T; ++t)
      dot += c.alpha(t * B + b) * dalpha(t * B + b);
    for (Eigen::Index t = 0; t < T; ++t)
      dscores(t * B + b) = c.alpha(t * B + b) * (dalpha(t * B + b) - dot);
  }

  dv.noalias() += c.tanh_proj.transpose() * dscores;
  Mat<S> dz = dscores * p.v.transpose();  // d(pre-tanh)
  dz.array() *= (S(1) - c.tanh_proj.array().square());
  dw.noalias() += keys.transpose() * dz;
  db += dz.colwise().sum().transpose();
  const Mat<S> dkeys = dz * p.w.transpose();

  Frames<S> dh;
  dh.batch = B;
  if (c.mode == PoolingKind::kAttnSplit) {
    dh.x.resize(c.input.rows(), D);
    dh.x.leftCols(kd) = dkeys;
    dh.x.rightCols(vd) = dvalues;
  } else {
    dh.x = dvalues + dkeys;
  }
  return dh;
}

// --- dropout -----------------------------------------------------------------

/// Inverted dropout; identity at inference.  The mask (already scaled by
/// 1/(1-p)) is stored for the backward pass.
template <class S>
Mat<S> dropout_forward(const Mat<S>& x, double p, Phase phase, Rng& rng,
                       Mat<S>* mask_out) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout p must be in [0, 1)");
  if (phase == Phase::kInfer || p == 0.0) {
    if (mask_out) mask_out->resize(0, 0);
    return x;
  }
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  Mat<S> mask(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      mask(r, c) = rng.uniform() >= p ? keep_scale : S(0);
  if (mask_out) *mask_out = mask;
  return x.cwiseProduct(mask);
}

// --- loss --------------------------------------------------------------------

/// Mean cross-entropy with a numerically stable log-sum-exp; dlogits gets
/// (softmax - onehot) / batch.
template <class S>
S softmax_ce(const Mat<S>& logits, std::span<const uint32_t> labels,
             std::type_identity_t<Mat<S>*> dlogits) {
  const Eigen::Index B = logits.rows();
  const Eigen::Index N = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != B)
    throw std::invalid_argument("labels size mismatch");
  if (dlogits) dlogits->resize(B, N);
  S loss = S(0);
  for (Eigen::Index i = 0; i < B; ++i) {
    const uint32_t y = labels[static_cast<size_t>(i)];
    if (y >= static_cast<uint32_t>(N))
      throw std::out_of_range("label out of range");
    const S mx = logits.row(i).maxCoeff();
    const S lse =
        mx + std::log((logits.row(i).array() - mx).exp().sum());
    loss += lse - logits(i, y);
    if (dlogits) {
      dlogits->row(i) = (logits.row(i).array() - lse).exp() / static_cast<S>(B);
      (*dlogits)(i, y) -= S(1) / static_cast<S>(B);
    }
  }
  return loss / static_cast<S>(B);
}

}  // namespace nn
}  // namespace xvec
