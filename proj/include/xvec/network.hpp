// include/xvec/network.hpp

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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xvec/nn_ops.hpp"
#include "xvec/rng.hpp"
#include "xvec/topology.hpp"

namespace xvec {

template <class S>
struct FrameLayerParams {
  Mat<S> w;        // (taps * in_dim, out_dim)
  Vec<S> b;
  Vec<S> prelu;    // empty unless PReLU
  nn::BnSite<S> bn;
};

template <class S>
struct SegmentLayerParams {
  Mat<S> w;
  Vec<S> b;
  Vec<S> prelu;
  nn::BnSite<S> bn;
};

template <class S>
struct ParamSet {
  TopologyConfig cfg;
  nn::BnSite<S> input_bn;          // active iff cfg.input_bn
  std::vector<FrameLayerParams<S>> frames;
  nn::AttnParams<S> attn;          // active iff pooling != stats
  nn::BnSite<S> pool_bn;           // active iff cfg.bn_after_pooling
  SegmentLayerParams<S> segment1, segment2;
  Mat<S> softmax_w;
  Vec<S> softmax_b;
};

/// Flat view over one tensor; `data` points into contiguous Eigen storage.
template <class S>
struct TensorRef {
  std::string name;
  S* data = nullptr;
  Eigen::Index size = 0;
  int rows = 0, cols = 0;
};

namespace detail {

template <class S>
void add_ref(std::vector<TensorRef<S>>& out, const std::string& name, Mat<S>& m) {
  out.push_back({name, m.data(), m.size(), static_cast<int>(m.rows()),
                 static_cast<int>(m.cols())});
}
template <class S>
void add_ref(std::vector<TensorRef<S>>& out, const std::string& name, Vec<S>& v) {
  out.push_back({name, v.data(), v.size(), static_cast<int>(v.size()), 1});
}

template <class S>
void add_bn_refs(std::vector<TensorRef<S>>& out, const std::string& prefix,
                 nn::BnSite<S>& bn) {
  add_ref(out, prefix + ".gamma", bn.gamma);
  add_ref(out, prefix + ".beta", bn.beta);
}

}  // namespace detail

/// Trainable tensors in a pinned declaration order (the checkpoint and the
/// optimizer state are aligned with this order).
template <class S>
std::vector<TensorRef<S>> trainable_tensors(ParamSet<S>& p) {
  std::vector<TensorRef<S>> out;
  if (p.cfg.input_bn) detail::add_bn_refs(out, "input_bn", p.input_bn);
  for (size_t i = 0; i < p.frames.size(); ++i) {
    const std::string prefix = "frame" + std::to_string(i + 1);
    detail::add_ref(out, prefix + ".w", p.frames[i].w);
    detail::add_ref(out, prefix + ".b", p.frames[i].b);
    if (p.cfg.activation == Activation::kPrelu)
      detail::add_ref(out, prefix + ".prelu", p.frames[i].prelu);
    detail::add_bn_refs(out, prefix + ".bn", p.frames[i].bn);
  }
  if (p.cfg.pooling != PoolingKind::kStats) {
    detail::add_ref(out, "attn.w", p.attn.w);
    detail::add_ref(out, "attn.b", p.attn.b);
    detail::add_ref(out, "attn.v", p.attn.v);
  }
  if (p.cfg.bn_after_pooling) detail::add_bn_refs(out, "pool_bn", p.pool_bn);
  for (auto* seg : {&p.segment1, &p.segment2}) {
    const std::string prefix = seg == &p.segment1 ? "segment1" : "segment2";
    detail::add_ref(out, prefix + ".w", seg->w);
    detail::add_ref(out, prefix + ".b", seg->b);
    if (p.cfg.activation == Activation::kPrelu)
      detail::add_ref(out, prefix + ".prelu", seg->prelu);
    detail::add_bn_refs(out, prefix + ".bn", seg->bn);
  }
  detail::add_ref(out, "softmax.w", p.softmax_w);
  detail::add_ref(out, "softmax.b", p.softmax_b);
  return out;
}

/// BN running statistics (saved with checkpoints, not touched by the
/// optimizer).
template <class S>
std::vector<TensorRef<S>> state_tensors(ParamSet<S>& p) {
  std::vector<TensorRef<S>> out;
  auto add_site = [&](const std::string& prefix, nn::BnSite<S>& bn) {
    detail::add_ref(out, prefix + ".running_mean", bn.running_mean);
    detail::add_ref(out, prefix + ".running_var", bn.running_var);
  };
  if (p.cfg.input_bn) add_site("input_bn", p.input_bn);
  for (size_t i = 0; i < p.frames.size(); ++i)
    add_site("frame" + std::to_string(i + 1) + ".bn", p.frames[i].bn);
  if (p.cfg.bn_after_pooling) add_site("pool_bn", p.pool_bn);
  add_site("segment1.bn", p.segment1.bn);
  add_site("segment2.bn", p.segment2.bn);
  return out;
}

/// Builds a parameter set: fan-in-scaled Gaussian weights, zero biases,
/// BN scale 1 / offset 0, PReLU slopes at their configured constant.
template <class S>
ParamSet<S> build_network(const TopologyConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng = Rng::derive(seed, "init");
  auto gaussian_matrix = [&](Eigen::Index rows, Eigen::Index cols,
                             double fan_in) {
    Mat<S> m(rows, cols);
    const double scale = std::sqrt(2.0 / fan_in);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        m(r, c) = static_cast<S>(scale * rng.gaussian());
    return m;
  };

  ParamSet<S> p;
  p.cfg = cfg;
  if (cfg.input_bn) p.input_bn.init(cfg.input_dim());
  for (size_t i = 0; i < cfg.frame_layers.size(); ++i) {
    const auto& spec = cfg.frame_layers[i];
    const auto taps = spec.taps(static_cast<int>(i));
    FrameLayerParams<S> layer;
    const double fan_in = static_cast<double>(taps.size()) * spec.in_dim;
    layer.w = gaussian_matrix(static_cast<Eigen::Index>(taps.size()) * spec.in_dim,
                              spec.out_dim, fan_in);
    layer.b = Vec<S>::Zero(spec.out_dim);
    if (cfg.activation == Activation::kPrelu)
      layer.prelu = Vec<S>::Constant(spec.out_dim, static_cast<S>(cfg.prelu_init));
    layer.bn.init(spec.out_dim);
    p.frames.push_back(std::move(layer));
  }
  if (cfg.pooling != PoolingKind::kStats) {
    const int kd = cfg.pooling == PoolingKind::kAttnSplit
                       ? cfg.frame_out_dim() / 2
                       : cfg.frame_out_dim();
    p.attn.w = gaussian_matrix(kd, cfg.attn_dim, kd);
    p.attn.b = Vec<S>::Zero(cfg.attn_dim);
    Mat<S> v = gaussian_matrix(cfg.attn_dim, 1, cfg.attn_dim);
    p.attn.v = v.col(0);
  }
  if (cfg.bn_after_pooling) p.pool_bn.init(cfg.pooled_dim());

  p.segment1.w = gaussian_matrix(cfg.pooled_dim(), cfg.segment1_dim, cfg.pooled_dim());
  p.segment1.b = Vec<S>::Zero(cfg.segment1_dim);
  p.segment2.w = gaussian_matrix(cfg.segment1_dim, cfg.segment2_dim, cfg.segment1_dim);
  p.segment2.b = Vec<S>::Zero(cfg.segment2_dim);
  if (cfg.activation == Activation::kPrelu) {
    p.segment1.prelu = Vec<S>::Constant(cfg.segment1_dim, static_cast<S>(cfg.prelu_init));
    p.segment2.prelu = Vec<S>::Constant(cfg.segment2_dim, static_cast<S>(cfg.prelu_init));
  }
  p.segment1.bn.init(cfg.segment1_dim);
  p.segment2.bn.init(cfg.segment2_dim);
  p.softmax_w = gaussian_matrix(cfg.segment2_dim, cfg.n_classes, cfg.segment2_dim);
  p.softmax_b = Vec<S>::Zero(cfg.n_classes);
  return p;
}

/// Same shapes as `p`, all values zero; used as a gradient accumulator.
template <class S>
ParamSet<S> zeros_like(const ParamSet<S>& p) {
  ParamSet<S> g = p;
  auto refs = trainable_tensors(g);
  for (auto& r : refs)
    for (Eigen::Index i = 0; i < r.size; ++i) r.data[i] = S(0);
  auto state = state_tensors(g);
  for (auto& r : state)
    for (Eigen::Index i = 0; i < r.size; ++i) r.data[i] = S(0);
  return g;
}

/// L2 weight penalty.  Only affine weight matrices participate (biases, BN
/// parameters, PReLU slopes and attention parameters are excluded):
/// segment1 carries beta_embedding, segment2 and softmax carry beta_segment,
/// and frame-layer weights join only with scope = all.
template <class S>
S l2_penalty(const ParamSet<S>& p, const L2Config& l2, ParamSet<S>* grads) {
  S penalty = S(0);
  auto add = [&](const Mat<S>& w, Mat<S>* dw, double beta) {
    if (beta == 0.0) return;
    const S b = static_cast<S>(beta);
    penalty += b * S(0.5) * w.squaredNorm();
    if (dw) *dw += b * w;
  };
  if (l2.scope == L2Scope::kAll) {
    for (size_t i = 0; i < p.frames.size(); ++i)
      add(p.frames[i].w, grads ? &grads->frames[i].w : nullptr, l2.beta_segment);
  }
  add(p.segment1.w, grads ? &grads->segment1.w : nullptr, l2.beta_embedding);
  add(p.segment2.w, grads ? &grads->segment2.w : nullptr, l2.beta_segment);
  add(p.softmax_w, grads ? &grads->softmax_w : nullptr, l2.beta_segment);
  return penalty;
}

// ---------------------------------------------------------------------------
// Full forward/backward.

template <class S>
struct BlockCache {
  Mat<S> pre_act;        // input to the activation
  nn::BnCache<S> bn;
  Mat<S> dropout_mask;   // empty when unused
};

template <class S>
struct ForwardCache {
  int batch = 1;
  Phase phase = Phase::kTrain;
  Frames<S> input;                    // post input-BN
  nn::BnCache<S> input_bn;
  std::vector<Frames<S>> frame_in;    // input to each frame layer
  std::vector<BlockCache<S>> frame_blocks;
  nn::StatsPoolCache<S> stats_pool;
  nn::AttnPoolCache<S> attn_pool;
  Mat<S> pooled;                      // (B, pooled_dim) before pool BN
  nn::BnCache<S> pool_bn;
  Mat<S> pooled_final;
  Mat<S> embeddings;                  // segment1 affine output (B, d)
  Mat<S> seg1_in;                     // = pooled_final
  BlockCache<S> seg1_block, seg2_block;
  Mat<S> seg1_out, seg2_in, seg2_out;
  Mat<S> logits;
};

namespace detail {

/// Activation followed by BN, or BN followed by activation, plus dropout.
template <class S>
Mat<S> block_forward(const Mat<S>& z, const TopologyConfig& cfg,
                     nn::BnSite<S>& bn, const Vec<S>* prelu, Phase phase,
                     Rng* dropout_rng, BlockCache<S>& cache) {
  Mat<S> y;
  if (cfg.bn_order == BnOrder::kAfterAct) {
    cache.pre_act = z;
    const Mat<S> a = nn::act_forward(z, cfg.activation, cfg.lrelu_slope, prelu);
    y = nn::bn_forward(a, bn, phase, cfg.bn_momentum, cfg.bn_epsilon, &cache.bn);
  } else {
    const Mat<S> a =
        nn::bn_forward(z, bn, phase, cfg.bn_momentum, cfg.bn_epsilon, &cache.bn);
    cache.pre_act = a;
    y = nn::act_forward(a, cfg.activation, cfg.lrelu_slope, prelu);
  }
  if (cfg.dropout_p > 0.0 && phase == Phase::kTrain) {
    if (!dropout_rng) throw std::logic_error("dropout needs an rng");
    y = nn::dropout_forward(y, cfg.dropout_p, phase, *dropout_rng,
                            &cache.dropout_mask);
  }
  return y;
}

template <class S>
Mat<S> block_backward(const Mat<S>& dy_in, const TopologyConfig& cfg,
                      const nn::BnSite<S>& bn, const Vec<S>* prelu,
                      const BlockCache<S>& cache, Vec<S>& dgamma, Vec<S>& dbeta,
                      Vec<S>* dprelu) {
  Mat<S> dy = dy_in;
  if (cache.dropout_mask.size() > 0) dy = dy.cwiseProduct(cache.dropout_mask);
  if (cfg.bn_order == BnOrder::kAfterAct) {
    const Mat<S> da = nn::bn_backward(dy, cache.bn, bn, dgamma, dbeta);
    return nn::act_backward(da, cache.pre_act, cfg.activation, cfg.lrelu_slope,
                            prelu, dprelu);
  }
  const Mat<S> da = nn::act_backward(dy, cache.pre_act, cfg.activation,
                                     cfg.lrelu_slope, prelu, dprelu);
  return nn::bn_backward(da, cache.bn, bn, dgamma, dbeta);
}

}  // namespace detail

/// Whole-network forward pass on a time-major batch.  Fills every cache the
/// backward pass needs; at inference the caches still carry shapes but BN
/// uses running statistics and dropout is a no-op.
template <class S>
ForwardCache<S> network_forward(ParamSet<S>& p, const Frames<S>& batch,
                                Phase phase, Rng* dropout_rng = nullptr) {
  const TopologyConfig& cfg = p.cfg;
  if (batch.x.cols() != cfg.input_dim())
    throw std::invalid_argument("feature dimension mismatch");
  ForwardCache<S> fc;
  fc.batch = batch.batch;
  fc.phase = phase;

  fc.input = batch;
  if (cfg.input_bn)
    fc.input.x = nn::bn_forward(batch.x, p.input_bn, phase, cfg.bn_momentum,
                                cfg.bn_epsilon, &fc.input_bn);

  Frames<S> cur = fc.input;
  fc.frame_in.resize(p.frames.size());
  fc.frame_blocks.resize(p.frames.size());
  for (size_t i = 0; i < p.frames.size(); ++i) {
    const auto& spec = cfg.frame_layers[i];
    fc.frame_in[i] = cur;
    Frames<S> z = nn::conv_forward(cur, p.frames[i].w, p.frames[i].b,
                                   spec.taps(static_cast<int>(i)), spec.kernel);
    const Vec<S>* prelu =
        cfg.activation == Activation::kPrelu ? &p.frames[i].prelu : nullptr;
    z.x = detail::block_forward(z.x, cfg, p.frames[i].bn, prelu, phase,
                                dropout_rng, fc.frame_blocks[i]);
    cur = std::move(z);
  }

  if (cfg.pooling == PoolingKind::kStats) {
    fc.pooled = nn::stats_pool(cur, cfg.var_floor, &fc.stats_pool);
  } else {
    fc.pooled =
        nn::attention_pool(cur, p.attn, cfg.pooling, cfg.var_floor, &fc.attn_pool);
  }
  fc.pooled_final = fc.pooled;
  if (cfg.bn_after_pooling)
    fc.pooled_final = nn::bn_forward(fc.pooled, p.pool_bn, phase,
                                     cfg.bn_momentum, cfg.bn_epsilon, &fc.pool_bn);

  fc.seg1_in = fc.pooled_final;
  fc.embeddings = fc.seg1_in * p.segment1.w;
  fc.embeddings.rowwise() += p.segment1.b.transpose();
  {
    const Vec<S>* prelu =
        cfg.activation == Activation::kPrelu ? &p.segment1.prelu : nullptr;
    fc.seg1_out = detail::block_forward(fc.embeddings, cfg, p.segment1.bn, prelu,
                                        phase, dropout_rng, fc.seg1_block);
  }
  fc.seg2_in = fc.seg1_out;
  Mat<S> z2 = fc.seg2_in * p.segment2.w;
  z2.rowwise() += p.segment2.b.transpose();
  {
    const Vec<S>* prelu =
        cfg.activation == Activation::kPrelu ? &p.segment2.prelu : nullptr;
    fc.seg2_out = detail::block_forward(z2, cfg, p.segment2.bn, prelu, phase,
                                        dropout_rng, fc.seg2_block);
  }
  fc.logits = fc.seg2_out * p.softmax_w;
  fc.logits.rowwise() += p.softmax_b.transpose();
  return fc;
}

struct LossParts {
  double total = 0.0;
  double cross_entropy = 0.0;
  double l2 = 0.0;
};

/// Cross-entropy + L2 loss with gradients for every trainable tensor.
template <class S>
LossParts network_backward(ParamSet<S>& p, const ForwardCache<S>& fc,
                           std::span<const uint32_t> labels, ParamSet<S>& grads) {
  const TopologyConfig& cfg = p.cfg;
  Mat<S> dlogits;
  const S ce = nn::softmax_ce(fc.logits, labels, &dlogits);

  LossParts parts;
  parts.cross_entropy = static_cast<double>(ce);
  parts.l2 = static_cast<double>(l2_penalty(p, cfg.l2, &grads));
  parts.total = parts.cross_entropy + parts.l2;

  grads.softmax_w.noalias() += fc.seg2_out.transpose() * dlogits;
  grads.softmax_b += dlogits.colwise().sum().transpose();
  Mat<S> dy = dlogits * p.softmax_w.transpose();

  {
    const Vec<S>* prelu =
        cfg.activation == Activation::kPrelu ? &p.segment2.prelu : nullptr;
    Vec<S>* dprelu =
        cfg.activation == Activation::kPrelu ? &grads.segment2.prelu : nullptr;
    dy = detail::block_backward(dy, cfg, p.segment2.bn, prelu, fc.seg2_block,
                                grads.segment2.bn.gamma, grads.segment2.bn.beta,
                                dprelu);
  }
  grads.segment2.w.noalias() += fc.seg2_in.transpose() * dy;
  grads.segment2.b += dy.colwise().sum().transpose();
  dy = dy * p.segment2.w.transpose();

  {
    const Vec<S>* prelu =
        cfg.activation == Activation::kPrelu ? &p.segment1.prelu : nullptr;
    Vec<S>* dprelu =
        cfg.activation == Activation::kPrelu ? &grads.segment1.prelu : nullptr;
    dy = detail::block_backward(dy, cfg, p.segment1.bn, prelu, fc.seg1_block,
                                grads.segment1.bn.gamma, grads.segment1.bn.beta,
                                dprelu);
  }
  grads.segment1.w.noalias() += fc.seg1_in.transpose() * dy;
  grads.segment1.b += dy.colwise().sum().transpose();
  Mat<S> dpooled_final = dy * p.segment1.w.transpose();

  Mat<S> dpooled = dpooled_final;
  if (cfg.bn_after_pooling)
    dpooled = nn::bn_backward(dpooled_final, fc.pool_bn, p.pool_bn,
                              grads.pool_bn.gamma, grads.pool_bn.beta);

  Frames<S> dframes;
  if (cfg.pooling == PoolingKind::kStats) {
    dframes = nn::stats_pool_backward(dpooled, fc.stats_pool, cfg.var_floor);
  } else {
    dframes = nn::attention_pool_backward(dpooled, fc.attn_pool, p.attn,
                                          cfg.var_floor, grads.attn.w,
                                          grads.attn.b, grads.attn.v);
  }

  for (size_t idx = p.frames.size(); idx-- > 0;) {
    const auto& spec = cfg.frame_layers[idx];
    const Vec<S>* prelu =
        cfg.activation == Activation::kPrelu ? &p.frames[idx].prelu : nullptr;
    Vec<S>* dprelu =
        cfg.activation == Activation::kPrelu ? &grads.frames[idx].prelu : nullptr;
    dframes.x = detail::block_backward(dframes.x, cfg, p.frames[idx].bn, prelu,
                                       fc.frame_blocks[idx],
                                       grads.frames[idx].bn.gamma,
                                       grads.frames[idx].bn.beta, dprelu);
    dframes = nn::conv_backward(fc.frame_in[idx], dframes, p.frames[idx].w,
                                spec.taps(static_cast<int>(idx)), spec.kernel,
                                grads.frames[idx].w, grads.frames[idx].b);
  }

  if (cfg.input_bn) {
    nn::bn_backward(dframes.x, fc.input_bn, p.input_bn, grads.input_bn.gamma,
                    grads.input_bn.beta);
  }
  return parts;
}

/// Per-utterance embedding: inference forward over the whole utterance,
/// returning the segment1 affine output (pre-activation, pre-BN).
template <class S>
Vec<S> extract_embedding(ParamSet<S>& p, const Mat<S>& utt_feats) {
  if (utt_feats.rows() < p.cfg.receptive_field())
    throw std::runtime_error("too short: utterance shorter than the network context");
  Frames<S> frames;
  frames.batch = 1;
  frames.x = utt_feats;
  ForwardCache<S> fc = network_forward(p, frames, Phase::kInfer, nullptr);
  return fc.embeddings.row(0).transpose();
}

}  // namespace xvec
