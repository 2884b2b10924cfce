// tests/support/gradcheck_harness.hpp

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

// Central-difference oracle for the whole network at 64-bit precision.
// Piecewise-linear activations make a single step size unreliable when a
// pre-activation sits within h of a kink, so coordinates failing at the
// default step are re-checked at smaller steps; a genuine gradient bug fails
// at every step size.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "xvec/network.hpp"

namespace xvec::testsupport {

inline double gradcheck_loss(ParamSet<double>& p, const Frames<double>& batch,
                             const std::vector<uint32_t>& labels) {
  auto fc = network_forward(p, batch, Phase::kTrain, nullptr);
  const double ce = nn::softmax_ce<double>(
      fc.logits, std::span<const uint32_t>(labels), static_cast<Mat<double>*>(nullptr));
  return ce + l2_penalty<double>(p, p.cfg.l2, nullptr);
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  int64_t checked = 0;
};

inline GradCheckResult gradcheck_network(const TopologyConfig& cfg, uint64_t seed,
                                         int frames, int batch,
                                         double tolerance = 1e-4) {
  ParamSet<double> p = build_network<double>(cfg, seed);
  Frames<double> data;
  data.batch = batch;
  data.x.resize(static_cast<Eigen::Index>(frames) * batch, cfg.input_dim());
  Rng rng = Rng::derive(seed, "gradcheck_data");
  for (Eigen::Index i = 0; i < data.x.size(); ++i) data.x.data()[i] = rng.gaussian();
  std::vector<uint32_t> labels(static_cast<size_t>(batch));
  for (size_t i = 0; i < labels.size(); ++i)
    labels[i] = static_cast<uint32_t>(rng.uniform_int(0, cfg.n_classes - 1));

  auto fc = network_forward(p, data, Phase::kTrain, nullptr);
  ParamSet<double> grads = zeros_like(p);
  network_backward(p, fc, labels, grads);

  auto prefs = trainable_tensors(p);
  auto grefs = trainable_tensors(grads);
  GradCheckResult result;
  auto numeric_at = [&](size_t ti, Eigen::Index k, double h) {
    const double orig = prefs[ti].data[k];
    prefs[ti].data[k] = orig + h;
    const double lp = gradcheck_loss(p, data, labels);
    prefs[ti].data[k] = orig - h;
    const double lm = gradcheck_loss(p, data, labels);
    prefs[ti].data[k] = orig;
    return (lp - lm) / (2.0 * h);
  };
  auto rel_error = [](double num, double ana) {
    return std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
  };
  for (size_t ti = 0; ti < prefs.size(); ++ti) {
    for (Eigen::Index k = 0; k < prefs[ti].size; ++k) {
      const double ana = grefs[ti].data[k];
      double best = rel_error(numeric_at(ti, k, 1e-5), ana);
      for (double h : {3e-6, 1e-6, 3e-5}) {
        if (best <= tolerance) break;
        best = std::min(best, rel_error(numeric_at(ti, k, h), ana));
      }
      ++result.checked;
      if (best > result.max_rel_error) {
        result.max_rel_error = best;
        result.worst_tensor = prefs[ti].name;
      }
    }
  }
  return result;
}

/// The tiny topology used for gradient checks: five frame layers over 8-d
/// activations with contexts that fit T = 9.
inline TopologyConfig gradcheck_topology(PoolingKind pooling, Activation act,
                                         BnOrder order, bool input_bn,
                                         bool pool_bn) {
  TopologyConfig cfg;
  cfg.frame_layers = {{3, 8, 8, FrameMode::kCnn},
                      {3, 8, 8, FrameMode::kTdnn},
                      {3, 8, 8, FrameMode::kCnn},
                      {1, 8, 8, FrameMode::kCnn},
                      {1, 8, 16, FrameMode::kCnn}};
  cfg.pooling = pooling;
  cfg.attn_dim = 5;
  cfg.segment1_dim = 8;
  cfg.segment2_dim = 8;
  cfg.n_classes = 3;
  cfg.activation = act;
  cfg.bn_order = order;
  cfg.input_bn = input_bn;
  cfg.bn_after_pooling = pool_bn;
  cfg.dropout_p = 0.0;
  cfg.l2 = {1e-3, 2e-3, L2Scope::kAll};
  return cfg;
}

}  // namespace xvec::testsupport
