// include/xvec/topology.hpp

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

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace xvec {

enum class FrameMode { kTdnn, kCnn };
enum class PoolingKind { kStats, kAttnShared, kAttnSplit };
enum class Activation { kRelu, kLrelu, kPrelu };
enum class BnOrder { kAfterAct, kBeforeAct };
enum class L2Scope { kSegmentOnly, kAll };

struct FrameLayerSpec {
  int kernel = 1;
  int in_dim = 0;
  int out_dim = 0;
  FrameMode mode = FrameMode::kCnn;

  /// Tap offsets inside the context window.  TDNN layers past the first use
  /// only the first, middle and last frame of the window; kernel-1 layers and
  /// the first layer always use every tap.
  std::vector<int> taps(int layer_index) const {
    std::vector<int> out;
    if (mode == FrameMode::kTdnn && layer_index > 0 && kernel > 2) {
      out = {0, (kernel - 1) / 2, kernel - 1};
    } else {
      out.resize(static_cast<size_t>(kernel));
      for (int i = 0; i < kernel; ++i) out[static_cast<size_t>(i)] = i;
    }
    return out;
  }
};

/// L2 weight-decay configuration.  The embedding layer gets its own, smaller
/// coefficient; scope selects whether frame-level weights are penalized too.
struct L2Config {
  double beta_embedding = 0.00002;
  double beta_segment = 0.0002;
  L2Scope scope = L2Scope::kSegmentOnly;
};

struct TopologyConfig {
  std::vector<FrameLayerSpec> frame_layers;
  PoolingKind pooling = PoolingKind::kStats;
  int attn_dim = 128;
  int segment1_dim = 512;
  int segment2_dim = 512;
  int n_classes = 0;
  Activation activation = Activation::kRelu;
  double lrelu_slope = 0.2;
  double prelu_init = 0.2;
  BnOrder bn_order = BnOrder::kAfterAct;
  bool bn_after_pooling = false;
  bool input_bn = false;
  double dropout_p = 0.0;
  L2Config l2;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
  double var_floor = 1e-10;

  int input_dim() const {
    return frame_layers.empty() ? 0 : frame_layers.front().in_dim;
  }
  int frame_out_dim() const {
    return frame_layers.empty() ? 0 : frame_layers.back().out_dim;
  }
  /// Pooling emits (mean, std): stats/shared double the frame output; the
  /// split variant halves it into keys/values first, so the width is kept.
  int pooled_dim() const {
    return pooling == PoolingKind::kAttnSplit ? frame_out_dim()
                                              : 2 * frame_out_dim();
  }
  /// Frames consumed by the valid convolutions.
  int receptive_field() const {
    int total = 1;
    for (const auto& l : frame_layers) total += l.kernel - 1;
    return total;
  }

  void validate() const {
    if (frame_layers.empty()) throw std::invalid_argument("no frame layers");
    if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
    for (size_t i = 0; i < frame_layers.size(); ++i) {
      const auto& l = frame_layers[i];
      if (l.kernel < 1 || l.in_dim < 1 || l.out_dim < 1) {
        std::ostringstream msg;
        msg << "frame layer " << i + 1 << " has non-positive dims";
        throw std::invalid_argument(msg.str());
      }
      if (i > 0 && frame_layers[i - 1].out_dim != l.in_dim) {
        std::ostringstream msg;
        msg << "dimension mismatch: frame layer " << i << " out "
            << frame_layers[i - 1].out_dim << " != frame layer " << i + 1
            << " in " << l.in_dim;
        throw std::invalid_argument(msg.str());
      }
    }
    if (pooling == PoolingKind::kAttnSplit && frame_out_dim() % 2 != 0)
      throw std::invalid_argument(
          "attn_split needs an even final frame dimension");
    if (pooling != PoolingKind::kStats && attn_dim < 1)
      throw std::invalid_argument("attn_dim must be >= 1");
    if (segment1_dim < 1 || segment2_dim < 1)
      throw std::invalid_argument("segment dims must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      throw std::invalid_argument("dropout_p must be in [0, 1)");
    if (l2.beta_embedding < 0.0 || l2.beta_segment < 0.0)
      throw std::invalid_argument("l2 betas must be >= 0");
  }
};

/// Table-style default: five frame layers (kernels 5,5,7,1,1) into stats
/// pooling and two 512-d segment layers.  With split attention the final
/// frame layer is doubled and halved into keys/values.
inline TopologyConfig default_topology(int n_classes, int feat_dim = 23) {
  TopologyConfig cfg;
  cfg.frame_layers = {{5, feat_dim, 512, FrameMode::kCnn},
                      {5, 512, 512, FrameMode::kCnn},
                      {7, 512, 512, FrameMode::kCnn},
                      {1, 512, 512, FrameMode::kCnn},
                      {1, 512, 1536, FrameMode::kCnn}};
  cfg.n_classes = n_classes;
  return cfg;
}

// --- enum <-> string -------------------------------------------------------

inline std::string to_string(FrameMode m) {
  return m == FrameMode::kTdnn ? "tdnn" : "cnn";
}
inline std::string to_string(PoolingKind p) {
  switch (p) {
    case PoolingKind::kStats: return "stats";
    case PoolingKind::kAttnShared: return "attn_shared";
    default: return "attn_split";
  }
}
inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kLrelu: return "lrelu";
    default: return "prelu";
  }
}
inline std::string to_string(BnOrder o) {
  return o == BnOrder::kAfterAct ? "after_act" : "before_act";
}
inline std::string to_string(L2Scope s) {
  return s == L2Scope::kSegmentOnly ? "segment_only" : "all";
}

inline FrameMode frame_mode_from_string(const std::string& s) {
  if (s == "tdnn") return FrameMode::kTdnn;
  if (s == "cnn") return FrameMode::kCnn;
  throw std::invalid_argument("unknown frame mode: " + s);
}
inline PoolingKind pooling_from_string(const std::string& s) {
  if (s == "stats") return PoolingKind::kStats;
  if (s == "attn_shared") return PoolingKind::kAttnShared;
  if (s == "attn_split") return PoolingKind::kAttnSplit;
  throw std::invalid_argument("unknown pooling: " + s);
}
inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "lrelu") return Activation::kLrelu;
  if (s == "prelu") return Activation::kPrelu;
  throw std::invalid_argument("unknown activation: " + s);
}
inline BnOrder bn_order_from_string(const std::string& s) {
  if (s == "after_act") return BnOrder::kAfterAct;
  if (s == "before_act") return BnOrder::kBeforeAct;
  throw std::invalid_argument("unknown bn order: " + s);
}
inline L2Scope l2_scope_from_string(const std::string& s) {
  if (s == "segment_only") return L2Scope::kSegmentOnly;
  if (s == "all") return L2Scope::kAll;
  throw std::invalid_argument("unknown l2 scope: " + s);
}

inline nlohmann::json topology_to_json(const TopologyConfig& cfg) {
  nlohmann::json j;
  std::vector<int> kernels, dims;
  std::vector<std::string> modes;
  for (const auto& l : cfg.frame_layers) {
    kernels.push_back(l.kernel);
    dims.push_back(l.out_dim);
    modes.push_back(to_string(l.mode));
  }
  j["feat_dim"] = cfg.input_dim();
  j["frame_kernels"] = kernels;
  j["frame_dims"] = dims;
  j["frame_mode"] = modes;
  j["pooling"] = to_string(cfg.pooling);
  j["attn_dim"] = cfg.attn_dim;
  j["segment1_dim"] = cfg.segment1_dim;
  j["segment2_dim"] = cfg.segment2_dim;
  j["n_classes"] = cfg.n_classes;
  j["activation"] = to_string(cfg.activation);
  j["lrelu_slope"] = cfg.lrelu_slope;
  j["prelu_init"] = cfg.prelu_init;
  j["bn_order"] = to_string(cfg.bn_order);
  j["bn_after_pooling"] = cfg.bn_after_pooling;
  j["input_bn"] = cfg.input_bn;
  j["dropout"] = cfg.dropout_p;
  j["l2"] = {{"beta_embedding", cfg.l2.beta_embedding},
             {"beta_segment", cfg.l2.beta_segment},
             {"scope", to_string(cfg.l2.scope)}};
  j["bn_momentum"] = cfg.bn_momentum;
  j["bn_epsilon"] = cfg.bn_epsilon;
  return j;
}

inline TopologyConfig topology_from_json(const nlohmann::json& j) {
  TopologyConfig cfg;
  const int feat_dim = j.value("feat_dim", 23);
  const auto kernels = j.value("frame_kernels", std::vector<int>{5, 5, 7, 1, 1});
  cfg.pooling = pooling_from_string(j.value("pooling", std::string("stats")));
  std::vector<int> dims;
  if (j.contains("frame_dims") && !j.at("frame_dims").is_null()) {
    dims = j.at("frame_dims").get<std::vector<int>>();
  } else {
    dims.assign(kernels.size(), 512);
    // Split attention doubles the layer ahead of pooling.
    dims.back() = cfg.pooling == PoolingKind::kAttnSplit ? 3072 : 1536;
  }
  if (dims.size() != kernels.size())
    throw std::invalid_argument("frame_kernels/frame_dims length mismatch");
  std::vector<std::string> modes;
  if (j.contains("frame_mode")) {
    const auto& fm = j.at("frame_mode");
    if (fm.is_string()) {
      modes.assign(kernels.size(), fm.get<std::string>());
    } else {
      modes = fm.get<std::vector<std::string>>();
    }
  } else {
    modes.assign(kernels.size(), "cnn");
  }
  if (modes.size() != kernels.size())
    throw std::invalid_argument("frame_mode length mismatch");
  int in_dim = feat_dim;
  for (size_t i = 0; i < kernels.size(); ++i) {
    FrameLayerSpec spec;
    spec.kernel = kernels[i];
    spec.in_dim = in_dim;
    spec.out_dim = dims[i];
    spec.mode = frame_mode_from_string(modes[i]);
    in_dim = spec.out_dim;
    cfg.frame_layers.push_back(spec);
  }
  cfg.attn_dim = j.value("attn_dim", 128);
  cfg.segment1_dim = j.value("segment1_dim", 512);
  cfg.segment2_dim = j.value("segment2_dim", 512);
  cfg.n_classes = j.value("n_classes", 0);
  cfg.activation = activation_from_string(j.value("activation", std::string("relu")));
  cfg.lrelu_slope = j.value("lrelu_slope", 0.2);
  cfg.prelu_init = j.value("prelu_init", 0.2);
  cfg.bn_order = bn_order_from_string(j.value("bn_order", std::string("after_act")));
  cfg.bn_after_pooling = j.value("bn_after_pooling", false);
  cfg.input_bn = j.value("input_bn", false);
  cfg.dropout_p = j.value("dropout", 0.0);
  if (j.contains("l2")) {
    const auto& l2 = j.at("l2");
    cfg.l2.beta_embedding = l2.value("beta_embedding", 0.00002);
    cfg.l2.beta_segment = l2.value("beta_segment", 0.0002);
    cfg.l2.scope = l2_scope_from_string(l2.value("scope", std::string("segment_only")));
  }
  cfg.bn_momentum = j.value("bn_momentum", 0.9);
  cfg.bn_epsilon = j.value("bn_epsilon", 1e-5);
  return cfg;
}

}  // namespace xvec
