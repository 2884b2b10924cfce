// include/xvec/config.hpp

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

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace xvec {

using Json = nlohmann::json;

/// Every tunable of the pipeline with its default.  Command-line --set
/// overrides address these values by dotted path.
inline Json default_config() {
  return Json{
      {"seed", 1234},
      {"corpus",
       {{"n_speakers", 200},
        {"utts_per_speaker", 30},
        {"dur_min_s", 1.8},
        {"dur_max_s", 2.6},
        {"difficulty", 0.3},
        {"sample_rate", 8000}}},
      {"features",
       {{"n_mfcc", 23},
        {"n_mels", 23},
        {"window_ms", 25.0},
        {"shift_ms", 10.0},
        {"n_fft", 256},
        {"preemphasis", 0.97},
        {"waveform_scale", 32768.0},
        {"cmn_window", 300},
        {"apply_vad", true},
        {"vad",
         {{"energy_threshold", 5.5},
          {"energy_mean_scale", 0.5},
          {"context", 2}}}}},
      {"augment",
       {{"copies", 2},
        {"methods", Json::array({"reverb", "babble", "music", "noise"})},
        {"babble_k_min", 3},
        {"babble_k_max", 7},
        {"babble_snr", Json::array({13.0, 20.0})},
        {"music_snr", Json::array({5.0, 15.0})},
        {"noise_snr", Json::array({0.0, 15.0})},
        {"noise_interval_s", 1.0},
        {"rir_decay_min_s", 0.1},
        {"rir_decay_max_s", 0.5},
        {"pool_size", 48},
        {"pool_clip_s", 3.0}}},
      {"archive",
       {{"batch_size", 64},
        {"chunk_min", 200},
        {"chunk_max", 400},
        {"n_archives", 4},
        {"chunks_per_utt", 1},
        {"min_chunks_per_speaker", 4}}},
      {"network",
       {{"frame_kernels", Json::array({5, 5, 7, 1, 1})},
        {"frame_dims", nullptr},  // null -> per-pooling default widths
        {"frame_mode", "cnn"},
        {"pooling", "stats"},
        {"attn_dim", 128},
        {"segment1_dim", 512},
        {"segment2_dim", 512},
        {"activation", "relu"},
        {"lrelu_slope", 0.2},
        {"prelu_init", 0.2},
        {"bn_order", "after_act"},
        {"bn_after_pooling", false},
        {"input_bn", false},
        {"dropout", 0.0},
        {"l2",
         {{"beta_embedding", 0.00002},
          {"beta_segment", 0.0002},
          {"scope", "segment_only"}}}}},
      {"train",
       {{"epochs", 3},
        {"lr_start", 0.001},
        {"lr_end", 0.0001},
        {"optimizer", "adam"},
        {"precision", "f32"},
        {"feature_noise_scale", 0.0},
        {"input_norm", "none"},
        {"norm_subset_batches", 50},
        {"checkpoint_every", 0},
        {"cv_archive", ""},
        {"resume", ""}}},
      {"backend",
       {{"length_norm", true},
        {"plda_iters", 15},
        {"plda_train_max", 4000},
        {"scoring", "plda"},
        {"adapt_within", 0.75},
        {"adapt_between", 0.25}}},
      {"eval", {{"p_target", 0.01}, {"c_miss", 1.0}, {"c_fa", 1.0}}},
      {"eval_corpus", {{"n_speakers", 40}, {"utts_per_speaker", 10}}}};
}

namespace detail {

inline void flatten_keys(const Json& j, const std::string& prefix,
                         std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten_keys(*it, path, out);
    } else {
      out.push_back(path);
    }
  }
}

inline void deep_merge(Json& base, const Json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      deep_merge(base[it.key()], *it);
    } else {
      base[it.key()] = *it;
    }
  }
}

}  // namespace detail

inline std::vector<std::string> valid_config_keys() {
  std::vector<std::string> keys;
  detail::flatten_keys(default_config(), "", keys);
  return keys;
}

/// Applies one "dotted.path=value" override.  The path must already exist in
/// the config; unknown keys list the valid ones.  Values parse as JSON when
/// possible and fall back to plain strings.
inline void apply_override(Json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("--set expects key=value, got: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value_str = assignment.substr(eq + 1);

  std::vector<std::string> parts;
  std::istringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw std::invalid_argument("empty --set key");

  Json* node = &cfg;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) {
      std::ostringstream msg;
      msg << "unknown config key '" << path << "'; valid keys:";
      for (const auto& k : valid_config_keys()) msg << ' ' << k;
      throw std::invalid_argument(msg.str());
    }
    node = &(*node)[parts[i]];
  }
  if (!node->contains(parts.back())) {
    std::ostringstream msg;
    msg << "unknown config key '" << path << "'; valid keys:";
    for (const auto& k : valid_config_keys()) msg << ' ' << k;
    throw std::invalid_argument(msg.str());
  }
  Json value;
  try {
    value = Json::parse(value_str);
  } catch (const Json::parse_error&) {
    value = value_str;  // plain string
  }
  (*node)[parts.back()] = value;
}

/// defaults <- optional file <- --set overrides, in that order.
inline Json load_config(const std::string& config_path,
                        const std::vector<std::string>& overrides) {
  Json cfg = default_config();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config: " + config_path);
    Json file_cfg;
    try {
      in >> file_cfg;
    } catch (const Json::parse_error& e) {
      throw std::runtime_error("bad JSON in " + config_path + ": " + e.what());
    }
    detail::deep_merge(cfg, file_cfg);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

inline void dump_config(const Json& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << cfg.dump(2) << '\n';
}

}  // namespace xvec
