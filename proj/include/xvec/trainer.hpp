// include/xvec/trainer.hpp

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
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xvec/archive.hpp"
#include "xvec/network.hpp"
#include "xvec/tensor_file.hpp"

namespace xvec {

enum class OptKind { kAdam, kSgd };

inline std::string to_string(OptKind k) { return k == OptKind::kAdam ? "adam" : "sgd"; }
inline OptKind opt_kind_from_string(const std::string& s) {
  if (s == "adam") return OptKind::kAdam;
  if (s == "sgd") return OptKind::kSgd;
  throw std::invalid_argument("unknown optimizer: " + s);
}

/// Adam / SGD state.  Moment vectors are aligned with the pinned trainable
/// tensor order.
template <class S>
struct OptimizerState {
  OptKind kind = OptKind::kAdam;
  int64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::string> names;
  std::vector<Vec<S>> m, v;

  static OptimizerState init(OptKind kind, const std::vector<TensorRef<S>>& refs) {
    OptimizerState st;
    st.kind = kind;
    for (const auto& r : refs) {
      st.names.push_back(r.name);
      st.m.push_back(Vec<S>::Zero(r.size));
      st.v.push_back(Vec<S>::Zero(r.size));
    }
    return st;
  }
};

struct TrainConfig {
  int epochs = 3;
  double lr_start = 0.001;
  double lr_end = 0.0001;
  OptKind optimizer = OptKind::kAdam;
  uint64_t seed = 0;
  std::vector<std::string> archives;
  std::string cv_archive;             // optional held-out archive
  double feature_noise_scale = 0.0;   // 0 disables the Gaussian feature noise
  std::string input_norm = "none";    // none | mean | mean_var
  int norm_subset_batches = 50;
  std::string out_dir;
  int checkpoint_every = 0;           // extra checkpoints every N steps
  std::string resume;                 // checkpoint path

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(lr_start >= lr_end && lr_end > 0.0))
      throw std::invalid_argument("need lr_start >= lr_end > 0");
    if (archives.empty()) throw std::invalid_argument("no training archives");
    if (input_norm != "none" && input_norm != "mean" && input_norm != "mean_var")
      throw std::invalid_argument("bad input_norm: " + input_norm);
  }
};

/// Linear decay from lr_start to lr_end over total_steps; clamps past the
/// end.
inline double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (step < 0) throw std::invalid_argument("negative step");
  if (step > total_steps) return cfg.lr_end;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
}

/// One optimizer update over aligned (parameter, gradient) tensor lists.
/// Non-finite gradients abort with the offending tensor named.
template <class S>
void optimizer_step(std::vector<TensorRef<S>>& params,
                    const std::vector<TensorRef<S>>& grads,
                    OptimizerState<S>& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("optimizer state misaligned");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& pr = params[i];
    const auto& gr = grads[i];
    if (pr.size != gr.size) throw std::invalid_argument("gradient shape mismatch");
    Eigen::Map<Vec<S>> w(pr.data, pr.size);
    Eigen::Map<const Vec<S>> g(gr.data, gr.size);
    if (!g.allFinite())
      throw std::runtime_error("diverged: non-finite gradient in " + pr.name);
    if (state.kind == OptKind::kSgd) {
      w -= static_cast<S>(lr) * g;
      continue;
    }
    auto& m = state.m[i];
    auto& v = state.v[i];
    const S b1 = static_cast<S>(state.beta1), b2 = static_cast<S>(state.beta2);
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
    const S scale = static_cast<S>(lr / bc1);
    const S inv_bc2 = static_cast<S>(1.0 / bc2);
    w.array() -= scale * m.array() /
                 ((v.array() * inv_bc2).sqrt() + static_cast<S>(state.eps));
  }
}

// ---------------------------------------------------------------------------
// Checkpoints.

/// Writes parameters, BN running stats, optimizer moments and the input
/// normalization stats into one container.  f64 runs keep full precision.
template <class S>
void checkpoint_save(const std::string& path, ParamSet<S>& params,
                     const OptimizerState<S>* opt, uint64_t seed, int64_t step,
                     const std::optional<NormStats>& input_norm_stats,
                     const std::string& input_norm_mode) {
  TensorFile tf;
  tf.dtype = sizeof(S) == 4 ? "f32" : "f64";
  tf.meta.emplace_back("kind", "checkpoint");
  tf.meta.emplace_back("step", std::to_string(step));
  tf.meta.emplace_back("rng_seed", std::to_string(seed));
  bool bn_ready = true;
  for (auto site : {&params.segment1.bn, &params.segment2.bn})
    bn_ready = bn_ready && site->initialized;
  tf.meta.emplace_back("bn_initialized", bn_ready ? "1" : "0");
  tf.meta.emplace_back("input_norm", input_norm_mode);
  if (opt) tf.meta.emplace_back("optimizer", to_string(opt->kind));
  tf.meta.emplace_back("topology", topology_to_json(params.cfg).dump());

  auto push = [&](const TensorRef<S>& r) {
    NamedTensor t;
    t.name = r.name;
    t.dims = r.cols == 1 ? std::vector<int>{r.rows} : std::vector<int>{r.rows, r.cols};
    t.data.assign(r.data, r.data + r.size);
    tf.tensors.push_back(std::move(t));
  };
  for (const auto& r : trainable_tensors(params)) push(r);
  for (const auto& r : state_tensors(params)) push(r);
  if (opt) {
    for (size_t i = 0; i < opt->names.size(); ++i) {
      NamedTensor m{"opt.m." + opt->names[i],
                    {static_cast<int>(opt->m[i].size())},
                    std::vector<double>(opt->m[i].data(), opt->m[i].data() + opt->m[i].size())};
      NamedTensor v{"opt.v." + opt->names[i],
                    {static_cast<int>(opt->v[i].size())},
                    std::vector<double>(opt->v[i].data(), opt->v[i].data() + opt->v[i].size())};
      tf.tensors.push_back(std::move(m));
      tf.tensors.push_back(std::move(v));
    }
  }
  if (input_norm_stats) {
    NamedTensor mean{"input_norm.mean",
                     {static_cast<int>(input_norm_stats->mean.size())},
                     std::vector<double>(input_norm_stats->mean.data(),
                                         input_norm_stats->mean.data() +
                                             input_norm_stats->mean.size())};
    NamedTensor sd{"input_norm.std",
                   {static_cast<int>(input_norm_stats->std.size())},
                   std::vector<double>(input_norm_stats->std.data(),
                                       input_norm_stats->std.data() +
                                           input_norm_stats->std.size())};
    tf.tensors.push_back(std::move(mean));
    tf.tensors.push_back(std::move(sd));
  }
  tf.save(path);
}

template <class S>
struct Checkpoint {
  ParamSet<S> params;
  OptimizerState<S> opt;
  bool has_opt = false;
  uint64_t seed = 0;
  int64_t step = 0;
  std::optional<NormStats> input_norm_stats;
  std::string input_norm_mode = "none";
};

template <class S>
Checkpoint<S> checkpoint_load(const std::string& path) {
  const TensorFile tf = TensorFile::load(path);
  Checkpoint<S> ck;
  const std::string* topo = tf.find_meta("topology");
  if (!topo) throw std::runtime_error("checkpoint missing topology: " + path);
  TopologyConfig cfg = topology_from_json(nlohmann::json::parse(*topo));
  ck.params = build_network<S>(cfg, 0);
  if (const std::string* s = tf.find_meta("step")) ck.step = std::stoll(*s);
  if (const std::string* s = tf.find_meta("rng_seed")) ck.seed = std::stoull(*s);
  if (const std::string* s = tf.find_meta("input_norm")) ck.input_norm_mode = *s;
  const bool bn_ready = [&] {
    const std::string* s = tf.find_meta("bn_initialized");
    return s && *s == "1";
  }();

  auto restore = [&](const TensorRef<S>& r) {
    const NamedTensor* t = tf.find(r.name);
    if (!t) throw std::runtime_error("checkpoint missing tensor " + r.name);
    if (t->size() != r.size) {
      std::ostringstream msg;
      msg << "shape mismatch for tensor " << r.name << ": checkpoint has "
          << t->size() << " values, topology expects " << r.size;
      throw std::runtime_error(msg.str());
    }
    for (Eigen::Index i = 0; i < r.size; ++i)
      r.data[i] = static_cast<S>(t->data[static_cast<size_t>(i)]);
  };
  for (auto& r : trainable_tensors(ck.params)) restore(r);
  for (auto& r : state_tensors(ck.params)) restore(r);
  if (bn_ready) {
    auto mark = [](nn::BnSite<S>& s) { s.initialized = true; };
    if (cfg.input_bn) mark(ck.params.input_bn);
    for (auto& f : ck.params.frames) mark(f.bn);
    if (cfg.bn_after_pooling) mark(ck.params.pool_bn);
    mark(ck.params.segment1.bn);
    mark(ck.params.segment2.bn);
  }

  auto refs = trainable_tensors(ck.params);
  if (tf.find("opt.m." + refs.front().name)) {
    OptKind kind = OptKind::kAdam;
    if (const std::string* s = tf.find_meta("optimizer"))
      kind = opt_kind_from_string(*s);
    ck.opt = OptimizerState<S>::init(kind, refs);
    ck.opt.step = ck.step;
    for (size_t i = 0; i < refs.size(); ++i) {
      const NamedTensor* m = tf.find("opt.m." + refs[i].name);
      const NamedTensor* v = tf.find("opt.v." + refs[i].name);
      if (!m || !v) throw std::runtime_error("checkpoint missing optimizer moments");
      for (Eigen::Index k = 0; k < refs[i].size; ++k) {
        ck.opt.m[i](k) = static_cast<S>(m->data[static_cast<size_t>(k)]);
        ck.opt.v[i](k) = static_cast<S>(v->data[static_cast<size_t>(k)]);
      }
    }
    ck.has_opt = true;
  }
  if (const NamedTensor* mean = tf.find("input_norm.mean")) {
    const NamedTensor* sd = tf.find("input_norm.std");
    if (!sd) throw std::runtime_error("checkpoint missing input_norm.std");
    NormStats ns;
    ns.mean = Eigen::Map<const Eigen::VectorXd>(mean->data.data(),
                                                static_cast<Eigen::Index>(mean->data.size()));
    ns.std = Eigen::Map<const Eigen::VectorXd>(sd->data.data(),
                                               static_cast<Eigen::Index>(sd->data.size()));
    ck.input_norm_stats = ns;
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainReportLine {
  int epoch = 0;
  std::string archive;
  int64_t step = 0;
  double loss = 0.0;      // total (CE + L2)
  double ce = 0.0;
  double acc = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<TrainReportLine> lines;
  std::vector<double> cv_accuracy;  // one entry per epoch when a CV archive is set
  double initial_ce = 0.0;          // mean CE over the first archive pass
  double final_ce = 0.0;            // mean CE over the last archive pass
  int64_t total_steps = 0;

  std::string to_text() const {
    std::ostringstream out;
    out << "# epoch archive step loss acc lr\n";
    for (const auto& l : lines)
      out << l.epoch << ' ' << l.archive << ' ' << l.step << ' ' << l.loss
          << ' ' << l.acc << ' ' << l.lr << '\n';
    for (size_t e = 0; e < cv_accuracy.size(); ++e)
      out << "# cv epoch " << e + 1 << " acc " << cv_accuracy[e] << '\n';
    return out.str();
  }
};

namespace detail {

/// Example-major archive batch -> time-major frames in the training scalar.
template <class S>
Frames<S> batch_to_frames(const ArchiveBatch& b) {
  Frames<S> f;
  f.batch = b.batch;
  f.x.resize(static_cast<Eigen::Index>(b.frames) * b.batch, b.dim);
  for (int t = 0; t < b.frames; ++t)
    for (int i = 0; i < b.batch; ++i)
      for (int d = 0; d < b.dim; ++d)
        f.x(static_cast<Eigen::Index>(t) * b.batch + i, d) =
            static_cast<S>(b.at(i, t, d));
  return f;
}

template <class S>
void apply_input_norm(Frames<S>& f, const NormStats& stats, const std::string& mode) {
  if (mode == "none") return;
  for (Eigen::Index c = 0; c < f.x.cols(); ++c) {
    const S mu = static_cast<S>(stats.mean(c));
    f.x.col(c).array() -= mu;
    if (mode == "mean_var") f.x.col(c) /= static_cast<S>(stats.std(c));
  }
}

template <class S>
double batch_accuracy(const Mat<S>& logits, const std::vector<uint32_t>& labels) {
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index argmax = 0;
    logits.row(i).maxCoeff(&argmax);
    if (static_cast<uint32_t>(argmax) == labels[static_cast<size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

inline NormStats estimate_archive_stats(const std::string& archive, int max_batches) {
  ArchiveReader reader(archive);
  ArchiveBatch b;
  int used = 0;
  Eigen::VectorXd sum, sumsq;
  int64_t total = 0;
  while (used < max_batches && reader.next(b)) {
    if (sum.size() == 0) {
      sum = Eigen::VectorXd::Zero(b.dim);
      sumsq = Eigen::VectorXd::Zero(b.dim);
    }
    for (int i = 0; i < b.batch; ++i)
      for (int t = 0; t < b.frames; ++t)
        for (int d = 0; d < b.dim; ++d) {
          const double x = b.at(i, t, d);
          sum(d) += x;
          sumsq(d) += x * x;
        }
    total += static_cast<int64_t>(b.batch) * b.frames;
    ++used;
  }
  if (total < 2) throw std::runtime_error("insufficient data: need >= 2 frames");
  NormStats st;
  st.mean = sum / static_cast<double>(total);
  Eigen::VectorXd var =
      sumsq / static_cast<double>(total) - st.mean.cwiseProduct(st.mean);
  st.std = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-8);
  return st;
}

}  // namespace detail

/// Runs the optimization loop: `epochs` passes over the archives (order
/// shuffled per epoch), linear LR decay, per-epoch checkpoints and an
/// optional held-out accuracy probe.  Fully deterministic given the seed.
template <class S>
TrainReport train(const TrainConfig& cfg, const TopologyConfig& topo_in) {
  cfg.validate();
  TopologyConfig topo = topo_in;
  topo.validate();

  // Batch counts up front, for the LR schedule denominator.
  int64_t batches_per_epoch = 0;
  for (const auto& path : cfg.archives) {
    ArchiveReader reader(path);
    batches_per_epoch += reader.n_batches();
  }
  if (batches_per_epoch == 0) throw std::runtime_error("archives contain no batches");
  const int64_t total_steps = batches_per_epoch * cfg.epochs;

  std::optional<NormStats> norm_stats;
  if (cfg.input_norm != "none" || cfg.feature_noise_scale > 0.0)
    norm_stats = detail::estimate_archive_stats(cfg.archives.front(),
                                                cfg.norm_subset_batches);

  ParamSet<S> params;
  OptimizerState<S> opt;
  int64_t start_step = 0;
  if (!cfg.resume.empty()) {
    Checkpoint<S> ck = checkpoint_load<S>(cfg.resume);
    params = std::move(ck.params);
    if (!ck.has_opt) throw std::runtime_error("resume checkpoint lacks optimizer state");
    opt = std::move(ck.opt);
    start_step = ck.step;
    if (ck.input_norm_stats) norm_stats = ck.input_norm_stats;
  } else {
    params = build_network<S>(topo, cfg.seed);
    opt = OptimizerState<S>::init(cfg.optimizer, trainable_tensors(params));
  }
  auto param_refs = trainable_tensors(params);

  TrainReport report;
  report.total_steps = total_steps;
  const std::string report_path = cfg.out_dir + "/train_report.txt";
  std::string last_good_checkpoint;

  auto save_ckpt = [&](const std::string& name, int64_t step) {
    if (cfg.out_dir.empty()) return;
    const std::string path = cfg.out_dir + "/" + name;
    checkpoint_save(path, params, &opt, cfg.seed, step, norm_stats, cfg.input_norm);
    last_good_checkpoint = path;
  };

  int64_t step = 0;
  bool first_archive_pass = true;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(cfg.archives.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng order_rng = Rng::derive(cfg.seed, "epoch_order", static_cast<uint64_t>(epoch));
    order_rng.shuffle(order.begin(), order.end());

    for (size_t a : order) {
      const std::string& archive = cfg.archives[a];
      ArchiveReader reader(archive);
      ArchiveBatch raw;
      double sum_loss = 0.0, sum_ce = 0.0, sum_acc = 0.0;
      int64_t n_batches = 0;
      double lr = cfg.lr_start;
      while (reader.next(raw)) {
        if (step < start_step) {
          ++step;
          continue;
        }
        Frames<S> frames = detail::batch_to_frames<S>(raw);
        if (norm_stats) detail::apply_input_norm(frames, *norm_stats, cfg.input_norm);
        if (cfg.feature_noise_scale > 0.0) {
          Rng noise_rng = Rng::derive(cfg.seed, "noise", static_cast<uint64_t>(step));
          for (Eigen::Index r = 0; r < frames.x.rows(); ++r)
            for (Eigen::Index c = 0; c < frames.x.cols(); ++c)
              frames.x(r, c) += static_cast<S>(cfg.feature_noise_scale *
                                               norm_stats->std(c) * noise_rng.gaussian());
        }
        Rng dropout_rng = Rng::derive(cfg.seed, "dropout", static_cast<uint64_t>(step));
        ForwardCache<S> fc = network_forward(params, frames, Phase::kTrain,
                                             &dropout_rng);
        ParamSet<S> grads = zeros_like(params);
        const LossParts loss = network_backward(params, fc, raw.labels, grads);
        if (!std::isfinite(loss.total)) {
          std::ostringstream msg;
          msg << "diverged: non-finite loss at step " << step;
          if (!last_good_checkpoint.empty())
            msg << " (last good checkpoint: " << last_good_checkpoint << ")";
          throw std::runtime_error(msg.str());
        }
        auto grad_refs = trainable_tensors(grads);
        lr = lr_at(step, total_steps, cfg);
        optimizer_step(param_refs, grad_refs, opt, lr);
        sum_loss += loss.total;
        sum_ce += loss.cross_entropy;
        sum_acc += detail::batch_accuracy(fc.logits, raw.labels);
        ++n_batches;
        ++step;
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0)
          save_ckpt("checkpoint_step" + std::to_string(step) + ".xten", step);
      }
      if (n_batches > 0) {
        TrainReportLine line;
        line.epoch = epoch + 1;
        line.archive = archive;
        line.step = step;
        line.loss = sum_loss / static_cast<double>(n_batches);
        line.ce = sum_ce / static_cast<double>(n_batches);
        line.acc = sum_acc / static_cast<double>(n_batches);
        line.lr = lr;
        report.lines.push_back(line);
        if (first_archive_pass) {
          report.initial_ce = line.ce;
          first_archive_pass = false;
        }
        report.final_ce = line.ce;
      }
    }

    if (!cfg.cv_archive.empty()) {
      ArchiveReader reader(cfg.cv_archive);
      ArchiveBatch raw;
      double sum_acc = 0.0;
      int64_t n = 0;
      while (reader.next(raw)) {
        Frames<S> frames = detail::batch_to_frames<S>(raw);
        if (norm_stats) detail::apply_input_norm(frames, *norm_stats, cfg.input_norm);
        ForwardCache<S> fc = network_forward(params, frames, Phase::kInfer, nullptr);
        sum_acc += detail::batch_accuracy(fc.logits, raw.labels);
        ++n;
      }
      report.cv_accuracy.push_back(n > 0 ? sum_acc / static_cast<double>(n) : 0.0);
    }
    save_ckpt("checkpoint_epoch" + std::to_string(epoch + 1) + ".xten", step);
  }
  save_ckpt("checkpoint_final.xten", step);

  if (!cfg.out_dir.empty()) {
    std::ofstream out(report_path);
    if (out) out << report.to_text();
  }
  return report;
}

}  // namespace xvec
