// include/xvec/pipeline.hpp

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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "xvec/archive.hpp"
#include "xvec/augment.hpp"
#include "xvec/backend.hpp"
#include "xvec/config.hpp"
#include "xvec/features.hpp"
#include "xvec/metrics.hpp"
#include "xvec/network.hpp"
#include "xvec/plda.hpp"
#include "xvec/speaker_sim.hpp"
#include "xvec/trainer.hpp"
#include "xvec/wave.hpp"

namespace xvec {

struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  std::string wav_path;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    if (!(ss >> e.utt_id >> e.speaker_id >> e.wav_path))
      throw std::runtime_error("bad manifest line: " + line);
    out.push_back(std::move(e));
  }
  return out;
}

namespace detail {

inline CorpusConfig corpus_config_from(const Json& cfg) {
  const Json& c = cfg.at("corpus");
  CorpusConfig out;
  out.n_speakers = c.at("n_speakers").get<int>();
  out.utts_per_speaker = c.at("utts_per_speaker").get<int>();
  out.dur_min_s = c.at("dur_min_s").get<double>();
  out.dur_max_s = c.at("dur_max_s").get<double>();
  out.difficulty = c.at("difficulty").get<double>();
  out.sample_rate = c.at("sample_rate").get<int>();
  return out;
}

inline FeatureConfig feature_config_from(const Json& cfg) {
  const Json& f = cfg.at("features");
  FeatureConfig out;
  out.n_mfcc = f.at("n_mfcc").get<int>();
  out.n_mels = f.at("n_mels").get<int>();
  out.window_ms = f.at("window_ms").get<double>();
  out.shift_ms = f.at("shift_ms").get<double>();
  out.n_fft = f.at("n_fft").get<int>();
  out.preemphasis = f.at("preemphasis").get<double>();
  out.waveform_scale = f.at("waveform_scale").get<double>();
  out.cmn_window = f.at("cmn_window").get<int>();
  out.vad.energy_threshold = f.at("vad").at("energy_threshold").get<double>();
  out.vad.energy_mean_scale = f.at("vad").at("energy_mean_scale").get<double>();
  out.vad.context = f.at("vad").at("context").get<int>();
  return out;
}

inline ChunkConfig chunk_config_from(const Json& cfg) {
  const Json& a = cfg.at("archive");
  ChunkConfig out;
  out.batch_size = a.at("batch_size").get<int>();
  out.chunk_min = a.at("chunk_min").get<int>();
  out.chunk_max = a.at("chunk_max").get<int>();
  out.n_archives = a.at("n_archives").get<int>();
  out.chunks_per_utt = a.at("chunks_per_utt").get<int>();
  out.min_chunks_per_speaker = a.at("min_chunks_per_speaker").get<int>();
  return out;
}

inline TopologyConfig topology_from_config(const Json& cfg, int n_classes) {
  Json net = cfg.at("network");
  net["feat_dim"] = cfg.at("features").at("n_mfcc").get<int>();
  net["n_classes"] = n_classes;
  return topology_from_json(net);
}

}  // namespace detail

/// datagen: synthesize the corpus, write WAVs and the manifest
/// ("utt_id speaker_id wav_path").
inline void cmd_datagen(const Json& cfg, const std::string& out_dir,
                        uint64_t seed_override = 0, bool use_override = false) {
  namespace fs = std::filesystem;
  const CorpusConfig corpus = detail::corpus_config_from(cfg);
  const uint64_t seed = use_override ? seed_override : cfg.at("seed").get<uint64_t>();
  fs::create_directories(out_dir + "/wav");
  std::ofstream manifest(out_dir + "/manifest.txt");
  if (!manifest) throw std::runtime_error("cannot open for writing: " + out_dir + "/manifest.txt");
  for_each_utterance(corpus, seed,
                     [&](const CorpusUtterance& info, const WaveSignal& wave) {
                       const std::string path =
                           out_dir + "/wav/" + info.utt_id + ".wav";
                       write_wav(path, wave);
                       manifest << info.utt_id << ' ' << info.speaker_id << ' '
                                << path << '\n';
                     });
}

/// augment: clean originals plus N augmented copies per utterance with
/// randomly selected methods.  Writes the combined corpus manifest and a
/// provenance manifest ("out_id source_id method seed snr").
inline void cmd_augment(const Json& cfg, const std::string& manifest_path,
                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto entries = read_manifest(manifest_path);
  if (entries.empty()) throw std::runtime_error("empty manifest: " + manifest_path);
  const Json& a = cfg.at("augment");
  const uint64_t seed = cfg.at("seed").get<uint64_t>();
  const int copies = a.at("copies").get<int>();
  const auto methods = a.at("methods").get<std::vector<std::string>>();
  if (methods.empty()) throw std::runtime_error("no augmentation methods enabled");
  const int pool_size = a.at("pool_size").get<int>();
  const double pool_clip_s = a.at("pool_clip_s").get<double>();
  const SnrSpec babble_snr{a.at("babble_snr")[0].get<double>(),
                           a.at("babble_snr")[1].get<double>()};
  const SnrSpec music_snr{a.at("music_snr")[0].get<double>(),
                          a.at("music_snr")[1].get<double>()};
  const SnrSpec noise_snr{a.at("noise_snr")[0].get<double>(),
                          a.at("noise_snr")[1].get<double>()};

  fs::create_directories(out_dir + "/wav");
  std::ofstream manifest(out_dir + "/manifest.txt");
  std::ofstream prov(out_dir + "/augmentation_manifest.txt");
  if (!manifest || !prov)
    throw std::runtime_error("cannot open outputs in " + out_dir);

  // Speech pool for babble: a deterministic sample of other utterances.
  Rng pool_rng = Rng::derive(seed, "augment_pool");
  std::vector<size_t> pool_pick(entries.size());
  for (size_t i = 0; i < pool_pick.size(); ++i) pool_pick[i] = i;
  pool_rng.shuffle(pool_pick.begin(), pool_pick.end());
  const size_t n_pool = std::min<size_t>(static_cast<size_t>(pool_size), entries.size());
  std::vector<WaveSignal> speech_pool;
  int sample_rate = 8000;
  for (size_t i = 0; i < n_pool; ++i) {
    WaveSignal w = read_wav(entries[pool_pick[i]].wav_path);
    sample_rate = w.sample_rate;
    const size_t clip = std::min(
        w.samples.size(),
        static_cast<size_t>(pool_clip_s * w.sample_rate));
    w.samples.resize(std::max<size_t>(clip, 1));
    speech_pool.push_back(std::move(w));
  }
  std::vector<WaveSignal> music_pool, noise_pool;
  for (size_t i = 0; i < n_pool; ++i) {
    Rng r1 = Rng::derive(seed, "music_pool", i);
    music_pool.push_back(synth_music_clip(pool_clip_s, sample_rate, r1));
    Rng r2 = Rng::derive(seed, "noise_pool", i);
    noise_pool.push_back(synth_noise_clip(pool_clip_s, sample_rate, r2));
  }

  for (const auto& e : entries) {
    manifest << e.utt_id << ' ' << e.speaker_id << ' ' << e.wav_path << '\n';
    prov << e.utt_id << ' ' << e.utt_id << " clean 0 -\n";
    const WaveSignal wave = read_wav(e.wav_path);
    for (int c = 0; c < copies; ++c) {
      const uint64_t utt_seed =
          Rng::mix(Rng::mix(seed, Rng::hash_str(e.utt_id)), static_cast<uint64_t>(c));
      Rng rng(utt_seed);
      const std::string& method =
          methods[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(methods.size()) - 1))];
      WaveSignal out;
      double snr_db = 0.0;
      bool has_snr = true;
      if (method == "reverb") {
        const double decay = rng.uniform(a.at("rir_decay_min_s").get<double>(),
                                         a.at("rir_decay_max_s").get<double>());
        Rir rir = synth_rir(decay, std::min(2.0 * decay, 0.8), wave.sample_rate, rng);
        out = reverberate(wave, rir);
        has_snr = false;
      } else if (method == "babble") {
        const int k = static_cast<int>(rng.uniform_int(
            a.at("babble_k_min").get<int>(),
            std::min<int64_t>(a.at("babble_k_max").get<int>(),
                              static_cast<int64_t>(speech_pool.size()))));
        snr_db = babble_snr.draw(rng);
        SnrSpec fixed{snr_db, snr_db};
        out = make_babble(wave, speech_pool, k, fixed, rng);
      } else if (method == "music") {
        snr_db = music_snr.draw(rng);
        const auto& m = music_pool[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(music_pool.size()) - 1))];
        out = mix_at_snr(wave, m, snr_db);
      } else if (method == "noise") {
        out = add_interval_noise(wave, noise_pool, noise_snr,
                                 a.at("noise_interval_s").get<double>(), rng);
        has_snr = false;  // per-segment draws, recorded as a range
      } else {
        throw std::runtime_error("unknown augmentation method: " + method);
      }
      // Keep samples inside [-1, 1] for the 16-bit writer.
      const double peak = out.peak();
      if (peak > 1.0)
        for (double& s : out.samples) s /= peak;
      const std::string out_id = e.utt_id + "_aug" + std::to_string(c) + "_" + method;
      const std::string path = out_dir + "/wav/" + out_id + ".wav";
      write_wav(path, out);
      manifest << out_id << ' ' << e.speaker_id << ' ' << path << '\n';
      prov << out_id << ' ' << e.utt_id << ' ' << method << ' ' << utt_seed << ' ';
      if (has_snr) {
        prov << snr_db << '\n';
      } else {
        prov << "-\n";
      }
    }
  }
}

/// featurize: MFCC -> energy VAD (on pre-CMN C0) -> sliding CMN -> mask,
/// stored per utterance.
inline void cmd_featurize(const Json& cfg, const std::string& manifest_path,
                          const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const FeatureConfig fcfg = detail::feature_config_from(cfg);
  const bool apply_vad = cfg.at("features").at("apply_vad").get<bool>();
  const auto entries = read_manifest(manifest_path);
  FeatureStoreWriter writer(out_dir);
  for (const auto& e : entries) {
    const WaveSignal wave = read_wav(e.wav_path);
    FeatureMatrix raw = compute_mfcc(wave, fcfg);
    FeatureMatrix feats = sliding_cmn(raw, fcfg.cmn_window);
    if (apply_vad) {
      const auto mask = energy_vad(raw, fcfg.vad);
      feats = apply_mask(feats, mask);
    }
    writer.add(e.utt_id, e.speaker_id, feats);
  }
  writer.finish();
}

/// archive: cut stored features into balanced training archives.
inline ArchiveSetMeta cmd_archive(const Json& cfg, const std::string& feats_dir,
                                  const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  FeatureStore store(feats_dir);
  std::vector<std::pair<std::string, Eigen::MatrixXf>> utts;
  std::vector<std::string> speakers;
  for (const auto& e : store.entries()) {
    utts.emplace_back(e.utt_id, store.load(e));
    speakers.push_back(e.speaker_id);
  }
  Rng rng = Rng::derive(cfg.at("seed").get<uint64_t>(), "archive");
  ArchiveSetMeta meta =
      chunk_and_archive(utts, speakers, detail::chunk_config_from(cfg), out_dir, rng);
  meta.save(out_dir + "/archives.json");
  return meta;
}

/// train: optimize the network over the archive set; writes checkpoints and
/// the training report into out_dir.
inline TrainReport cmd_train(const Json& cfg, const std::string& archives_json,
                             const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const ArchiveSetMeta meta = ArchiveSetMeta::load(archives_json);
  const Json& t = cfg.at("train");
  TrainConfig tc;
  tc.epochs = t.at("epochs").get<int>();
  tc.lr_start = t.at("lr_start").get<double>();
  tc.lr_end = t.at("lr_end").get<double>();
  tc.optimizer = opt_kind_from_string(t.at("optimizer").get<std::string>());
  tc.seed = cfg.at("seed").get<uint64_t>();
  tc.archives = meta.files;
  tc.feature_noise_scale = t.at("feature_noise_scale").get<double>();
  tc.input_norm = t.at("input_norm").get<std::string>();
  tc.norm_subset_batches = t.at("norm_subset_batches").get<int>();
  tc.checkpoint_every = t.at("checkpoint_every").get<int>();
  tc.resume = t.at("resume").get<std::string>();
  tc.out_dir = out_dir;
  const std::string cv = t.at("cv_archive").get<std::string>();
  if (cv == "auto") {
    if (tc.archives.size() > 1) {
      tc.cv_archive = tc.archives.back();
      tc.archives.pop_back();
    }
  } else {
    tc.cv_archive = cv;
  }
  const TopologyConfig topo = detail::topology_from_config(cfg, meta.n_speakers);
  const std::string precision = t.at("precision").get<std::string>();
  if (precision == "f32") return train<float>(tc, topo);
  if (precision == "f64") return train<double>(tc, topo);
  throw std::runtime_error("bad precision: " + precision);
}

namespace detail {

template <class S>
EmbeddingSet extract_set(const std::string& checkpoint_path,
                         FeatureStore& store,
                         const std::vector<FeatureStoreEntry>& entries) {
  Checkpoint<S> ck = checkpoint_load<S>(checkpoint_path);
  EmbeddingSet set;
  for (const auto& e : entries) {
    if (e.frames < ck.params.cfg.receptive_field()) {
      std::cerr << "warning: skipping " << e.utt_id
                << ": shorter than the network context\n";
      continue;
    }
    const Eigen::MatrixXf feats32 = store.load(e);
    Mat<S> feats = feats32.cast<S>();
    if (ck.input_norm_stats && ck.input_norm_mode != "none") {
      for (Eigen::Index c = 0; c < feats.cols(); ++c) {
        feats.col(c).array() -= static_cast<S>(ck.input_norm_stats->mean(c));
        if (ck.input_norm_mode == "mean_var")
          feats.col(c) /= static_cast<S>(ck.input_norm_stats->std(c));
      }
    }
    const Vec<S> emb = extract_embedding(ck.params, feats);
    set.add(e.utt_id, emb.template cast<double>());
  }
  return set;
}

}  // namespace detail

/// extract: embeddings for every stored utterance (or a deterministic
/// max_utts subsample), using the checkpoint's precision and input
/// normalization.
inline void cmd_extract(const Json& cfg, const std::string& checkpoint_path,
                        const std::string& feats_dir, const std::string& out_path,
                        int max_utts = 0) {
  (void)cfg;
  FeatureStore store(feats_dir);
  std::vector<FeatureStoreEntry> entries = store.entries();
  if (max_utts > 0 && static_cast<int>(entries.size()) > max_utts) {
    // Evenly spaced subsample keeps all speakers represented.
    std::vector<FeatureStoreEntry> picked;
    const double stride =
        static_cast<double>(entries.size()) / static_cast<double>(max_utts);
    for (int i = 0; i < max_utts; ++i)
      picked.push_back(entries[static_cast<size_t>(i * stride)]);
    entries = std::move(picked);
  }
  const TensorFile probe = TensorFile::load(checkpoint_path);
  EmbeddingSet set = probe.dtype == "f64"
                         ? detail::extract_set<double>(checkpoint_path, store, entries)
                         : detail::extract_set<float>(checkpoint_path, store, entries);
  set.save(out_path, probe.dtype);
}

/// Backend model: centering mean + length-norm flag + either a PLDA model or
/// plain cosine scoring.
struct BackendModel {
  std::string scoring = "plda";
  bool length_norm = true;
  Eigen::VectorXd center_mean;
  PldaModel plda;

  Eigen::VectorXd transform(const Eigen::VectorXd& v) const {
    return center_and_norm(v, center_mean, length_norm);
  }

  double score(const Eigen::VectorXd& enroll, const Eigen::VectorXd& test) const {
    const Eigen::VectorXd e = transform(enroll);
    const Eigen::VectorXd t = transform(test);
    return scoring == "plda" ? plda.score(e, t) : cosine_score(e, t);
  }

  void save(const std::string& path) const {
    TensorFile tf;
    tf.dtype = "f64";
    tf.meta.emplace_back("kind", "backend");
    tf.meta.emplace_back("scoring", scoring);
    tf.meta.emplace_back("length_norm", length_norm ? "1" : "0");
    auto push_vec = [&](const std::string& name, const Eigen::VectorXd& v) {
      NamedTensor t{name, {static_cast<int>(v.size())},
                    std::vector<double>(v.data(), v.data() + v.size())};
      tf.tensors.push_back(std::move(t));
    };
    auto push_mat = [&](const std::string& name, const Eigen::MatrixXd& m) {
      NamedTensor t;
      t.name = name;
      t.dims = {static_cast<int>(m.rows()), static_cast<int>(m.cols())};
      t.data.resize(static_cast<size_t>(m.size()));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          t.data[static_cast<size_t>(r * m.cols() + c)] = m(r, c);
      tf.tensors.push_back(std::move(t));
    };
    push_vec("center_mean", center_mean);
    if (scoring == "plda") {
      push_vec("plda.mean", plda.mean);
      push_mat("plda.between", plda.between);
      push_mat("plda.within", plda.within);
    }
    tf.save(path);
  }

  static BackendModel load(const std::string& path) {
    const TensorFile tf = TensorFile::load(path);
    BackendModel m;
    if (const std::string* s = tf.find_meta("scoring")) m.scoring = *s;
    if (const std::string* s = tf.find_meta("length_norm")) m.length_norm = *s == "1";
    auto get_vec = [&](const std::string& name) {
      const NamedTensor* t = tf.find(name);
      if (!t) throw std::runtime_error("backend model missing tensor " + name);
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
          t->data.data(), static_cast<Eigen::Index>(t->data.size())));
    };
    auto get_mat = [&](const std::string& name) {
      const NamedTensor* t = tf.find(name);
      if (!t || t->dims.size() != 2)
        throw std::runtime_error("backend model missing tensor " + name);
      Eigen::MatrixXd out(t->dims[0], t->dims[1]);
      for (int r = 0; r < t->dims[0]; ++r)
        for (int c = 0; c < t->dims[1]; ++c)
          out(r, c) = t->data[static_cast<size_t>(r) * t->dims[1] + c];
      return out;
    };
    m.center_mean = get_vec("center_mean");
    if (m.scoring == "plda") {
      m.plda.mean = get_vec("plda.mean");
      m.plda.between = get_mat("plda.between");
      m.plda.within = get_mat("plda.within");
      m.plda.prepare();
    }
    return m;
  }
};

/// backend-train: center + length-normalize the labeled embeddings, fit the
/// PLDA model (or set up cosine scoring), optionally adapt on unlabeled
/// embeddings.
inline BackendModel cmd_backend_train(const Json& cfg,
                                      const std::string& embeddings_path,
                                      const std::string& feats_dir,
                                      const std::string& model_out,
                                      const std::string& adapt_embeddings = "") {
  const Json& b = cfg.at("backend");
  const EmbeddingSet set = EmbeddingSet::load(embeddings_path);
  if (set.ids.empty()) throw std::runtime_error("no embeddings in " + embeddings_path);

  // Labels come from the feature-store index.
  std::map<std::string, std::string> utt2spk;
  {
    FeatureStore store(feats_dir);
    for (const auto& e : store.entries()) utt2spk[e.utt_id] = e.speaker_id;
  }
  BackendModel model;
  model.scoring = b.at("scoring").get<std::string>();
  model.length_norm = b.at("length_norm").get<bool>();
  model.center_mean = mean_vector(set.vectors);

  if (model.scoring == "plda") {
    std::vector<Eigen::VectorXd> transformed;
    std::vector<int> labels;
    std::map<std::string, int> spk_ids;
    for (size_t i = 0; i < set.ids.size(); ++i) {
      auto it = utt2spk.find(set.ids[i]);
      if (it == utt2spk.end())
        throw std::runtime_error("utterance missing from feature index: " + set.ids[i]);
      const auto [sit, inserted] =
          spk_ids.emplace(it->second, static_cast<int>(spk_ids.size()));
      labels.push_back(sit->second);
      transformed.push_back(model.transform(set.vectors[i]));
    }
    model.plda = train_plda(transformed, labels, b.at("plda_iters").get<int>());
    if (!adapt_embeddings.empty()) {
      const EmbeddingSet adapt_set = EmbeddingSet::load(adapt_embeddings);
      std::vector<Eigen::VectorXd> adapt_vecs;
      for (const auto& v : adapt_set.vectors)
        adapt_vecs.push_back(model.transform(v));
      model.plda = adapt_plda(model.plda, adapt_vecs,
                              b.at("adapt_within").get<double>(),
                              b.at("adapt_between").get<double>());
    }
  }
  if (!model_out.empty()) model.save(model_out);
  return model;
}

/// score: one line per trial, deterministic order following the trial list.
inline std::vector<ScoredTrial> cmd_score(const Json& cfg,
                                          const std::string& model_path,
                                          const std::string& embeddings_path,
                                          const std::string& trials_path,
                                          const std::string& scores_out) {
  (void)cfg;
  const BackendModel model = BackendModel::load(model_path);
  const EmbeddingSet set = EmbeddingSet::load(embeddings_path);
  const auto index = set.index();
  const auto trials = read_trials(trials_path);
  std::vector<ScoredTrial> scores;
  scores.reserve(trials.size());
  for (const auto& t : trials) {
    auto ei = index.find(t.enroll);
    auto ti = index.find(t.test);
    if (ei == index.end()) throw std::runtime_error("unknown utterance: " + t.enroll);
    if (ti == index.end()) throw std::runtime_error("unknown utterance: " + t.test);
    scores.push_back(
        {t.enroll, t.test, model.score(set.vectors[ei->second], set.vectors[ti->second])});
  }
  if (!scores_out.empty()) write_scores(scores_out, scores);
  return scores;
}

struct EvalResult {
  double eer = 0.0;     // fraction, not percent
  double min_dcf = 0.0;
};

inline EvalResult evaluate_scores(const Json& cfg,
                                  const std::vector<ScoredTrial>& scores,
                                  const std::vector<Trial>& trials) {
  const auto [target, nontarget] = split_by_label(scores, trials);
  const Json& e = cfg.at("eval");
  EvalResult out;
  out.eer = compute_eer(target, nontarget);
  out.min_dcf = compute_min_dcf(target, nontarget, e.at("p_target").get<double>(),
                                e.at("c_miss").get<double>(), e.at("c_fa").get<double>());
  return out;
}

inline EvalResult cmd_eval(const Json& cfg, const std::string& scores_path,
                           const std::string& trials_path) {
  return evaluate_scores(cfg, read_scores(scores_path), read_trials(trials_path));
}

/// All-pairs trial list over a feature store's utterances (target iff same
/// speaker).
inline std::vector<Trial> make_all_pairs_trials(const std::string& feats_dir) {
  FeatureStore store(feats_dir);
  const auto& entries = store.entries();
  std::vector<Trial> trials;
  for (size_t i = 0; i < entries.size(); ++i)
    for (size_t j = i + 1; j < entries.size(); ++j) {
      Trial t;
      t.enroll = entries[i].utt_id;
      t.test = entries[j].utt_id;
      t.label = entries[i].speaker_id == entries[j].speaker_id
                    ? TrialLabel::kTarget
                    : TrialLabel::kNontarget;
      trials.push_back(std::move(t));
    }
  return trials;
}

}  // namespace xvec
