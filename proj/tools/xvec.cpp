// tools/xvec.cpp

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

// Command-line surface of the pipeline:
//   xvec datagen | augment | featurize | archive | train | extract |
//        backend-train | score | eval | experiment
// Every command takes --config (JSON), --seed, --out and repeated
// --set key=value overrides with dotted paths.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "xvec/config.hpp"
#include "xvec/experiment.hpp"
#include "xvec/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  int64_t seed = -1;

  void attach(CLI::App* cmd, bool need_out = true) {
    cmd->add_option("--config", config, "JSON config file");
    cmd->add_option("--set", sets, "override config values (dotted.path=value)");
    cmd->add_option("--seed", seed, "override the config seed");
    auto* out_opt = cmd->add_option("--out", out, "output directory");
    if (need_out) out_opt->required();
  }

  xvec::Json load() const {
    xvec::Json cfg = xvec::load_config(config, sets);
    if (seed >= 0) cfg["seed"] = static_cast<uint64_t>(seed);
    return cfg;
  }

  void dump_effective(const xvec::Json& cfg) const {
    if (out.empty()) return;
    std::filesystem::create_directories(out);
    xvec::dump_config(cfg, out + "/effective_config.json");
  }
};

}  // namespace

int main(int argc, char** argv) {
  static_assert(std::endian::native == std::endian::little,
                "file formats are little-endian");
  CLI::App app{"x-vector speaker embedding pipeline"};
  app.require_subcommand(1);

  CommonArgs datagen_args, augment_args, featurize_args, archive_args,
      train_args, extract_args, backend_args, score_args, eval_args, exp_args;

  auto* c_datagen = app.add_subcommand("datagen", "synthesize a speaker corpus");
  datagen_args.attach(c_datagen);

  auto* c_augment = app.add_subcommand("augment", "augment a corpus");
  std::string augment_manifest;
  c_augment->add_option("--manifest", augment_manifest, "corpus manifest")->required();
  augment_args.attach(c_augment);

  auto* c_featurize = app.add_subcommand("featurize", "extract MFCC features");
  std::string featurize_manifest;
  c_featurize->add_option("--manifest", featurize_manifest, "corpus manifest")->required();
  featurize_args.attach(c_featurize);

  auto* c_archive = app.add_subcommand("archive", "build training archives");
  std::string archive_feats;
  c_archive->add_option("--feats", archive_feats, "feature store directory")->required();
  archive_args.attach(c_archive);

  auto* c_train = app.add_subcommand("train", "train the embedding network");
  std::string train_archives;
  c_train->add_option("--archives", train_archives, "archives.json from the archive step")
      ->required();
  train_args.attach(c_train);

  auto* c_extract = app.add_subcommand("extract", "extract embeddings");
  std::string extract_ckpt, extract_feats, extract_out;
  int extract_max = 0;
  c_extract->add_option("--checkpoint", extract_ckpt, "trained checkpoint")->required();
  c_extract->add_option("--feats", extract_feats, "feature store directory")->required();
  c_extract->add_option("--embeddings", extract_out, "output embeddings file")->required();
  c_extract->add_option("--max-utts", extract_max, "deterministic subsample size");
  extract_args.attach(c_extract, /*need_out=*/false);

  auto* c_backend = app.add_subcommand("backend-train", "fit the scoring backend");
  std::string backend_emb, backend_feats, backend_out, backend_adapt;
  c_backend->add_option("--embeddings", backend_emb, "labeled embeddings")->required();
  c_backend->add_option("--feats", backend_feats, "feature store (for labels)")->required();
  c_backend->add_option("--model", backend_out, "output model file")->required();
  c_backend->add_option("--adapt-embeddings", backend_adapt,
                        "unlabeled embeddings for unsupervised adaptation");
  backend_args.attach(c_backend, /*need_out=*/false);

  auto* c_score = app.add_subcommand("score", "score a trial list");
  std::string score_model, score_emb, score_trials, score_out;
  c_score->add_option("--model", score_model, "backend model")->required();
  c_score->add_option("--embeddings", score_emb, "embeddings file")->required();
  c_score->add_option("--trials", score_trials, "trial list")->required();
  c_score->add_option("--scores", score_out, "output scores file")->required();
  score_args.attach(c_score, /*need_out=*/false);

  auto* c_eval = app.add_subcommand("eval", "EER / minDCF of a scores file");
  std::string eval_scores, eval_trials;
  c_eval->add_option("--scores", eval_scores, "scores file")->required();
  c_eval->add_option("--trials", eval_trials, "trial list")->required();
  eval_args.attach(c_eval, /*need_out=*/false);

  auto* c_exp = app.add_subcommand("experiment", "run an ablation grid");
  std::string exp_grid;
  c_exp->add_option("--grid", exp_grid, "grid JSON")->required();
  exp_args.attach(c_exp);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_datagen) {
      const auto cfg = datagen_args.load();
      datagen_args.dump_effective(cfg);
      xvec::cmd_datagen(cfg, datagen_args.out);
    } else if (*c_augment) {
      const auto cfg = augment_args.load();
      augment_args.dump_effective(cfg);
      xvec::cmd_augment(cfg, augment_manifest, augment_args.out);
    } else if (*c_featurize) {
      const auto cfg = featurize_args.load();
      featurize_args.dump_effective(cfg);
      xvec::cmd_featurize(cfg, featurize_manifest, featurize_args.out);
    } else if (*c_archive) {
      const auto cfg = archive_args.load();
      archive_args.dump_effective(cfg);
      xvec::cmd_archive(cfg, archive_feats, archive_args.out);
    } else if (*c_train) {
      const auto cfg = train_args.load();
      train_args.dump_effective(cfg);
      const auto report = xvec::cmd_train(cfg, train_archives, train_args.out);
      std::cout << report.to_text();
    } else if (*c_extract) {
      const auto cfg = extract_args.load();
      xvec::cmd_extract(cfg, extract_ckpt, extract_feats, extract_out, extract_max);
    } else if (*c_backend) {
      const auto cfg = backend_args.load();
      xvec::cmd_backend_train(cfg, backend_emb, backend_feats, backend_out,
                              backend_adapt);
    } else if (*c_score) {
      const auto cfg = score_args.load();
      xvec::cmd_score(cfg, score_model, score_emb, score_trials, score_out);
    } else if (*c_eval) {
      const auto cfg = eval_args.load();
      const auto result = xvec::cmd_eval(cfg, eval_scores, eval_trials);
      std::printf("EER=%.4f%% minDCF=%.4f\n", 100.0 * result.eer, result.min_dcf);
    } else if (*c_exp) {
      const auto cfg = exp_args.load();
      exp_args.dump_effective(cfg);
      const auto grid = xvec::ExperimentGrid::load(exp_grid);
      const auto results = xvec::run_experiment(cfg, grid, exp_args.out);
      std::cout << xvec::results_markdown(results);
      for (const auto& r : results)
        if (r.failed) return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
