// include/xvec/experiment.hpp

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
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xvec/pipeline.hpp"

namespace xvec {

struct ExperimentRow {
  std::string label;
  std::vector<std::string> overrides;  // "network.*=..." / "train.*=..." only
};

struct ExperimentGrid {
  std::vector<ExperimentRow> rows;
  Json shared_config;  // overlay applied to every row

  static ExperimentGrid from_json(const Json& j) {
    ExperimentGrid grid;
    std::set<std::string> labels;
    for (const auto& row : j.at("rows")) {
      ExperimentRow r;
      r.label = row.at("label").get<std::string>();
      if (!labels.insert(r.label).second)
        throw std::invalid_argument("duplicate row label: " + r.label);
      if (row.contains("set"))
        r.overrides = row.at("set").get<std::vector<std::string>>();
      for (const auto& o : r.overrides) {
        if (o.rfind("network.", 0) != 0 && o.rfind("train.", 0) != 0)
          throw std::invalid_argument(
              "row overrides must stay under network.* or train.*: " + o);
      }
      grid.rows.push_back(std::move(r));
    }
    if (j.contains("config")) grid.shared_config = j.at("config");
    return grid;
  }

  static ExperimentGrid load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    Json j;
    in >> j;
    return from_json(j);
  }
};

struct ExperimentRowResult {
  std::string label;
  bool failed = false;
  std::string error;
  double eer = 0.0;
  double min_dcf = 0.0;
  double final_train_ce = 0.0;
};

/// Shared data directories for one experiment: the corpus, features,
/// archives and the evaluation corpus are built once per (config, seed) and
/// reused by every row, so row deltas reflect only the overrides.
struct ExperimentData {
  std::string train_feats;
  std::string eval_feats;
  std::string archives_json;
  std::vector<Trial> trials;
};

inline ExperimentData prepare_experiment_data(const Json& cfg,
                                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  ExperimentData data;
  const uint64_t seed = cfg.at("seed").get<uint64_t>();

  const std::string corpus_dir = out_dir + "/corpus";
  const std::string eval_corpus_dir = out_dir + "/eval_corpus";
  data.train_feats = out_dir + "/feats";
  data.eval_feats = out_dir + "/eval_feats";
  const std::string archive_dir = out_dir + "/archives";
  data.archives_json = archive_dir + "/archives.json";

  if (!fs::exists(data.archives_json)) {
    std::cerr << "[experiment] building shared corpus and archives\n";
    cmd_datagen(cfg, corpus_dir);
    cmd_featurize(cfg, corpus_dir + "/manifest.txt", data.train_feats);
    cmd_archive(cfg, data.train_feats, archive_dir);
  }
  if (!fs::exists(data.eval_feats + "/feats.idx")) {
    Json eval_cfg = cfg;
    const Json& ec = cfg.at("eval_corpus");
    eval_cfg["corpus"]["n_speakers"] = ec.at("n_speakers");
    eval_cfg["corpus"]["utts_per_speaker"] = ec.at("utts_per_speaker");
    // A different stream: evaluation speakers are disjoint from training.
    cmd_datagen(eval_cfg, eval_corpus_dir, Rng::mix(seed, Rng::hash_str("eval_corpus")),
                /*use_override=*/true);
    cmd_featurize(eval_cfg, eval_corpus_dir + "/manifest.txt", data.eval_feats);
  }
  data.trials = make_all_pairs_trials(data.eval_feats);
  return data;
}

/// Trains and evaluates one configuration on the shared data.
inline ExperimentRowResult run_experiment_row(const Json& row_cfg,
                                              const ExperimentData& data,
                                              const std::string& row_dir) {
  namespace fs = std::filesystem;
  ExperimentRowResult result;
  fs::create_directories(row_dir);
  dump_config(row_cfg, row_dir + "/effective_config.json");

  const TrainReport report = cmd_train(row_cfg, data.archives_json, row_dir);
  result.final_train_ce = report.final_ce;
  const std::string ckpt = row_dir + "/checkpoint_final.xten";

  const int plda_max = row_cfg.at("backend").at("plda_train_max").get<int>();
  cmd_extract(row_cfg, ckpt, data.train_feats, row_dir + "/train_embeddings.xten",
              plda_max);
  cmd_extract(row_cfg, ckpt, data.eval_feats, row_dir + "/eval_embeddings.xten");
  cmd_backend_train(row_cfg, row_dir + "/train_embeddings.xten", data.train_feats,
                    row_dir + "/backend.xten");

  const std::string trials_path = row_dir + "/trials.txt";
  write_trials(trials_path, data.trials);
  const auto scores = cmd_score(row_cfg, row_dir + "/backend.xten",
                                row_dir + "/eval_embeddings.xten", trials_path,
                                row_dir + "/scores.txt");
  const EvalResult ev = evaluate_scores(row_cfg, scores, data.trials);
  result.eer = ev.eer;
  result.min_dcf = ev.min_dcf;
  return result;
}

inline std::string results_markdown(const std::vector<ExperimentRowResult>& rows) {
  std::ostringstream out;
  out << "| System | EER (%) | minDCF(0.01) |\n";
  out << "| --- | --- | --- |\n";
  for (const auto& r : rows) {
    if (r.failed) {
      out << "| " << r.label << " | FAILED | FAILED |\n";
    } else {
      out << "| " << r.label << " | " << std::fixed << std::setprecision(2)
          << 100.0 * r.eer << " | " << std::setprecision(3) << r.min_dcf
          << " |\n";
    }
  }
  return out.str();
}

inline std::string results_tsv(const std::vector<ExperimentRowResult>& rows) {
  std::ostringstream out;
  out << "label\teer\tmin_dcf\n";
  for (const auto& r : rows) {
    if (r.failed) {
      out << r.label << "\tFAILED\tFAILED\n";
    } else {
      out << r.label << '\t' << r.eer << '\t' << r.min_dcf << '\n';
    }
  }
  return out.str();
}

/// Runs every row on one shared corpus/seed; a failing row is recorded as
/// FAILED and the remaining rows continue.
inline std::vector<ExperimentRowResult> run_experiment(
    const Json& base_cfg, const ExperimentGrid& grid, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  Json cfg = base_cfg;
  if (!grid.shared_config.is_null()) detail::deep_merge(cfg, grid.shared_config);
  if (!cfg.contains("eval_corpus"))
    cfg["eval_corpus"] = Json{{"n_speakers", 40}, {"utts_per_speaker", 10}};

  const ExperimentData data = prepare_experiment_data(cfg, out_dir);
  std::vector<ExperimentRowResult> results;
  for (const auto& row : grid.rows) {
    ExperimentRowResult result;
    result.label = row.label;
    try {
      Json row_cfg = cfg;
      for (const auto& o : row.overrides) apply_override(row_cfg, o);
      std::cerr << "[experiment] row '" << row.label << "'\n";
      result = run_experiment_row(row_cfg, data, out_dir + "/rows/" + row.label);
      result.label = row.label;
    } catch (const std::exception& e) {
      result.failed = true;
      result.error = e.what();
      std::cerr << "[experiment] row '" << row.label << "' FAILED: " << e.what()
                << '\n';
    }
    results.push_back(std::move(result));
  }
  std::ofstream md(out_dir + "/results.md");
  md << results_markdown(results);
  std::ofstream tsv(out_dir + "/results.tsv");
  tsv << results_tsv(results);
  return results;
}

}  // namespace xvec
