// include/xvec/metrics.hpp

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
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xvec {

// Trials are "accept iff score >= threshold".  Walking the merged sorted
// scores from below yields the ROC path from (miss 0, fa 1) to (miss 1,
// fa 0); tied scores move as one step.

namespace detail {

struct RocPoint {
  double miss;
  double fa;
};

inline std::vector<RocPoint> roc_path(const std::vector<double>& target,
                                      const std::vector<double>& nontarget) {
  if (target.empty() || nontarget.empty())
    throw std::invalid_argument("need both target and nontarget trials");
  struct Entry {
    double score;
    bool is_target;
  };
  std::vector<Entry> all;
  all.reserve(target.size() + nontarget.size());
  for (double s : target) all.push_back({s, true});
  for (double s : nontarget) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  std::vector<RocPoint> path;
  path.push_back({0.0, 1.0});
  const double nt = static_cast<double>(target.size());
  const double nn = static_cast<double>(nontarget.size());
  size_t i = 0;
  double seen_t = 0.0, seen_n = 0.0;
  while (i < all.size()) {
    const double s = all[i].score;
    while (i < all.size() && all[i].score == s) {
      if (all[i].is_target) {
        seen_t += 1.0;
      } else {
        seen_n += 1.0;
      }
      ++i;
    }
    path.push_back({seen_t / nt, 1.0 - seen_n / nn});
  }
  return path;
}

}  // namespace detail

/// Equal error rate: where the ROC path crosses miss = fa, with linear
/// interpolation inside the crossing segment.
inline double compute_eer(const std::vector<double>& target,
                          const std::vector<double>& nontarget) {
  const auto path = detail::roc_path(target, nontarget);
  for (size_t k = 1; k < path.size(); ++k) {
    if (path[k].miss >= path[k].fa) {
      const double dm = path[k].miss - path[k - 1].miss;
      const double df = path[k].fa - path[k - 1].fa;
      const double gap = path[k - 1].fa - path[k - 1].miss;
      if (dm - df == 0.0) return path[k].miss;
      const double t = gap / (dm - df);
      return path[k - 1].miss + t * dm;
    }
  }
  return 1.0;  // unreachable for non-empty classes
}

/// Minimum normalized detection cost over all thresholds.
inline double compute_min_dcf(const std::vector<double>& target,
                              const std::vector<double>& nontarget,
                              double p_target = 0.01, double c_miss = 1.0,
                              double c_fa = 1.0) {
  const auto path = detail::roc_path(target, nontarget);
  const double norm = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  if (norm <= 0.0) throw std::invalid_argument("degenerate DCF parameters");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pt : path) {
    const double cost =
        c_miss * p_target * pt.miss + c_fa * (1.0 - p_target) * pt.fa;
    best = std::min(best, cost);
  }
  return best / norm;
}

// ---------------------------------------------------------------------------
// Trial list / score file formats.

enum class TrialLabel { kTarget, kNontarget, kUnknown };

struct Trial {
  std::string enroll;
  std::string test;
  TrialLabel label = TrialLabel::kUnknown;
};

inline std::vector<Trial> read_trials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<Trial> trials;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Trial t;
    std::string label;
    if (!(ss >> t.enroll >> t.test >> label))
      throw std::runtime_error("bad trial line: " + line);
    if (label == "target") {
      t.label = TrialLabel::kTarget;
    } else if (label == "nontarget") {
      t.label = TrialLabel::kNontarget;
    } else if (label == "unknown") {
      t.label = TrialLabel::kUnknown;
    } else {
      throw std::runtime_error("bad trial label: " + label);
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

inline void write_trials(const std::string& path, const std::vector<Trial>& trials) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& t : trials) {
    const char* label = t.label == TrialLabel::kTarget
                            ? "target"
                            : t.label == TrialLabel::kNontarget ? "nontarget"
                                                                : "unknown";
    out << t.enroll << ' ' << t.test << ' ' << label << '\n';
  }
}

struct ScoredTrial {
  std::string enroll;
  std::string test;
  double score = 0.0;
};

inline void write_scores(const std::string& path,
                         const std::vector<ScoredTrial>& scores) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.precision(17);
  for (const auto& s : scores)
    out << s.enroll << ' ' << s.test << ' ' << s.score << '\n';
}

inline std::vector<ScoredTrial> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<ScoredTrial> scores;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ScoredTrial s;
    if (!(ss >> s.enroll >> s.test >> s.score))
      throw std::runtime_error("bad score line: " + line);
    scores.push_back(std::move(s));
  }
  return scores;
}

/// Splits scores into (target, nontarget) lists by joining on the trial key.
inline std::pair<std::vector<double>, std::vector<double>> split_by_label(
    const std::vector<ScoredTrial>& scores, const std::vector<Trial>& trials) {
  std::vector<double> target, nontarget;
  if (scores.size() != trials.size())
    throw std::invalid_argument("scores/trials size mismatch");
  for (size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].enroll != trials[i].enroll || scores[i].test != trials[i].test)
      throw std::invalid_argument("scores/trials are not aligned");
    if (trials[i].label == TrialLabel::kTarget) {
      target.push_back(scores[i].score);
    } else if (trials[i].label == TrialLabel::kNontarget) {
      nontarget.push_back(scores[i].score);
    }
  }
  return {std::move(target), std::move(nontarget)};
}

}  // namespace xvec
