// tests/support/metric_oracles.hpp

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

// Exhaustive threshold-sweep oracles for EER and minDCF.  Every candidate
// threshold re-counts the miss/false-alarm rates from scratch (O(n^2)),
// independent of the single-pass implementations.

#pragma once

#include <algorithm>
#include <limits>
#include <set>
#include <vector>

namespace xvec::testsupport {

struct SweepPoint {
  double miss;
  double fa;
};

inline std::vector<SweepPoint> exhaustive_sweep(const std::vector<double>& target,
                                                const std::vector<double>& nontarget) {
  std::set<double> uniq(target.begin(), target.end());
  uniq.insert(nontarget.begin(), nontarget.end());
  // Thresholds just above each distinct score, plus one below everything.
  std::vector<double> thresholds;
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  for (double s : uniq) thresholds.push_back(std::nextafter(s, std::numeric_limits<double>::infinity()));

  std::vector<SweepPoint> points;
  for (double th : thresholds) {
    int missed = 0, accepted = 0;
    for (double s : target)
      if (s < th) ++missed;
    for (double s : nontarget)
      if (s >= th) ++accepted;
    points.push_back({static_cast<double>(missed) / target.size(),
                      static_cast<double>(accepted) / nontarget.size()});
  }
  return points;
}

inline double oracle_eer(const std::vector<double>& target,
                         const std::vector<double>& nontarget) {
  const auto points = exhaustive_sweep(target, nontarget);
  for (size_t k = 1; k < points.size(); ++k) {
    if (points[k].miss >= points[k].fa) {
      const double dm = points[k].miss - points[k - 1].miss;
      const double df = points[k].fa - points[k - 1].fa;
      const double gap = points[k - 1].fa - points[k - 1].miss;
      if (dm - df == 0.0) return points[k].miss;
      return points[k - 1].miss + gap / (dm - df) * dm;
    }
  }
  return 1.0;
}

inline double oracle_min_dcf(const std::vector<double>& target,
                             const std::vector<double>& nontarget,
                             double p_target = 0.01, double c_miss = 1.0,
                             double c_fa = 1.0) {
  const auto points = exhaustive_sweep(target, nontarget);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pt : points)
    best = std::min(best,
                    c_miss * p_target * pt.miss + c_fa * (1.0 - p_target) * pt.fa);
  return best / std::min(c_miss * p_target, c_fa * (1.0 - p_target));
}

}  // namespace xvec::testsupport
