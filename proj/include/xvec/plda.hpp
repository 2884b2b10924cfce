// include/xvec/plda.hpp

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

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>
#include <vector>

#include "xvec/tensor_file.hpp"

namespace xvec {

/// Two-covariance Gaussian PLDA: x = mu + y + eps with y ~ N(0, between) and
/// eps ~ N(0, within).  Scoring happens in the basis that simultaneously
/// diagonalizes both covariances (within -> I, between -> diag(psi)).
struct PldaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd between;
  Eigen::MatrixXd within;

  // Derived scoring basis; rebuilt by prepare().
  Eigen::MatrixXd projection;  // P with P W P' = I, P B P' = diag(psi)
  Eigen::VectorXd psi;
  bool prepared = false;

  Eigen::Index dim() const { return mean.size(); }

  void prepare() {
    Eigen::LLT<Eigen::MatrixXd> llt(within);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error(
          "singular within-class covariance; use more data or a regularization floor");
    const Eigen::MatrixXd l_inv = llt.matrixL()
                                      .solve(Eigen::MatrixXd::Identity(dim(), dim()));
    const Eigen::MatrixXd m = l_inv * between * l_inv.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        (m + m.transpose()) / 2.0);
    psi = eig.eigenvalues().cwiseMax(0.0);
    projection = eig.eigenvectors().transpose() * l_inv;
    prepared = true;
  }

  /// Log-likelihood ratio log p(e,t | same speaker) - log p(e,t | different
  /// speakers) for one enrollment and one test vector.
  double score(const Eigen::VectorXd& enroll, const Eigen::VectorXd& test) const {
    if (!prepared) throw std::logic_error("call prepare() before scoring");
    if (enroll.size() != dim() || test.size() != dim())
      throw std::invalid_argument("embedding dimension mismatch");
    const Eigen::VectorXd e = projection * (enroll - mean);
    const Eigen::VectorXd t = projection * (test - mean);
    double llr = 0.0;
    for (Eigen::Index d = 0; d < psi.size(); ++d) {
      const double a = 1.0 + psi(d);      // per-dim variance
      const double c = psi(d);            // per-dim same-speaker covariance
      const double det_ratio = (a * a - c * c) / (a * a);
      const double ss = e(d) * e(d) + t(d) * t(d);
      const double quad_same = (a * ss - 2.0 * c * e(d) * t(d)) / (a * a - c * c);
      const double quad_diff = ss / a;
      llr += -0.5 * std::log(det_ratio) - 0.5 * (quad_same - quad_diff);
    }
    return llr;
  }

  void save(const std::string& path) const {
    TensorFile tf;
    tf.dtype = "f64";
    tf.meta.emplace_back("kind", "plda");
    auto push_mat = [&](const std::string& name, const Eigen::MatrixXd& m) {
      NamedTensor t;
      t.name = name;
      t.dims = {static_cast<int>(m.rows()), static_cast<int>(m.cols())};
      t.data.resize(static_cast<size_t>(m.size()));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c0 = 0; c0 < m.cols(); ++c0)
          t.data[static_cast<size_t>(r * m.cols() + c0)] = m(r, c0);
      tf.tensors.push_back(std::move(t));
    };
    NamedTensor mu{"mean", {static_cast<int>(mean.size())},
                   std::vector<double>(mean.data(), mean.data() + mean.size())};
    tf.tensors.push_back(std::move(mu));
    push_mat("between", between);
    push_mat("within", within);
    tf.save(path);
  }

  static PldaModel load(const std::string& path) {
    const TensorFile tf = TensorFile::load(path);
    auto get_mat = [&](const std::string& name) {
      const NamedTensor* t = tf.find(name);
      if (!t || t->dims.size() != 2)
        throw std::runtime_error("plda model missing tensor " + name);
      Eigen::MatrixXd m(t->dims[0], t->dims[1]);
      for (int r = 0; r < t->dims[0]; ++r)
        for (int c = 0; c < t->dims[1]; ++c)
          m(r, c) = t->data[static_cast<size_t>(r) * t->dims[1] + c];
      return m;
    };
    const NamedTensor* mu = tf.find("mean");
    if (!mu) throw std::runtime_error("plda model missing tensor mean");
    PldaModel model;
    model.mean = Eigen::Map<const Eigen::VectorXd>(
        mu->data.data(), static_cast<Eigen::Index>(mu->data.size()));
    model.between = get_mat("between");
    model.within = get_mat("within");
    model.prepare();
    return model;
  }
};

/// EM estimation of the two-covariance model.  The mean is fixed at the data
/// mean; each iteration's total-data marginal log-likelihood is appended to
/// ll_history when given (it is non-decreasing).
inline PldaModel train_plda(const std::vector<Eigen::VectorXd>& x,
                            const std::vector<int>& labels, int n_iters,
                            std::vector<double>* ll_history = nullptr) {
  if (x.size() != labels.size() || x.empty())
    throw std::invalid_argument("bad PLDA training data");
  const Eigen::Index d = x.front().size();
  std::map<int, std::vector<size_t>> by_speaker;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) throw std::invalid_argument("dimension mismatch");
    by_speaker[labels[i]].push_back(i);
  }
  if (by_speaker.size() < 2)
    throw std::invalid_argument("need >= 2 speakers for PLDA");
  bool any_multi = false;
  for (const auto& [spk, idx] : by_speaker) any_multi |= idx.size() >= 2;
  if (!any_multi)
    std::cerr << "warning: every speaker has a single utterance; "
                 "between/within split is not identifiable\n";

  const double n_total = static_cast<double>(x.size());
  const double n_speakers = static_cast<double>(by_speaker.size());

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (const auto& v : x) mu += v;
  mu /= n_total;

  // Per-speaker first moments and the pooled second moment.
  struct SpeakerStats {
    double n;
    Eigen::VectorXd sum;  // sum of (x - mu)
  };
  std::vector<SpeakerStats> stats;
  Eigen::MatrixXd s_tot = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [spk, idx] : by_speaker) {
    SpeakerStats st;
    st.n = static_cast<double>(idx.size());
    st.sum = Eigen::VectorXd::Zero(d);
    for (size_t i : idx) {
      const Eigen::VectorXd c = x[i] - mu;
      st.sum += c;
      s_tot.noalias() += c * c.transpose();
    }
    stats.push_back(std::move(st));
  }

  Eigen::MatrixXd total_cov = s_tot / n_total;
  {
    Eigen::LLT<Eigen::MatrixXd> probe(total_cov);
    if (total_cov.trace() <= 0.0 || probe.info() != Eigen::Success)
      throw std::runtime_error(
          "singular within-class covariance; use more data or a regularization floor");
  }
  total_cov.diagonal().array() += 1e-10 * total_cov.trace() / d;
  PldaModel model;
  model.mean = mu;
  model.within = 0.5 * total_cov;
  model.between = 0.5 * total_cov;

  const double log_2pi = std::log(2.0 * M_PI);
  for (int iter = 0; iter < n_iters; ++iter) {
    Eigen::LLT<Eigen::MatrixXd> w_llt(model.within);
    if (w_llt.info() != Eigen::Success)
      throw std::runtime_error(
          "singular within-class covariance; use more data or a regularization floor");
    Eigen::LLT<Eigen::MatrixXd> b_llt(model.between);
    if (b_llt.info() != Eigen::Success)
      throw std::runtime_error("between-class covariance lost positive definiteness");
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd w_inv = w_llt.solve(eye);
    const Eigen::MatrixXd b_inv = b_llt.solve(eye);
    const double logdet_w =
        2.0 * w_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double logdet_b =
        2.0 * b_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

    // Posterior precision depends only on the utterance count.
    std::map<double, std::pair<Eigen::MatrixXd, double>> by_count;  // n -> (inv, logdet)
    for (const auto& st : stats) {
      if (by_count.count(st.n)) continue;
      const Eigen::MatrixXd lambda = b_inv + st.n * w_inv;
      Eigen::LLT<Eigen::MatrixXd> l_llt(lambda);
      const double logdet =
          2.0 * l_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      by_count[st.n] = {l_llt.solve(eye), logdet};
    }

    Eigen::MatrixXd b_acc = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd w_cross = Eigen::MatrixXd::Zero(d, d);
    double ll = -0.5 * n_total * d * log_2pi - 0.5 * n_total * logdet_w -
                0.5 * n_speakers * logdet_b -
                0.5 * (w_inv * s_tot).trace();
    for (const auto& st : stats) {
      const auto& [lambda_inv, lambda_logdet] = by_count[st.n];
      const Eigen::VectorXd b_vec = w_inv * st.sum;
      const Eigen::VectorXd m = lambda_inv * b_vec;
      b_acc.noalias() += m * m.transpose() + lambda_inv;
      w_cross.noalias() += st.sum * m.transpose() + m * st.sum.transpose() -
                           st.n * (m * m.transpose() + lambda_inv);
      ll += -0.5 * lambda_logdet + 0.5 * b_vec.dot(m);
    }
    if (ll_history) ll_history->push_back(ll);

    model.between = b_acc / n_speakers;
    model.within = (s_tot - w_cross) / n_total;
    model.between = (model.between + model.between.transpose()) / 2.0;
    model.within = (model.within + model.within.transpose()) / 2.0;
  }
  model.prepare();
  return model;
}

/// Unsupervised covariance adaptation: the excess of the adaptation-data
/// total covariance over the model's, measured in the diagonalized basis, is
/// split between the within and between covariances; the mean is replaced by
/// the adaptation mean.
inline PldaModel adapt_plda(const PldaModel& model,
                            const std::vector<Eigen::VectorXd>& unlabeled,
                            double within_scale, double between_scale) {
  if (unlabeled.size() < 2)
    throw std::invalid_argument("need >= 2 vectors for adaptation");
  PldaModel base = model;
  if (!base.prepared) base.prepare();
  const Eigen::Index d = base.dim();

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& v : unlabeled) {
    if (v.size() != d) throw std::invalid_argument("dimension mismatch");
    mean += v;
  }
  mean /= static_cast<double>(unlabeled.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& v : unlabeled) {
    const Eigen::VectorXd c = v - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= static_cast<double>(unlabeled.size());

  const Eigen::MatrixXd proj_cov =
      base.projection * cov * base.projection.transpose();
  Eigen::VectorXd within_diag = Eigen::VectorXd::Ones(d);
  Eigen::VectorXd between_diag = base.psi;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double excess = std::max(0.0, proj_cov(i, i) - (1.0 + base.psi(i)));
    within_diag(i) += within_scale * excess;
    between_diag(i) += between_scale * excess;
  }

  // projection = U' L^-1, so its inverse is L U.
  const Eigen::MatrixXd p_inv =
      base.projection.fullPivLu().solve(Eigen::MatrixXd::Identity(d, d));
  PldaModel adapted;
  adapted.mean = mean;
  adapted.within = p_inv * within_diag.asDiagonal() * p_inv.transpose();
  adapted.between = p_inv * between_diag.asDiagonal() * p_inv.transpose();
  adapted.within = (adapted.within + adapted.within.transpose()) / 2.0;
  adapted.between = (adapted.between + adapted.between.transpose()) / 2.0;
  adapted.prepare();
  return adapted;
}

/// Convenience free function matching the scoring contract.
inline double score_plda(const PldaModel& model, const Eigen::VectorXd& enroll,
                         const Eigen::VectorXd& test) {
  if (!model.prepared) {
    PldaModel copy = model;
    copy.prepare();
    return copy.score(enroll, test);
  }
  return model.score(enroll, test);
}

}  // namespace xvec
