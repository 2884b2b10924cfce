// include/xvec/backend.hpp

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
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xvec/tensor_file.hpp"

namespace xvec {

/// Ordered utterance -> embedding map with tensor-container serialization
/// (one tensor per utterance, name = utt_id).
struct EmbeddingSet {
  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> vectors;

  void add(const std::string& id, const Eigen::VectorXd& v) {
    ids.push_back(id);
    vectors.push_back(v);
  }

  const Eigen::VectorXd& at(const std::string& id) const {
    for (size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return vectors[i];
    throw std::runtime_error("unknown utterance: " + id);
  }

  std::map<std::string, size_t> index() const {
    std::map<std::string, size_t> out;
    for (size_t i = 0; i < ids.size(); ++i) out[ids[i]] = i;
    return out;
  }

  void save(const std::string& path, const std::string& dtype = "f32") const {
    TensorFile tf;
    tf.dtype = dtype;
    tf.meta.emplace_back("kind", "embeddings");
    for (size_t i = 0; i < ids.size(); ++i) {
      NamedTensor t;
      t.name = ids[i];
      t.dims = {static_cast<int>(vectors[i].size())};
      t.data.assign(vectors[i].data(), vectors[i].data() + vectors[i].size());
      tf.tensors.push_back(std::move(t));
    }
    tf.save(path);
  }

  static EmbeddingSet load(const std::string& path) {
    const TensorFile tf = TensorFile::load(path);
    EmbeddingSet set;
    for (const auto& t : tf.tensors) {
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(
          t.data.data(), static_cast<Eigen::Index>(t.data.size()));
      set.add(t.name, v);
    }
    return set;
  }
};

inline Eigen::VectorXd mean_vector(const std::vector<Eigen::VectorXd>& vs) {
  if (vs.empty()) throw std::invalid_argument("empty embedding list");
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(vs.front().size());
  for (const auto& v : vs) mu += v;
  return mu / static_cast<double>(vs.size());
}

/// Subtracts the centering mean; optionally rescales each vector to norm
/// sqrt(dim) (the usual length normalization ahead of PLDA).
inline Eigen::VectorXd center_and_norm(const Eigen::VectorXd& v,
                                       const Eigen::VectorXd& center_mean,
                                       bool length_norm) {
  if (v.size() != center_mean.size())
    throw std::invalid_argument("embedding dimension mismatch");
  Eigen::VectorXd out = v - center_mean;
  if (length_norm) {
    const double norm = out.norm();
    if (norm == 0.0)
      throw std::runtime_error("cannot length-normalize a zero vector");
    out *= std::sqrt(static_cast<double>(out.size())) / norm;
  }
  return out;
}

inline std::vector<Eigen::VectorXd> center_and_norm(
    const std::vector<Eigen::VectorXd>& vs, const Eigen::VectorXd& center_mean,
    bool length_norm) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(center_and_norm(v, center_mean, length_norm));
  return out;
}

/// Multi-session enrollment pre-step: average, then renormalize.
inline Eigen::VectorXd average_embeddings(const std::vector<Eigen::VectorXd>& vs) {
  Eigen::VectorXd mu = mean_vector(vs);
  const double norm = mu.norm();
  if (norm == 0.0) throw std::runtime_error("cannot normalize a zero vector");
  return mu * (std::sqrt(static_cast<double>(mu.size())) / norm);
}

inline double cosine_score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw std::runtime_error("cosine score of a zero vector");
  return a.dot(b) / (na * nb);
}

}  // namespace xvec
