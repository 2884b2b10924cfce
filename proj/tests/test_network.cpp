// tests/test_network.cpp

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

#include <catch2/catch_amalgamated.hpp>

#include "xvec/config.hpp"
#include "xvec/network.hpp"

using namespace xvec;

namespace {

template <class S>
Frames<S> random_frames(int T, int B, int D, uint64_t seed) {
  Frames<S> f;
  f.batch = B;
  f.x.resize(static_cast<Eigen::Index>(T) * B, D);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < f.x.size(); ++i)
    f.x.data()[i] = static_cast<S>(rng.gaussian());
  return f;
}

TopologyConfig tiny_topology(PoolingKind pooling = PoolingKind::kStats) {
  TopologyConfig cfg;
  cfg.frame_layers = {{3, 6, 8, FrameMode::kCnn},
                      {3, 8, 8, FrameMode::kCnn},
                      {3, 8, 8, FrameMode::kCnn},
                      {1, 8, 8, FrameMode::kCnn},
                      {1, 8, 16, FrameMode::kCnn}};
  cfg.pooling = pooling;
  cfg.attn_dim = 5;
  cfg.segment1_dim = 8;
  cfg.segment2_dim = 8;
  cfg.n_classes = 4;
  return cfg;
}

}  // namespace

TEST_CASE("build_network shapes follow the topology table") {
  TopologyConfig cfg = default_topology(100);
  auto p = build_network<float>(cfg, 1);
  REQUIRE(p.frames[0].w.rows() == 5 * 23);
  REQUIRE(p.frames[0].w.cols() == 512);
  REQUIRE(p.frames[4].w.cols() == 1536);
  REQUIRE(p.segment1.w.rows() == 3072);
  REQUIRE(p.segment1.w.cols() == 512);
  REQUIRE(p.softmax_w.cols() == 100);

  // Split attention doubles the final frame layer.
  Json j = topology_to_json(cfg);
  j.erase("frame_dims");
  j["pooling"] = "attn_split";
  TopologyConfig split = topology_from_json(j);
  split.validate();
  REQUIRE(split.frame_layers.back().out_dim == 3072);
  REQUIRE(split.pooled_dim() == 3072);
  auto ps = build_network<float>(split, 1);
  REQUIRE(ps.attn.w.rows() == 1536);

  auto p2 = build_network<float>(cfg, 1);
  for (size_t i = 0; i < p.frames.size(); ++i)
    REQUIRE(p.frames[i].w == p2.frames[i].w);

  TopologyConfig bad = cfg;
  bad.frame_layers[2].in_dim = 400;
  REQUIRE_THROWS_WITH(bad.validate(), Catch::Matchers::ContainsSubstring("frame layer 2"));
}

TEST_CASE("frame layer forward: kernel-1 affine and valid-conv arithmetic") {
  auto in = random_frames<double>(15, 2, 6, 3);
  const Mat<double> w = Mat<double>::Random(6, 8);
  const Vec<double> b = Vec<double>::Random(8);
  const auto out = nn::conv_forward<double>(in, w, b, {0}, 1);
  REQUIRE(out.frames() == 15);
  Mat<double> expect = in.x * w;
  expect.rowwise() += b.transpose();
  REQUIRE((out.x - expect).cwiseAbs().maxCoeff() < 1e-12);

  // T = 15 through contexts 5, 5, 7, 1, 1 -> 11, 7, 1, 1, 1.
  const int kernels[5] = {5, 5, 7, 1, 1};
  const int expected_t[5] = {11, 7, 1, 1, 1};
  Frames<double> cur = random_frames<double>(15, 2, 4, 4);
  for (int l = 0; l < 5; ++l) {
    std::vector<int> taps(static_cast<size_t>(kernels[l]));
    for (int k = 0; k < kernels[l]; ++k) taps[static_cast<size_t>(k)] = k;
    const Mat<double> wl = Mat<double>::Random(kernels[l] * 4, 4);
    const Vec<double> bl = Vec<double>::Zero(4);
    cur = nn::conv_forward<double>(cur, wl, bl, taps, kernels[l]);
    REQUIRE(cur.frames() == expected_t[l]);
  }
  const Mat<double> w2 = Mat<double>::Random(8, 4);
  const Vec<double> b2 = Vec<double>::Zero(4);
  REQUIRE_THROWS_WITH(nn::conv_forward<double>(cur, w2, b2, {0, 1}, 2),
                      Catch::Matchers::ContainsSubstring("context exceeds frames"));
}

TEMPLATE_TEST_CASE("TDNN equals CNN with zeroed interior taps, bitwise",
                   "[tdnn]", float, double) {
  using S = TestType;
  const int din = 16, dout = 12, T = 9, B = 3;
  for (int kernel : {5, 7}) {
    FrameLayerSpec tdnn_spec{kernel, din, dout, FrameMode::kTdnn};
    const auto taps = tdnn_spec.taps(1);  // layers past the first subsample
    REQUIRE(taps == std::vector<int>{0, (kernel - 1) / 2, kernel - 1});

    auto in = random_frames<S>(T, B, din, 11 + static_cast<uint64_t>(kernel));
    Mat<S> w_tdnn(3 * din, dout);
    Rng rng(23);
    for (Eigen::Index i = 0; i < w_tdnn.size(); ++i)
      w_tdnn.data()[i] = static_cast<S>(rng.gaussian());
    Vec<S> b(dout);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = static_cast<S>(rng.gaussian());

    // Embed the three tap blocks into a dense kernel, zeros elsewhere.
    Mat<S> w_cnn = Mat<S>::Zero(kernel * din, dout);
    for (size_t j = 0; j < taps.size(); ++j)
      w_cnn.middleRows(taps[j] * din, din) =
          w_tdnn.middleRows(static_cast<Eigen::Index>(j) * din, din);

    std::vector<int> all_taps(static_cast<size_t>(kernel));
    for (int k = 0; k < kernel; ++k) all_taps[static_cast<size_t>(k)] = k;

    const auto out_tdnn = nn::conv_forward(in, w_tdnn, b, taps, kernel);
    const auto out_cnn = nn::conv_forward(in, w_cnn, b, all_taps, kernel);
    REQUIRE(out_tdnn.x.rows() == out_cnn.x.rows());
    for (Eigen::Index i = 0; i < out_tdnn.x.size(); ++i)
      REQUIRE(out_tdnn.x.data()[i] == out_cnn.x.data()[i]);
  }
}

TEST_CASE("batchnorm normalizes, tracks running stats, guards inference") {
  nn::BnSite<double> site;
  site.init(5);
  auto x = random_frames<double>(20, 4, 5, 31).x;
  x.array() += 3.0;
  x.col(2) *= 4.0;

  nn::BnCache<double> cache;
  const auto y = nn::bn_forward(x, site, Phase::kTrain, 0.9, 1e-5, &cache);
  REQUIRE(y.colwise().mean().cwiseAbs().maxCoeff() < 1e-6);
  const Eigen::RowVectorXd var =
      (y.rowwise() - y.colwise().mean()).array().square().colwise().mean();
  REQUIRE((var.array() - 1.0).abs().maxCoeff() < 1e-4);

  // Pre-normalized input with a negligible epsilon passes through.
  Mat<double> z = x;
  const Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;
  const Eigen::RowVectorXd std_dev = z.array().square().colwise().mean().sqrt();
  z.array().rowwise() /= std_dev.array();
  nn::BnSite<double> site2;
  site2.init(5);
  const auto z_out = nn::bn_forward(z, site2, Phase::kTrain, 0.9, 1e-12, nullptr);
  REQUIRE((z_out - z).cwiseAbs().maxCoeff() < 1e-6);

  // Running stats after k identical batches follow the geometric series.
  nn::BnSite<double> site3;
  site3.init(5);
  const int k = 7;
  for (int i = 0; i < k; ++i)
    nn::bn_forward(x, site3, Phase::kTrain, 0.9, 1e-5, nullptr);
  const Eigen::VectorXd batch_mean = x.colwise().mean().transpose();
  const Eigen::VectorXd batch_var =
      (x.rowwise() - batch_mean.transpose()).array().square().colwise().mean();
  const double mk = std::pow(0.9, k);
  REQUIRE((site3.running_mean - (1.0 - mk) * batch_mean).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((site3.running_var - (mk * Eigen::VectorXd::Ones(5) + (1.0 - mk) * batch_var))
              .cwiseAbs()
              .maxCoeff() < 1e-12);

  nn::BnSite<double> fresh;
  fresh.init(5);
  REQUIRE_THROWS_WITH(nn::bn_forward(x, fresh, Phase::kInfer, 0.9, 1e-5, nullptr),
                      Catch::Matchers::ContainsSubstring("uninitialized running stats"));
}

TEST_CASE("activations") {
  Mat<double> x(1, 4);
  x << -1.0, -0.25, 0.0, 2.0;

  const auto relu = nn::act_forward(x, Activation::kRelu, 0.0, nullptr);
  REQUIRE(relu(0, 0) == 0.0);
  REQUIRE(relu(0, 3) == 2.0);

  const auto lrelu = nn::act_forward(x, Activation::kLrelu, 0.2, nullptr);
  REQUIRE(lrelu(0, 0) == Catch::Approx(-0.2));

  const auto ident = nn::act_forward(x, Activation::kLrelu, 1.0, nullptr);
  REQUIRE((ident - x).cwiseAbs().maxCoeff() == 0.0);
  const auto as_relu = nn::act_forward(x, Activation::kLrelu, 0.0, nullptr);
  REQUIRE((as_relu - relu).cwiseAbs().maxCoeff() == 0.0);

  // PReLU slope gradient against central differences.
  Vec<double> slopes(4);
  slopes << 0.2, 0.3, 0.1, 0.4;
  Mat<double> xs = random_frames<double>(6, 2, 4, 41).x;
  Mat<double> dy = random_frames<double>(6, 2, 4, 42).x;
  Vec<double> dslope = Vec<double>::Zero(4);
  nn::act_backward(dy, xs, Activation::kPrelu, 0.0, &slopes, &dslope);
  for (Eigen::Index c = 0; c < 4; ++c) {
    const double h = 1e-6;
    Vec<double> sp = slopes, sm = slopes;
    sp(c) += h;
    sm(c) -= h;
    const double lp = nn::act_forward(xs, Activation::kPrelu, 0.0, &sp).cwiseProduct(dy).sum();
    const double lm = nn::act_forward(xs, Activation::kPrelu, 0.0, &sm).cwiseProduct(dy).sum();
    REQUIRE(dslope(c) == Catch::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
  }
}

TEST_CASE("stats pooling definition and degenerate inputs") {
  // Frames (1,2) and (3,4): means (2,3), stds (1,1).
  Frames<double> h;
  h.batch = 1;
  h.x.resize(2, 2);
  h.x << 1.0, 2.0, 3.0, 4.0;
  const auto out = nn::stats_pool(h, 1e-10, static_cast<nn::StatsPoolCache<double>*>(nullptr));
  REQUIRE(out(0, 0) == Catch::Approx(2.0));
  REQUIRE(out(0, 1) == Catch::Approx(3.0));
  REQUIRE(out(0, 2) == Catch::Approx(1.0));
  REQUIRE(out(0, 3) == Catch::Approx(1.0));

  // Constant over time: std hits the floor sqrt(1e-10) = 1e-5.
  Frames<double> c;
  c.batch = 1;
  c.x = Mat<double>::Constant(5, 3, 2.5);
  const auto cout_ = nn::stats_pool(c, 1e-10, static_cast<nn::StatsPoolCache<double>*>(nullptr));
  REQUIRE(cout_(0, 0) == Catch::Approx(2.5));
  REQUIRE(cout_(0, 3) == Catch::Approx(1e-5));

  Frames<double> empty;
  empty.batch = 2;
  empty.x.resize(0, 3);
  REQUIRE_THROWS(nn::stats_pool(empty, 1e-10, static_cast<nn::StatsPoolCache<double>*>(nullptr)));
}

TEST_CASE("attention pooling: softmax weights and the zero-context degeneracy") {
  nn::AttnParams<double> params;
  Rng rng(51);
  const int D = 10, ad = 4;
  params.w.resize(D, ad);
  for (Eigen::Index i = 0; i < params.w.size(); ++i)
    params.w.data()[i] = rng.gaussian();
  params.b = Vec<double>::Zero(ad);
  params.v = Vec<double>::Zero(ad);

  for (int trial = 0; trial < 100; ++trial) {
    auto h = random_frames<double>(7, 2, D, 60 + static_cast<uint64_t>(trial));
    nn::AttnPoolCache<double> cache;
    const auto attn = nn::attention_pool(h, params, PoolingKind::kAttnShared, 1e-10, &cache);
    const auto stats = nn::stats_pool(h, 1e-10, static_cast<nn::StatsPoolCache<double>*>(nullptr));
    REQUIRE((attn - stats).cwiseAbs().maxCoeff() < 1e-10);
    // Attention weights of each utterance sum to 1 and are non-negative.
    for (int b = 0; b < 2; ++b) {
      double sum = 0.0;
      for (int t = 0; t < 7; ++t) {
        REQUIRE(cache.alpha(t * 2 + b) >= 0.0);
        sum += cache.alpha(t * 2 + b);
      }
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
  }

  // Random context vector still yields a proper softmax.
  for (Eigen::Index i = 0; i < params.v.size(); ++i) params.v(i) = rng.gaussian();
  auto h = random_frames<double>(5, 3, D, 99);
  nn::AttnPoolCache<double> cache;
  nn::attention_pool(h, params, PoolingKind::kAttnShared, 1e-10, &cache);
  for (int b = 0; b < 3; ++b) {
    double sum = 0.0;
    for (int t = 0; t < 5; ++t) sum += cache.alpha(t * 3 + b);
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
  }

  // T = 1: alpha = (1), mean = h1, std at the floor.
  auto h1 = random_frames<double>(1, 1, D, 100);
  const auto out1 = nn::attention_pool(h1, params, PoolingKind::kAttnShared, 1e-10,
                                       static_cast<nn::AttnPoolCache<double>*>(nullptr));
  for (int d = 0; d < D; ++d) {
    REQUIRE(out1(0, d) == Catch::Approx(h1.x(0, d)).margin(1e-12));
    REQUIRE(out1(0, D + d) == Catch::Approx(1e-5).margin(1e-9));
  }

  // Split mode: keys = left half, values = right half.
  nn::AttnParams<double> split_params;
  split_params.w = params.w.topRows(5);
  split_params.b = params.b;
  split_params.v = Vec<double>::Zero(ad);
  auto hs = random_frames<double>(6, 2, D, 101);
  const auto split_out = nn::attention_pool(hs, split_params, PoolingKind::kAttnSplit,
                                            1e-10, static_cast<nn::AttnPoolCache<double>*>(nullptr));
  Frames<double> values;
  values.batch = 2;
  values.x = hs.x.rightCols(5);
  const auto stats_values =
      nn::stats_pool(values, 1e-10, static_cast<nn::StatsPoolCache<double>*>(nullptr));
  REQUIRE((split_out - stats_values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dropout") {
  Mat<double> x = random_frames<double>(10, 2, 6, 71).x;
  Rng rng(1);
  Mat<double> mask;
  REQUIRE((nn::dropout_forward(x, 0.0, Phase::kTrain, rng, &mask) - x)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  REQUIRE((nn::dropout_forward(x, 0.5, Phase::kInfer, rng, &mask) - x)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  REQUIRE_THROWS(nn::dropout_forward(x, 1.0, Phase::kTrain, rng, &mask));

  // Inverted dropout keeps the expectation: E[y] = x.
  Mat<double> ones = Mat<double>::Ones(100000, 1);
  Rng rng2(2);
  const auto y = nn::dropout_forward(ones, 0.3, Phase::kTrain, rng2, &mask);
  REQUIRE(y.mean() == Catch::Approx(1.0).epsilon(0.02));
}

TEST_CASE("softmax cross-entropy") {
  Mat<double> uniform = Mat<double>::Zero(3, 10);
  std::vector<uint32_t> labels{1, 5, 9};
  Mat<double> dlogits;
  const double loss = nn::softmax_ce(uniform, std::span<const uint32_t>(labels), &dlogits);
  REQUIRE(loss == Catch::Approx(std::log(10.0)).margin(1e-9));

  // Gradient rows sum to zero per example.
  REQUIRE(dlogits.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);

  // Raising the correct-class logit drives the loss monotonically to zero.
  double prev = loss;
  for (double boost : {2.0, 5.0, 10.0, 30.0}) {
    Mat<double> logits = Mat<double>::Zero(1, 10);
    logits(0, 4) = boost;
    std::vector<uint32_t> lab{4};
    const double l = nn::softmax_ce(logits, std::span<const uint32_t>(lab),
                                    static_cast<Mat<double>*>(nullptr));
    REQUIRE(l < prev);
    prev = l;
  }
  REQUIRE(prev < 1e-10);

  // Central-difference check of dlogits.
  Mat<double> logits = random_frames<double>(2, 2, 7, 81).x.topRows(3);
  std::vector<uint32_t> lab{0, 6, 3};
  Mat<double> grad;
  nn::softmax_ce(logits, std::span<const uint32_t>(lab), &grad);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < 7; ++c) {
      const double h = 1e-6;
      Mat<double> lp = logits, lm = logits;
      lp(r, c) += h;
      lm(r, c) -= h;
      const double fd = (nn::softmax_ce(lp, std::span<const uint32_t>(lab),
                                        static_cast<Mat<double>*>(nullptr)) -
                         nn::softmax_ce(lm, std::span<const uint32_t>(lab),
                                        static_cast<Mat<double>*>(nullptr))) /
                        (2 * h);
      REQUIRE(grad(r, c) == Catch::Approx(fd).margin(1e-7));
    }

  std::vector<uint32_t> bad{12};
  Mat<double> l1 = Mat<double>::Zero(1, 10);
  REQUIRE_THROWS(nn::softmax_ce(l1, std::span<const uint32_t>(bad),
                                static_cast<Mat<double>*>(nullptr)));
}

TEST_CASE("l2 penalty values, scope and exclusions") {
  TopologyConfig cfg = tiny_topology();
  cfg.l2 = {0.0, 0.0002, L2Scope::kSegmentOnly};
  auto p = build_network<double>(cfg, 5);
  for (auto& r : trainable_tensors(p))
    for (Eigen::Index i = 0; i < r.size; ++i) r.data[i] = 0.0;
  REQUIRE(l2_penalty<double>(p, cfg.l2, nullptr) == 0.0);

  // A single weight of 3 under beta 0.0002: penalty 0.0009, gradient 0.0006.
  p.segment2.w(0, 0) = 3.0;
  auto grads = zeros_like(p);
  const double penalty = l2_penalty(p, cfg.l2, &grads);
  REQUIRE(penalty == Catch::Approx(0.0009).margin(1e-15));
  REQUIRE(grads.segment2.w(0, 0) == Catch::Approx(0.0006).margin(1e-15));

  // segment_only leaves frame-layer weights untouched, exactly.
  p.frames[1].w.setConstant(2.0);
  auto grads2 = zeros_like(p);
  l2_penalty(p, cfg.l2, &grads2);
  REQUIRE(grads2.frames[1].w.cwiseAbs().maxCoeff() == 0.0);

  // scope = all penalizes frame weights with beta_segment.
  L2Config all{0.0, 0.0002, L2Scope::kAll};
  auto grads3 = zeros_like(p);
  l2_penalty(p, all, &grads3);
  REQUIRE(grads3.frames[1].w(0, 0) == Catch::Approx(0.0004).margin(1e-15));

  // Biases and BN parameters never participate.
  p.segment2.b.setConstant(5.0);
  p.segment2.bn.gamma.setConstant(5.0);
  auto grads4 = zeros_like(p);
  l2_penalty(p, all, &grads4);
  REQUIRE(grads4.segment2.b.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(grads4.segment2.bn.gamma.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full forward: shapes, independence, parameter-count invariance") {
  TopologyConfig cfg = default_topology(50);
  auto p = build_network<float>(cfg, 9);
  auto batch = random_frames<float>(15, 2, 23, 91);
  auto fc = network_forward(p, batch, Phase::kTrain, nullptr);
  REQUIRE(fc.logits.rows() == 2);
  REQUIRE(fc.logits.cols() == 50);
  REQUIRE(fc.embeddings.rows() == 2);
  REQUIRE(fc.embeddings.cols() == 512);

  // BN running stats are primed now; duplicated utterances in an inference
  // batch give identical logit rows.
  Frames<float> dup;
  dup.batch = 2;
  dup.x.resize(15 * 2, 23);
  auto single = random_frames<float>(15, 1, 23, 92);
  for (int t = 0; t < 15; ++t) {
    dup.x.row(t * 2) = single.x.row(t);
    dup.x.row(t * 2 + 1) = single.x.row(t);
  }
  auto fc2 = network_forward(p, dup, Phase::kInfer, nullptr);
  REQUIRE((fc2.logits.row(0) - fc2.logits.row(1)).cwiseAbs().maxCoeff() == 0.0f);

  // Both BN orders expose the same trainable parameter count.
  TopologyConfig before = tiny_topology();
  before.bn_order = BnOrder::kBeforeAct;
  TopologyConfig after = tiny_topology();
  auto pb = build_network<double>(before, 3);
  auto pa = build_network<double>(after, 3);
  int64_t nb = 0, na = 0;
  for (const auto& r : trainable_tensors(pb)) nb += r.size;
  for (const auto& r : trainable_tensors(pa)) na += r.size;
  REQUIRE(nb == na);
}

TEST_CASE("extract_embedding requires context and is deterministic") {
  TopologyConfig cfg = tiny_topology();
  auto p = build_network<double>(cfg, 13);
  // Prime BN running stats with one training batch.
  auto batch = random_frames<double>(12, 4, 6, 95);
  network_forward(p, batch, Phase::kTrain, nullptr);

  Mat<double> utt = random_frames<double>(20, 1, 6, 96).x;
  const auto e1 = extract_embedding(p, utt);
  const auto e2 = extract_embedding(p, utt);
  REQUIRE(e1 == e2);
  REQUIRE(e1.size() == 8);
  REQUIRE(e1.allFinite());

  // Split versus whole both succeed (no equality asserted: pooling is
  // global over [1, T]).
  const Mat<double> head = utt.topRows(10);
  const auto half = extract_embedding(p, head);
  REQUIRE(half.allFinite());

  const Mat<double> too_short = utt.topRows(6);  // receptive field is 7
  REQUIRE_THROWS_WITH(extract_embedding(p, too_short),
                      Catch::Matchers::ContainsSubstring("too short"));
}
