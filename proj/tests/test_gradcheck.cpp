// tests/test_gradcheck.cpp

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

#include "support/gradcheck_harness.hpp"

using namespace xvec;
using namespace xvec::testsupport;

TEST_CASE("analytic gradients match central differences on all pooling modes") {
  for (auto pooling : {PoolingKind::kStats, PoolingKind::kAttnShared,
                       PoolingKind::kAttnSplit}) {
    const auto cfg = gradcheck_topology(pooling, Activation::kLrelu,
                                        BnOrder::kAfterAct, true, true);
    const auto result = gradcheck_network(cfg, 11, 9, 2);
    INFO("pooling " << to_string(pooling) << " worst " << result.worst_tensor);
    REQUIRE(result.max_rel_error < 1e-4);
  }
}

TEST_CASE("analytic gradients match central differences for each activation") {
  for (auto act : {Activation::kRelu, Activation::kLrelu, Activation::kPrelu}) {
    const auto cfg = gradcheck_topology(PoolingKind::kStats, act,
                                        BnOrder::kAfterAct, false, false);
    const auto result = gradcheck_network(cfg, 21, 9, 2);
    INFO("activation " << to_string(act) << " worst " << result.worst_tensor);
    REQUIRE(result.max_rel_error < 1e-4);
  }
}

TEST_CASE("analytic gradients match central differences for both BN orders") {
  for (auto order : {BnOrder::kAfterAct, BnOrder::kBeforeAct}) {
    const auto cfg = gradcheck_topology(PoolingKind::kAttnSplit,
                                        Activation::kPrelu, order, false, true);
    const auto result = gradcheck_network(cfg, 31, 9, 2);
    INFO("order " << to_string(order) << " worst " << result.worst_tensor);
    REQUIRE(result.max_rel_error < 1e-4);
  }
}
