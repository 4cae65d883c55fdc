// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include <doctest.h>

#include <cmath>
#include <vector>

#include "augment/augment.hpp"
#include "autodiff/kernels.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "losses/losses.hpp"
#include "model/network.hpp"

using namespace maxmatch;

// Reference values computed offline with mpmath (tests/oracles/bound_oracles.py).
constexpr double kCe10y0 = 0.31326168751822283405;
constexpr double kCe50y1 = 5.0067153484891180686;
constexpr double kEntropy91 = 0.32508297339144823951;
constexpr double kSoftFloor = 0.021072103131565260246;

TEST_CASE("zero-one loss") {
  CHECK(zero_one(3, 3, 5) == 0);
  CHECK(zero_one(2, 3, 5) == 1);
  CHECK_THROWS_AS(zero_one(5, 3, 5), ConfigError);
}

TEST_CASE("hard cross-entropy") {
  const std::vector<double> uniform(10, 0.7);
  CHECK(ce_hard(uniform, 4) == doctest::Approx(std::log(10.0)).epsilon(1e-15));
  CHECK(ce_hard(std::vector<double>{1.0, 0.0}, 0) == doctest::Approx(kCe10y0).epsilon(1e-15));
  CHECK(ce_hard(std::vector<double>{5.0, 0.0}, 1) == doctest::Approx(kCe50y1).epsilon(1e-15));
  // Large margins stay finite.
  CHECK(std::isfinite(ce_hard(std::vector<double>{1000.0, -1000.0}, 1)));
  CHECK_THROWS_AS(ce_hard(std::vector<double>{1.0, 0.0}, 2), ConfigError);
}

TEST_CASE("soft cross-entropy") {
  const std::vector<double> fair{0.5, 0.5};
  CHECK(ce_soft(fair, fair, 0.05) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> p{0.9, 0.1};
  CHECK(ce_soft(p, p, 0.05) == doctest::Approx(kEntropy91).epsilon(1e-14));
  CHECK(ce_soft_floor(2, 0.1) == doctest::Approx(kSoftFloor).epsilon(1e-14));
}

TEST_CASE("soft cross-entropy of any pair stays above the clamped floor") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(4), b(4);
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      a[i] = rng.uniform() * (trial % 3 == 0 ? 1e-6 : 1.0);
      b[i] = rng.uniform();
      sa += a[i];
      sb += b[i];
    }
    a[trial % 4] += 1.0;
    sa += 1.0;
    for (auto& v : a) v /= sa;
    for (auto& v : b) v /= sb;
    CHECK(ce_soft(a, b, 0.1) >= ce_soft_floor(4, 0.1) - 1e-15);
  }
  CHECK_THROWS_AS(check_epsilon(0.0), ConfigError);
  CHECK_THROWS_AS(check_epsilon(1.0), ConfigError);
}

TEST_CASE("clamping bounds each coordinate without renormalizing") {
  const auto c = clamp_probabilities(std::vector<double>{1.0, 0.0, 0.3}, 0.1);
  CHECK(c == std::vector<double>{0.9, 0.1, 0.3});
}

TEST_CASE("aggregation") {
  const std::vector<double> l{0.2, 0.5, 0.3};
  Aggregate a = aggregate(l, AggregatorMode::kMax);
  CHECK(a.value == 0.5);
  CHECK(a.index == 1);
  a = aggregate(l, AggregatorMode::kMean);
  CHECK(a.value == doctest::Approx(1.0 / 3.0));
  CHECK(a.index == 0);
  a = aggregate(l, AggregatorMode::kMin);
  CHECK(a.value == 0.2);
  CHECK(a.index == 0);
  for (AggregatorMode m : {AggregatorMode::kMax, AggregatorMode::kMean, AggregatorMode::kMin}) {
    const Aggregate one = aggregate(std::vector<double>{0.4}, m);
    CHECK(one.value == 0.4);
    CHECK(one.index == 0);
  }
  // Ties go to the smallest index.
  CHECK(aggregate(std::vector<double>{1.0, 3.0, 3.0}, AggregatorMode::kMax).index == 1);
  CHECK_THROWS_AS(aggregate(std::vector<double>{}, AggregatorMode::kMax), ConfigError);
  CHECK(aggregator_from_name(aggregator_name(AggregatorMode::kMin)) == AggregatorMode::kMin);
  CHECK_THROWS_AS(aggregator_from_name("median"), ConfigError);
}

TEST_CASE("max dominates mean dominates min on random loss vectors") {
  Rng rng(8);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> l(1 + rng.below(6));
    for (double& v : l) v = rng.uniform(0.0, 5.0);
    const double mx = aggregate(l, AggregatorMode::kMax).value;
    const double mn = aggregate(l, AggregatorMode::kMin).value;
    const double me = aggregate(l, AggregatorMode::kMean).value;
    CHECK(mx >= me - 1e-12);
    CHECK(me >= mn - 1e-12);
  }
}

TEST_CASE("constant-output network gives equal losses across variants") {
  ParamSnapshot p{Architecture::mlp(64, {}, 3), {Tensor({64, 3}), Tensor({3}, {0.3, -0.2, 1.0})}};
  const Network net(p);
  std::vector<double> x(64, 0.5);
  const UncertaintySet u = build_uncertainty_set(x, Shape{1, 8, 8}, 4, 1, 0, 0, AugmentConfig{});
  for (TargetMode m : {TargetMode::kPseudoLabel, TargetMode::kSoft}) {
    const auto l = consistency_losses(net, x, u, m, 0.05);
    REQUIRE(l.size() == 4);
    for (double v : l) CHECK(v == l[0]);
  }
}

TEST_CASE("thresholded unlabeled loss") {
  const Network net(Architecture::mlp(2, {8}, 2), 4);
  Rng rng(1);
  Tensor weak({6, 2});
  for (double& v : weak.data()) v = rng.normal();
  AugmentConfig cfg;
  std::vector<UncertaintySet> usets;
  for (std::size_t i = 0; i < 6; ++i) usets.push_back(build_uncertainty_set(weak.row(i), Shape{2}, 3, 2, i, 0, cfg));

  SUBCASE("beta above every probability masks everything") {
    const UnlabeledLoss u = fixmatch_unlabeled_loss(net, weak, usets, 1.0, AggregatorMode::kMax);
    CHECK(u.loss == 0.0);
    CHECK(u.mask_rate == 0.0);
  }
  SUBCASE("beta 0 with K=1 is the plain single-variant consistency loss") {
    std::vector<UncertaintySet> single;
    for (std::size_t i = 0; i < 6; ++i) single.push_back(build_uncertainty_set(weak.row(i), Shape{2}, 1, 2, i, 0, cfg));
    const UnlabeledLoss u = fixmatch_unlabeled_loss(net, weak, single, 0.0, AggregatorMode::kMax);
    CHECK(u.mask_rate == 1.0);
    const Tensor target = kernels::softmax(net.forward(weak));
    double expect = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      const std::size_t label = target.at(i, 0) >= target.at(i, 1) ? 0 : 1;
      const Tensor s = net.forward(single[i].variants);
      expect += ce_hard(s.row(0), label);
    }
    CHECK(u.loss == doctest::Approx(expect / 6.0).epsilon(1e-14));
  }
  SUBCASE("max, mean and min statistics are ordered") {
    const UnlabeledLoss u = fixmatch_unlabeled_loss(net, weak, usets, 0.0, AggregatorMode::kMax);
    const double mx = masked_row_statistic(u.detail, AggregatorMode::kMax);
    const double me = masked_row_statistic(u.detail, AggregatorMode::kMean);
    const double mn = masked_row_statistic(u.detail, AggregatorMode::kMin);
    CHECK(u.loss == doctest::Approx(mx));
    CHECK(mx >= me);
    CHECK(me >= mn);
  }
}

TEST_CASE("total loss") {
  CHECK(total_loss(0.7, 5.0, 0.0) == 0.7);
  CHECK(total_loss(0.7, 0.5, 2.0) == doctest::Approx(1.7));
}
