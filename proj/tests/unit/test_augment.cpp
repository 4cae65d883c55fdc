// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "augment/augment.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

using namespace maxmatch;

namespace {

// Independent re-implementation of the generator's documented draws on top of
// the raw mt19937_64 stream.
struct HandRng {
  std::mt19937_64 e;
  explicit HandRng(std::uint64_t seed) : e(seed) {}
  double uniform() { return static_cast<double>(e() >> 11) / 9007199254740992.0; }
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    for (;;) {
      const std::uint64_t r = e();
      if (r < limit) return r % n;
    }
  }
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }
};

const Shape kImage{1, 8, 8};

std::vector<double> test_image() {
  std::vector<double> x(64);
  for (std::size_t i = 0; i < 64; ++i) x[i] = static_cast<double>((i * 37) % 64) / 63.0;
  return x;
}

// Crop oracle: output (y, x) reads input (y + oy, x + ox) of the flipped image.
std::vector<double> expected_weak(const std::vector<double>& x, bool flip, std::int64_t oy, std::int64_t ox) {
  std::vector<double> flipped(64), out(64, 0.0);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) flipped[r * 8 + c] = x[r * 8 + (flip ? 7 - c : c)];
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      const std::int64_t sr = r + oy, sc = c + ox;
      if (sr < 0 || sr >= 8 || sc < 0 || sc >= 8) continue;
      out[r * 8 + c] = flipped[sr * 8 + sc];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("weak augmentation on a fixed 8x8 image follows the seed stream") {
  const AugmentConfig cfg;
  const auto x = test_image();
  for (std::uint64_t seed : {1ull, 2ull, 77ull, 123456789ull}) {
    HandRng h(seed);
    const bool flip = h.uniform() < cfg.flip_probability;
    const std::int64_t pad = static_cast<std::int64_t>(cfg.crop_padding);
    const std::int64_t oy = h.between(-pad, pad);
    const std::int64_t ox = h.between(-pad, pad);
    CHECK(weak_augment(x, kImage, seed, cfg) == expected_weak(x, flip, oy, ox));
  }
}

TEST_CASE("weak augmentation with no flip and a centered crop is the identity") {
  const AugmentConfig cfg;
  const auto x = test_image();
  std::uint64_t found = 0;
  for (std::uint64_t seed = 1; seed < 10000 && found == 0; ++seed) {
    HandRng h(seed);
    const bool flip = h.uniform() < cfg.flip_probability;
    const std::int64_t pad = static_cast<std::int64_t>(cfg.crop_padding);
    const std::int64_t oy = h.between(-pad, pad);
    const std::int64_t ox = h.between(-pad, pad);
    if (!flip && oy == 0 && ox == 0) found = seed;
  }
  REQUIRE(found != 0);
  CHECK(weak_augment(x, kImage, found, cfg) == x);

  AugmentConfig off;
  off.flip_probability = 0.0;
  off.crop_padding = 0;
  CHECK(weak_augment(x, kImage, 5, off) == x);
}

TEST_CASE("vector weak augmentation with zero noise is the identity") {
  AugmentConfig cfg;
  cfg.weak_noise = 0.0;
  const std::vector<double> x{0.3, -1.2};
  CHECK(weak_augment(x, Shape{2}, 9, cfg) == x);
  cfg.weak_noise = 0.1;
  CHECK_FALSE(weak_augment(x, Shape{2}, 9, cfg) == x);
}

TEST_CASE("strong augmentation restricted to identity is the identity") {
  AugmentConfig cfg;
  cfg.image_pool = {OpKind::kIdentity};
  const auto x = test_image();
  CHECK(strong_augment(x, kImage, 3, cfg) == x);
}

TEST_CASE("invert at full magnitude maps v to 1 - v") {
  const auto x = test_image();
  Rng rng(1);
  const auto y = apply_op({OpKind::kInvert, 1.0}, x, kImage, AugmentConfig{}, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == 1.0 - x[i]);
}

TEST_CASE("strong augmentation on a fixed image matches per-op oracles") {
  AugmentConfig cfg;
  cfg.image_pool = {OpKind::kInvert, OpKind::kSolarize, OpKind::kBrightness, OpKind::kPosterize};
  cfg.n_ops = 3;
  const auto x = test_image();
  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
  for (std::uint64_t seed : {4ull, 5ull, 6ull, 99ull}) {
    HandRng h(seed);
    std::vector<double> cur = x;
    for (std::size_t i = 0; i < cfg.n_ops; ++i) {
      const OpKind kind = cfg.image_pool[h.below(cfg.image_pool.size())];
      const double m = h.uniform();
      for (double& v : cur) {
        switch (kind) {
          case OpKind::kInvert:
            v = 1.0 - v;
            break;
          case OpKind::kSolarize:
            if (v > 1.0 - m) v = 1.0 - v;
            break;
          case OpKind::kBrightness:
            v = clamp01(v * (1.0 + 0.9 * (2.0 * m - 1.0)));
            break;
          case OpKind::kPosterize: {
            const long drop = std::lround(4.0 * m);
            const long q = std::lround(v * 255.0);
            v = static_cast<double>((q >> drop) << drop) / 255.0;
            break;
          }
          default:
            FAIL("unexpected op");
        }
      }
    }
    CHECK(strong_augment(x, kImage, seed, cfg) == cur);
  }
}

TEST_CASE("geometric ops keep pixels in range and mid magnitude is neutral") {
  const auto x = test_image();
  const AugmentConfig cfg;
  for (OpKind k : {OpKind::kRotate, OpKind::kShear, OpKind::kBrightness, OpKind::kContrast}) {
    Rng rng(1);
    CHECK(apply_op({k, 0.5}, x, kImage, cfg, rng) == x);
  }
  for (OpKind k : {OpKind::kRotate, OpKind::kTranslate, OpKind::kShear, OpKind::kContrast, OpKind::kBrightness}) {
    Rng rng(2);
    for (double v : apply_op({k, 0.95}, x, kImage, cfg, rng)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("vector ops") {
  AugmentConfig cfg;
  const std::vector<double> x{1.0, 0.0};
  Rng rng(1);
  // Full magnitude rotation by +rotate_degrees around the origin.
  const auto r = apply_op({OpKind::kRotate2d, 1.0}, x, Shape{2}, cfg, rng);
  const double a = cfg.rotate_degrees * 3.14159265358979323846 / 180.0;
  CHECK(r[0] == doctest::Approx(std::cos(a)));
  CHECK(r[1] == doctest::Approx(std::sin(a)));
  const auto s = apply_op({OpKind::kScale, 1.0}, x, Shape{2}, cfg, rng);
  CHECK(s[0] == doctest::Approx(cfg.scale_high));
  CHECK(apply_op({OpKind::kJitter, 0.0}, x, Shape{2}, cfg, rng) == x);
}

TEST_CASE("uncertainty sets") {
  const AugmentConfig cfg;
  const auto x = test_image();

  SUBCASE("K=1 is the plain strong augmentation with the variant-0 seed") {
    const UncertaintySet u = build_uncertainty_set(x, kImage, 1, 7, 3, 2, cfg);
    REQUIRE(u.size() == 1);
    const auto direct = strong_augment(x, kImage, variant_seed(7, 3, 2, 0), cfg);
    CHECK(std::vector<double>(u.variants.row(0).begin(), u.variants.row(0).end()) == direct);
  }
  SUBCASE("deterministic and nested across K") {
    const UncertaintySet a = build_uncertainty_set(x, kImage, 3, 7, 3, 2, cfg);
    const UncertaintySet b = build_uncertainty_set(x, kImage, 3, 7, 3, 2, cfg);
    CHECK(a.variants == b.variants);
    const UncertaintySet big = build_uncertainty_set(x, kImage, 5, 7, 3, 2, cfg);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::equal(a.variants.row(j).begin(), a.variants.row(j).end(), big.variants.row(j).begin()));
    }
  }
  SUBCASE("variants are generally distinct") {
    std::size_t distinct_sets = 0;
    for (std::size_t id = 0; id < 100; ++id) {
      const UncertaintySet u = build_uncertainty_set(x, kImage, 3, 11, id, 0, cfg);
      std::set<std::uint64_t> seeds(u.variant_seeds.begin(), u.variant_seeds.end());
      CHECK(seeds.size() == 3);
      std::set<std::vector<double>> views;
      for (std::size_t j = 0; j < 3; ++j) views.emplace(u.variants.row(j).begin(), u.variants.row(j).end());
      if (views.size() == 3) ++distinct_sets;
    }
    CHECK(distinct_sets >= 80);
  }
  SUBCASE("K=0 is rejected") { CHECK_THROWS_AS(build_uncertainty_set(x, kImage, 0, 1, 0, 0, cfg), ConfigError); }
}

TEST_CASE("augment config round trip and validation") {
  AugmentConfig c;
  c.image_pool = {OpKind::kShear, OpKind::kInvert};
  c.n_ops = 4;
  CHECK(to_json(augment_config_from_json(to_json(c))) == to_json(c));
  CHECK(op_from_name(op_name(OpKind::kRotate2d)) == OpKind::kRotate2d);
  CHECK_THROWS_AS(op_from_name("warp-drive"), ConfigError);
  CHECK_THROWS_AS(augment_config_from_json(nlohmann::json{{"n-opz", 2}}), ConfigError);
  CHECK_THROWS_AS(augment_config_from_json(nlohmann::json{{"flip-probability", 1.5}}), ConfigError);
}
