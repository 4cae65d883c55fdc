// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "common/error.hpp"
#include "data/dataset.hpp"

using namespace maxmatch;

TEST_CASE("two-moons class balance and determinism") {
  const Dataset a = make_two_moons(100, 0.1, 3);
  CHECK(std::count(a.labels.begin(), a.labels.end(), 0u) == 50);
  CHECK(std::count(a.labels.begin(), a.labels.end(), 1u) == 50);
  const Dataset b = make_two_moons(100, 0.1, 3);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(make_two_moons(100, 0.1, 4).features == a.features);
  CHECK_THROWS_AS(make_two_moons(99, 0.1, 3), ConfigError);
}

TEST_CASE("noiseless two-moons points lie on their arcs") {
  const Dataset d = make_two_moons(200, 0.0, 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = d.features.at(i, 0), y = d.features.at(i, 1);
    if (d.labels[i] == 0) {
      CHECK(y >= 0.0);
      CHECK(x * x + y * y == doctest::Approx(1.0));
    } else {
      CHECK(y <= 0.5);
      CHECK((1.0 - x) * (1.0 - x) + (0.5 - y) * (0.5 - y) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("IDX parsing") {
  std::vector<std::uint8_t> pixels(10 * 28 * 28);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i % 256);
  pixels[0] = 255;
  std::vector<std::uint8_t> labels{7, 2, 1, 0, 4, 1, 4, 9, 5, 9};
  const std::string img = encode_idx_images(pixels, 10, 28, 28);
  const std::string lab = encode_idx_labels(labels);
  const Dataset d = parse_idx(img, lab);
  CHECK(d.size() == 10);
  CHECK(d.sample_shape == Shape{1, 28, 28});
  CHECK(d.n_classes == 10);
  CHECK(d.features.at(0, 0) == 1.0);
  CHECK(d.features.at(0, 1) == doctest::Approx(1.0 / 255.0));
  CHECK(d.labels.front() == 7);

  SUBCASE("bad magic") {
    std::string bad = img;
    bad[3] = 0x01;
    CHECK_THROWS_AS(parse_idx(bad, lab), FormatError);
  }
  SUBCASE("truncated payload") { CHECK_THROWS_AS(parse_idx(img.substr(0, img.size() - 1), lab), FormatError); }
  SUBCASE("count mismatch") {
    CHECK_THROWS_AS(parse_idx(img, encode_idx_labels(std::vector<std::uint8_t>(9, 0))), FormatError);
  }
}

TEST_CASE("official MNIST test file starts with label 7" * doctest::skip(std::getenv("MAXMATCH_MNIST_DIR") == nullptr)) {
  const std::filesystem::path dir = std::getenv("MAXMATCH_MNIST_DIR");
  const Dataset d = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  CHECK(d.size() == 10000);
  CHECK(d.labels.front() == 7);
}

TEST_CASE("SSL split picks exactly labels_per_class per class") {
  const Dataset d = make_two_moons(200, 0.1, 1);
  const SslSplit s = split_ssl(d, 4, 11);
  CHECK(s.labeled.size() == 8);
  std::map<std::size_t, int> per_class;
  for (std::size_t i : s.labeled) ++per_class[d.labels[i]];
  CHECK(per_class[0] == 4);
  CHECK(per_class[1] == 4);
  CHECK(s.unlabeled.size() == 200);

  const SslSplit disjoint = split_ssl(d, 4, 11, UnlabeledMode::kDisjoint);
  CHECK(disjoint.labeled == s.labeled);
  CHECK(disjoint.unlabeled.size() == 192);
  std::set<std::size_t> lab(s.labeled.begin(), s.labeled.end());
  for (std::size_t i : disjoint.unlabeled) CHECK(lab.count(i) == 0);

  const SslSplit all = split_ssl(d, 100, 11, UnlabeledMode::kDisjoint);
  CHECK(all.labeled.size() == 200);
  CHECK(all.unlabeled.empty());
  CHECK_THROWS_AS(split_ssl(d, 101, 11), ConfigError);
}

TEST_CASE("ten classes with four labels each give forty labeled samples") {
  std::vector<std::uint8_t> pixels(100 * 4, 0), labels(100);
  for (std::size_t i = 0; i < 100; ++i) labels[i] = static_cast<std::uint8_t>(i % 10);
  const Dataset d = parse_idx(encode_idx_images(pixels, 100, 2, 2), encode_idx_labels(labels));
  CHECK(split_ssl(d, 4, 1).labeled.size() == 40);
}

TEST_CASE("different fold seeds give different labeled sets") {
  const Dataset d = make_two_moons(400, 0.1, 1);
  std::set<std::vector<std::size_t>> seen;
  for (std::uint64_t f = 0; f < 5; ++f) {
    auto idx = split_ssl(d, 4, 100 + f).labeled;
    std::sort(idx.begin(), idx.end());
    seen.insert(idx);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("batch iterator keeps the batch sizes and visits each index once per epoch") {
  const Dataset d = make_two_moons(200, 0.1, 1);
  const SslSplit s = split_ssl(d, 20, 3);
  REQUIRE(s.labeled.size() == 40);
  BatchIterator it(s, 8, 56, 9, true);
  std::map<std::size_t, int> count;
  const std::size_t steps = 23;
  for (std::size_t t = 0; t < steps; ++t) {
    const Batch b = it.next();
    CHECK(b.labeled.size() == 8);
    CHECK(b.unlabeled.size() == 56);
    CHECK(b.unlabeled.size() == 7 * b.labeled.size());
    for (std::size_t i : b.labeled) ++count[i];
  }
  // 23 steps * 8 = 184 draws over 40 indices: 4 full epochs plus a partial one.
  const int expect = static_cast<int>(std::ceil(steps * 8.0 / 40.0));
  for (std::size_t i : s.labeled) {
    CHECK(count[i] >= expect - 1);
    CHECK(count[i] <= expect + 1);
  }
}

TEST_CASE("batch iterator seek reproduces the stream") {
  const Dataset d = make_two_moons(100, 0.1, 1);
  const SslSplit s = split_ssl(d, 5, 3);
  BatchIterator a(s, 4, 12, 1, true);
  for (int i = 0; i < 7; ++i) a.next();
  const auto pos = a.position();
  const Batch expected = a.next();
  BatchIterator b(s, 4, 12, 1, true);
  b.seek(pos);
  const Batch got = b.next();
  CHECK(got.labeled == expected.labeled);
  CHECK(got.unlabeled == expected.unlabeled);
  CHECK(got.unlabeled_epoch == expected.unlabeled_epoch);
}

TEST_CASE("empty unlabeled pool without unlabeled batches degenerates to supervised batches") {
  const Dataset d = make_two_moons(20, 0.1, 1);
  const SslSplit s = split_ssl(d, 10, 3, UnlabeledMode::kDisjoint);
  BatchIterator it(s, 4, 0, 1, false);
  const Batch b = it.next();
  CHECK(b.labeled.size() == 4);
  CHECK(b.unlabeled.empty());
}

TEST_CASE("data config round trip and unknown keys") {
  DataConfig c;
  c.n = 300;
  c.labels_per_class = 7;
  c.unlabeled_mode = UnlabeledMode::kDisjoint;
  const DataConfig back = data_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(data_config_from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
}
