// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "autodiff/kernels.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "model/network.hpp"
#include "model/operator_norm.hpp"
#include "model/snapshot_io.hpp"
#include "selfcheck/oracles.hpp"

using namespace maxmatch;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({r, c});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("zero network gives zero scores and a uniform softmax") {
  const Network net = Network::zeros(Architecture::mlp(3, {5}, 4));
  const Tensor s = net.forward(random_matrix(2, 3, 1));
  for (double v : s.data()) CHECK(v == 0.0);
  const Tensor p = kernels::softmax(s);
  for (double v : p.data()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("single identity layer maps one-hot inputs to themselves") {
  const Architecture arch = Architecture::mlp(3, {}, 3);
  ParamSnapshot p{arch, {Tensor({3, 3}), Tensor({3})}};
  for (std::size_t i = 0; i < 3; ++i) p.tensors[0].at(i, i) = 1.0;
  const Network net(p);
  const Tensor x({1, 3}, {0.0, 1.0, 0.0});
  CHECK(net.forward(x).vec() == x.vec());
}

TEST_CASE("two-layer MLP forward matches plain matrix arithmetic") {
  const Network net(Architecture::mlp(4, {6}, 3), 42);
  const Tensor x = random_matrix(5, 4, 7);
  const Tensor s = net.forward(x);
  const auto& w = net.tensors();
  for (std::size_t n = 0; n < 5; ++n) {
    std::vector<double> h(6);
    for (std::size_t j = 0; j < 6; ++j) {
      double acc = w[1][j];
      for (std::size_t i = 0; i < 4; ++i) acc += x.at(n, i) * w[0].at(i, j);
      h[j] = std::max(0.0, acc);
    }
    for (std::size_t k = 0; k < 3; ++k) {
      double acc = w[3][k];
      for (std::size_t j = 0; j < 6; ++j) acc += h[j] * w[2].at(j, k);
      CHECK(s.at(n, k) == doctest::Approx(acc).epsilon(1e-13));
    }
  }
}

TEST_CASE("taped and untaped forwards agree bit for bit") {
  const Network net(Architecture::small_cnn(1, 6, 6, 3), 3);
  const Tensor x = random_matrix(2, 36, 4);
  Tape tape;
  std::vector<Var> params;
  for (const Tensor& t : net.tensors()) params.push_back(tape.leaf(t));
  const Var s = net.forward(tape, tape.constant(x), params);
  CHECK(s.value() == net.forward(x));
}

TEST_CASE("same seed gives the same initialization") {
  const Architecture arch = Architecture::mlp(2, {8, 8}, 2);
  CHECK(Network(arch, 5).tensors() == Network(arch, 5).tensors());
  CHECK_FALSE(Network(arch, 5).tensors() == Network(arch, 6).tensors());
}

TEST_CASE("restore rejects a different architecture") {
  Network net(Architecture::mlp(2, {4}, 2), 1);
  const Network other(Architecture::mlp(2, {5}, 2), 1);
  CHECK_THROWS_AS(net.restore(other.snapshot()), ShapeError);
}

TEST_CASE("parameter counts W and W_g") {
  const Network net(Architecture::mlp(2, {4}, 3), 1);
  CHECK(net.parameter_count() == 2 * 4 + 4 + 4 * 3 + 3);
  CHECK(net.single_output_parameter_count() == 2 * 4 + 4 + 4 * 1 + 1);
}

TEST_CASE("operator matrix of simple kernels") {
  ConvGeometry g;
  g.height = 3;
  g.width = 3;

  SUBCASE("1x1 kernel with value c is c times identity") {
    g.kernel = 1;
    g.padding = 0;
    const Tensor m = conv_operator_matrix(Tensor(g.kernel_shape(), 2.5), g);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) CHECK(m.at(i, j) == (i == j ? 2.5 : 0.0));
  }
  SUBCASE("centered delta kernel is the identity") {
    Tensor k(g.kernel_shape());
    k[4] = 1.0;
    const Tensor m = conv_operator_matrix(k, g);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) CHECK(m.at(i, j) == (i == j ? 1.0 : 0.0));
  }
  SUBCASE("matches the impulse response oracle for a random multichannel kernel") {
    g.in_channels = 2;
    g.out_channels = 3;
    Rng rng(2);
    Tensor k(g.kernel_shape());
    for (double& v : k.data()) v = rng.normal();
    CHECK(conv_operator_matrix(k, g) == oracle::impulse_response_matrix(k, g));
  }
}

TEST_CASE("spectral norm") {
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  CHECK(spectral_norm(eye) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(spectral_norm(Tensor({2, 2}, {3.0, 0.0, 0.0, 1.0})) == doctest::Approx(3.0).epsilon(1e-9));
  const Tensor m = random_matrix(8, 8, 17);
  const double svd = oracle::singular_values(m).front();
  CHECK(std::abs(spectral_norm(m) - svd) <= 1e-6 * svd);
}

TEST_CASE("network distance") {
  const Network a(Architecture::mlp(3, {5}, 4), 8);
  CHECK(network_distance(a.snapshot(), a.snapshot()) == 0.0);

  ParamSnapshot b = a.snapshot();
  for (double& v : b.tensors[2].data()) v *= 2.0;
  const double v_norm = oracle::singular_values(a.snapshot().weight(1)).front();
  CHECK(network_distance(a.snapshot(), b) == doctest::Approx(v_norm).epsilon(1e-8));

  ParamSnapshot c = a.snapshot();
  for (double& v : c.tensors[0].data()) v *= -1.0;
  ParamSnapshot both = b;
  both.tensors[0] = c.tensors[0];
  const double sum = network_distance(a.snapshot(), b) + network_distance(a.snapshot(), c);
  CHECK(network_distance(a.snapshot(), both) == doctest::Approx(sum).epsilon(1e-8));

  // Biases do not count.
  ParamSnapshot d = a.snapshot();
  d.tensors[1].fill(3.0);
  CHECK(network_distance(a.snapshot(), d) == 0.0);
}

TEST_CASE("snapshot encode/decode round trip") {
  const Network net(Architecture::small_cnn(1, 4, 4, 2), 1);
  SnapshotFile f;
  f.architecture = net.architecture();
  f.add_group("params", net.snapshot());
  f.meta = {{"step", 12}};
  const SnapshotFile g = decode_snapshot(encode_snapshot(f));
  CHECK(g.architecture == f.architecture);
  CHECK(g.group("params").tensors == net.tensors());
  CHECK(g.meta["step"] == 12);
  CHECK_FALSE(g.has_group("ema"));
  CHECK_THROWS_AS(g.group("ema"), ConfigError);

  const auto path = std::filesystem::temp_directory_path() / "maxmatch_model_test.mmsnap";
  save_snapshot(path, f);
  CHECK(load_snapshot(path).group("params").tensors == net.tensors());
  std::filesystem::remove(path);
}

TEST_CASE("corrupted snapshots raise FormatError") {
  const Network net(Architecture::mlp(2, {3}, 2), 1);
  SnapshotFile f;
  f.architecture = net.architecture();
  f.add_group("params", net.snapshot());
  const std::string bytes = encode_snapshot(f);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_snapshot(bad_magic), FormatError);
  CHECK_THROWS_AS(decode_snapshot(bytes.substr(0, bytes.size() - 8)), FormatError);
  CHECK_THROWS_AS(decode_snapshot(bytes.substr(0, 12)), FormatError);
  CHECK_THROWS_AS(load_snapshot("/nonexistent/dir/file.mmsnap"), IoError);
}
