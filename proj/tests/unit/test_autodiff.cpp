// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include <doctest.h>

#include <cmath>
#include <vector>

#include "autodiff/kernels.hpp"
#include "autodiff/tape.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "model/operator_norm.hpp"
#include "selfcheck/oracles.hpp"

using namespace maxmatch;

TEST_CASE("relu and softmax on small vectors") {
  const Tensor x({1, 3}, {-1.0, 0.0, 2.0});
  CHECK(kernels::relu(x).vec() == std::vector<double>{0.0, 0.0, 2.0});
  const Tensor s = kernels::softmax(Tensor({1, 2}, {0.0, 0.0}));
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(0.5));
}

TEST_CASE("softmax is shift invariant and survives large logits") {
  const Tensor a = kernels::softmax(Tensor({1, 3}, {1.0, 2.0, 3.0}));
  const Tensor b = kernels::softmax(Tensor({1, 3}, {1001.0, 1002.0, 1003.0}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  CHECK(b.all_finite());
}

TEST_CASE("gradient of sum(w*w) is 2w") {
  Tape tape;
  Var w = tape.leaf(Tensor({2}, {1.0, 2.0}));
  Var loss = ops::sum(ops::mul(w, w));
  tape.backward(loss);
  CHECK(loss.value().item() == 5.0);
  CHECK(w.grad().vec() == std::vector<double>{2.0, 4.0});
}

TEST_CASE("cross-entropy gradient at equal logits") {
  Tape tape;
  Var s = tape.leaf(Tensor({1, 2}, {0.0, 0.0}));
  const std::vector<std::size_t> y{0};
  Var loss = ops::sum(ops::cross_entropy_rows(s, y));
  tape.backward(loss);
  CHECK(loss.value().item() == doctest::Approx(std::log(2.0)));
  CHECK(s.grad()[0] == doctest::Approx(-0.5));
  CHECK(s.grad()[1] == doctest::Approx(0.5));
}

TEST_CASE("constants receive no gradient and leaf gradients accumulate") {
  Tape tape;
  Var w = tape.leaf(Tensor({2}, {1.0, -1.0}));
  Var c = tape.constant(Tensor({2}, {3.0, 4.0}));
  Var loss = ops::sum(ops::mul(w, c));
  tape.backward(loss);
  tape.backward(loss);
  CHECK(w.grad().vec() == std::vector<double>{6.0, 8.0});
  CHECK_FALSE(c.requires_grad());
  tape.zero_leaf_grads();
  CHECK(w.grad().vec() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tape tape;
  Var w = tape.leaf(Tensor({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(tape.backward(ops::mul(w, w)), ShapeError);
}

TEST_CASE("matmul shape mismatch raises ShapeError") {
  CHECK_THROWS_AS(kernels::matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST_CASE("tape gradients match finite differences on a composite expression") {
  Rng rng(5);
  auto rand = [&](Shape s) {
    Tensor t(s);
    for (double& v : t.data()) v = rng.normal();
    return t;
  };
  const Tensor x = rand({3, 4});
  const std::vector<std::size_t> y{0, 2, 1};
  std::vector<Tensor> params{rand({4, 3}), rand({3})};
  auto taped = [&](const std::vector<Tensor>& p, std::vector<Tensor>* grads) {
    Tape tape;
    Var w = tape.leaf(p[0]);
    Var b = tape.leaf(p[1]);
    Var h = ops::add_bias(ops::matmul(tape.constant(x), w), b);
    Var loss = ops::mean(ops::cross_entropy_rows(h, y));
    if (grads != nullptr) {
      tape.backward(loss);
      *grads = {w.grad(), b.grad()};
    }
    return loss.value().item();
  };
  std::vector<Tensor> analytic;
  taped(params, &analytic);
  const auto numeric = oracle::finite_difference([&](const std::vector<Tensor>& p) { return taped(p, nullptr); },
                                                 params, 1e-6);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      CHECK(analytic[i][j] == doctest::Approx(numeric[i][j]).epsilon(1e-6));
    }
  }
}

TEST_CASE("conv2d with an averaging kernel equals op(U) times vec(x)") {
  ConvGeometry g;
  g.height = 4;
  g.width = 4;
  Tensor kernel(g.kernel_shape(), 1.0 / 9.0);
  Tensor x({1, 16});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
  const Tensor y = kernels::conv2d(x, kernel, Tensor({1}, 0.0), g);
  const std::vector<double> direct = oracle::scatter_conv(x.row(0), kernel, g);
  const std::vector<double> via_matrix = oracle::matvec(conv_operator_matrix(kernel, g), x.row(0));
  REQUIRE(y.size() == direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    CHECK(y[i] == doctest::Approx(direct[i]).epsilon(1e-14));
    CHECK(via_matrix[i] == doctest::Approx(direct[i]).epsilon(1e-14));
  }
  // Interior pixel (1,1): mean of the 3x3 neighbourhood {0,1,2,4,5,6,8,9,10}.
  CHECK(y[5] == doctest::Approx(5.0));
}

TEST_CASE("conv2d gradients match finite differences") {
  ConvGeometry g;
  g.in_channels = 2;
  g.out_channels = 3;
  g.height = 5;
  g.width = 4;
  Rng rng(9);
  Tensor x({2, g.in_size()});
  for (double& v : x.data()) v = rng.normal();
  std::vector<Tensor> params{Tensor(g.kernel_shape()), Tensor({3})};
  for (auto& p : params)
    for (double& v : p.data()) v = rng.normal();
  auto f = [&](const std::vector<Tensor>& p, std::vector<Tensor>* grads) {
    Tape tape;
    Var k = tape.leaf(p[0]);
    Var b = tape.leaf(p[1]);
    Var y = ops::conv2d(tape.constant(x), k, b, g);
    Var loss = ops::sum(ops::mul(y, y));
    if (grads != nullptr) {
      tape.backward(loss);
      *grads = {k.grad(), b.grad()};
    }
    return loss.value().item();
  };
  std::vector<Tensor> analytic;
  f(params, &analytic);
  const auto numeric = oracle::finite_difference([&](const std::vector<Tensor>& p) { return f(p, nullptr); },
                                                 params, 1e-6);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      CHECK(analytic[i][j] == doctest::Approx(numeric[i][j]).epsilon(1e-5));
    }
  }
}
