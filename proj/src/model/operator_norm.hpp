// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "autodiff/kernels.hpp"
#include "autodiff/tensor.hpp"
#include "common/error.hpp"
#include "model/network.hpp"

namespace maxmatch {

/// Matrix-free linear map R^cols -> R^rows with its adjoint.
struct LinearOperator {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;
  std::function<void(std::span<const double>, std::span<double>)> apply_transpose;

  /// Views `m`; the tensor must outlive the operator.
  static LinearOperator dense(const Tensor& m);
  /// op(U) for one convolution layer without bias.
  static LinearOperator convolution(const Tensor& kernel, const ConvGeometry& g);
};

struct PowerIterationOptions {
  int max_iterations = 1000;
  double tolerance = 1e-10;  // relative change between successive estimates
  std::uint64_t seed = 0x5eedULL;
};

/// Thrown when power iteration hits the iteration cap; carries the last estimate.
class NonConvergenceError : public NumericError {
 public:
  NonConvergenceError(const std::string& what, double last_estimate)
      : NumericError(what), last_estimate_(last_estimate) {}
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  double last_estimate_;
};

/// Largest singular value by power iteration on A^T A from a seeded start vector.
double spectral_norm(const LinearOperator& op, const PowerIterationOptions& opts = {});
double spectral_norm(const Tensor& matrix, const PowerIterationOptions& opts = {});

/// Dense op(U): rows index (Cout, Ho, Wo), columns index (Cin, H, W), so that
/// op(U) * vec(x) == vec(conv(U, x)).
Tensor conv_operator_matrix(const Tensor& kernel, const ConvGeometry& g);

/// Operator norm of one weight tensor (conv kernels through op(U)).
double layer_operator_norm(const Architecture& arch, std::size_t layer, const Tensor& weight,
                           const PowerIterationOptions& opts = {});

/// d_N: sum over layers of operator-norm distances between weights. Biases excluded.
double network_distance(const ParamSnapshot& a, const ParamSnapshot& b, const PowerIterationOptions& opts = {});

}  // namespace maxmatch
