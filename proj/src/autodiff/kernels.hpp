// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <span>

#include "autodiff/tensor.hpp"

namespace maxmatch {

/// Stride-1 zero-padded square-kernel convolution over planar (C, H, W) samples.
struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t padding = 1;

  std::size_t out_height() const { return height + 2 * padding - kernel + 1; }
  std::size_t out_width() const { return width + 2 * padding - kernel + 1; }
  std::size_t in_size() const { return in_channels * height * width; }
  std::size_t out_size() const { return out_channels * out_height() * out_width(); }
  Shape kernel_shape() const { return {out_channels, in_channels, kernel, kernel}; }
  /// Throws ShapeError when the kernel does not fit the padded input.
  void validate() const;
};

// Plain (untaped) kernels. The tape ops call exactly these, so taped and
// untaped forwards agree bit for bit.
namespace kernels {

/// a: n x k, b: k x m.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T b with a: k x n, b: k x m.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a b^T with a: n x k, b: m x k.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);
/// Row-wise softmax over the trailing axis of an n x c tensor.
Tensor softmax(const Tensor& logits);
/// Row-wise log-sum-exp minus the label score.
Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels);
/// Hard cross-entropy of one score row; label must be in range.
double cross_entropy_row(std::span<const double> row, std::size_t label);

/// x: N x (Cin*H*W); kernel: Cout x Cin x k x k; bias: Cout (may be empty).
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, const ConvGeometry& g);
/// Gradient with respect to the input given upstream gradient gy: N x out_size.
Tensor conv2d_backward_input(const Tensor& gy, const Tensor& kernel, const ConvGeometry& g);
Tensor conv2d_backward_kernel(const Tensor& gy, const Tensor& x, const ConvGeometry& g);

}  // namespace kernels
}  // namespace maxmatch
