// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "model/operator_norm.hpp"

#include <cmath>
#include <vector>

#include "common/rng.hpp"

namespace maxmatch {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

LinearOperator LinearOperator::dense(const Tensor& m) {
  if (m.rank() != 2) throw ShapeError("spectral_norm: expected a matrix, got " + shape_str(m.shape()));
  LinearOperator op;
  op.rows = m.dim(0);
  op.cols = m.dim(1);
  op.apply = [&m](std::span<const double> x, std::span<double> y) {
    const std::size_t c = m.dim(1);
    for (std::size_t i = 0; i < m.dim(0); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += m[i * c + j] * x[j];
      y[i] = s;
    }
  };
  op.apply_transpose = [&m](std::span<const double> x, std::span<double> y) {
    const std::size_t c = m.dim(1);
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t i = 0; i < m.dim(0); ++i) {
      for (std::size_t j = 0; j < c; ++j) y[j] += m[i * c + j] * x[i];
    }
  };
  return op;
}

LinearOperator LinearOperator::convolution(const Tensor& kernel, const ConvGeometry& g) {
  g.validate();
  LinearOperator op;
  op.rows = g.out_size();
  op.cols = g.in_size();
  op.apply = [&kernel, g](std::span<const double> x, std::span<double> y) {
    Tensor in({1, g.in_size()}, std::vector<double>(x.begin(), x.end()));
    Tensor out = kernels::conv2d(in, kernel, Tensor(), g);
    std::copy(out.data().begin(), out.data().end(), y.begin());
  };
  op.apply_transpose = [&kernel, g](std::span<const double> x, std::span<double> y) {
    Tensor gy({1, g.out_size()}, std::vector<double>(x.begin(), x.end()));
    Tensor gx = kernels::conv2d_backward_input(gy, kernel, g);
    std::copy(gx.data().begin(), gx.data().end(), y.begin());
  };
  return op;
}

double spectral_norm(const LinearOperator& op, const PowerIterationOptions& opts) {
  if (op.rows == 0 || op.cols == 0) return 0.0;
  Rng rng(opts.seed);
  std::vector<double> v(op.cols), u(op.rows), w(op.cols);
  for (double& x : v) x = rng.normal();
  double nv = norm2(v);
  for (double& x : v) x /= nv;

  double sigma = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    op.apply(v, u);
    const double next = norm2(u);
    if (!std::isfinite(next)) throw NumericError("spectral_norm: non-finite operator entries");
    if (next == 0.0) return 0.0;
    op.apply_transpose(u, w);
    const double nw = norm2(w);
    if (nw == 0.0) return next;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / nw;
    if (it > 0 && std::abs(next - sigma) <= opts.tolerance * next) return next;
    sigma = next;
  }
  throw NonConvergenceError("spectral_norm: power iteration did not converge in " +
                                std::to_string(opts.max_iterations) + " iterations",
                            sigma);
}

double spectral_norm(const Tensor& matrix, const PowerIterationOptions& opts) {
  if (!matrix.all_finite()) throw NumericError("spectral_norm: non-finite matrix entries");
  return spectral_norm(LinearOperator::dense(matrix), opts);
}

Tensor conv_operator_matrix(const Tensor& kernel, const ConvGeometry& g) {
  g.validate();
  if (kernel.shape() != g.kernel_shape()) {
    throw ShapeError("conv_operator_matrix: kernel " + shape_str(kernel.shape()) + " vs expected " +
                     shape_str(g.kernel_shape()));
  }
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  Tensor m({g.out_size(), g.in_size()});
  const std::size_t cols = g.in_size();
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t row = (co * ho + oy) * wo + ox;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
              const std::size_t col = (ci * g.height + static_cast<std::size_t>(iy)) * g.width +
                                      static_cast<std::size_t>(ix);
              m[row * cols + col] += kernel[((co * g.in_channels + ci) * k + ky) * k + kx];
            }
          }
        }
      }
    }
  }
  return m;
}

double layer_operator_norm(const Architecture& arch, std::size_t layer, const Tensor& weight,
                           const PowerIterationOptions& opts) {
  if (!weight.all_finite()) throw NumericError("operator norm: non-finite weights");
  if (arch.layers.at(layer).kind == LayerKind::kConv) {
    return spectral_norm(LinearOperator::convolution(weight, arch.conv_geometry(layer)), opts);
  }
  return spectral_norm(LinearOperator::dense(weight), opts);
}

double network_distance(const ParamSnapshot& a, const ParamSnapshot& b, const PowerIterationOptions& opts) {
  if (!(a.architecture == b.architecture) || a.tensors.size() != b.tensors.size()) {
    throw ShapeError("network_distance: architecture mismatch");
  }
  double total = 0.0;
  for (std::size_t layer = 0; layer < a.layer_count(); ++layer) {
    const Tensor& wa = a.weight(layer);
    const Tensor& wb = b.weight(layer);
    require_same_shape(wa, wb, "network_distance");
    Tensor diff = wa;
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= wb[i];
    total += layer_operator_norm(a.architecture, layer, diff, opts);
  }
  return total;
}

}  // namespace maxmatch
