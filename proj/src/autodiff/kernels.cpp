// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "autodiff/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace maxmatch {

void ConvGeometry::validate() const {
  if (kernel == 0 || in_channels == 0 || out_channels == 0) throw ShapeError("conv: zero-sized geometry");
  if (kernel > height + 2 * padding || kernel > width + 2 * padding) {
    throw ShapeError("conv: kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(height + 2 * padding) + "x" + std::to_string(width + 2 * padding));
  }
}

namespace kernels {

namespace {
void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected a matrix, got " + shape_str(t.shape()));
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out({n, m});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = po + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  const std::size_t k = a.dim(0), n = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul_tn: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out({n, m});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = pb + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = pa[p * n + i];
      if (av == 0.0) continue;
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
  if (b.dim(1) != k) {
    throw ShapeError("matmul_nt: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out({n, m});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += pa[i * k + p] * pb[j * k + p];
      po[i * m + j] = s;
    }
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.size() != x.cols()) {
    throw ShapeError("add_bias: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(bias.shape()));
  }
  Tensor out = x;
  const std::size_t c = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] += bias[j];
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor softmax(const Tensor& logits) {
  Tensor out = logits;
  const std::size_t c = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : row) v /= z;
    (void)c;
  }
  return out;
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     shape_str(logits.shape()));
  }
  Tensor out({logits.rows()});
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    if (labels[r] >= row.size()) throw ConfigError("cross_entropy: label out of range");
    out[r] = cross_entropy_row(row, labels[r]);
  }
  return out;
}

double cross_entropy_row(std::span<const double> row, std::size_t label) {
  const double mx = *std::max_element(row.begin(), row.end());
  const double sy = row[label];
  if (sy == mx) {
    // log1p keeps full relative precision for confident rows.
    double rest = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i != label) rest += std::exp(row[i] - sy);
    }
    return std::log1p(rest);
  }
  double z = 0.0;
  for (double v : row) z += std::exp(v - mx);
  return std::log(z) + mx - sy;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, const ConvGeometry& g) {
  g.validate();
  if (x.cols() != g.in_size()) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " does not match geometry " +
                     shape_str({g.in_channels, g.height, g.width}));
  }
  if (kernel.shape() != g.kernel_shape()) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " vs expected " + shape_str(g.kernel_shape()));
  }
  const std::size_t n = x.rows(), ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
  Tensor out({n, g.out_size()});
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x.data().data() + s * g.in_size();
    double* ys = out.data().data() + s * g.out_size();
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const double b = bias.empty() ? 0.0 : bias[co];
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = b;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            const double* kk = kernel.data().data() + ((co * g.in_channels + ci) * k) * k;
            const double* xc = xs + ci * g.height * g.width;
            for (std::size_t ky = 0; ky < k; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
              if (iy < 0 || iy >= h) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
                if (ix < 0 || ix >= w) continue;
                acc += kk[ky * k + kx] * xc[iy * w + ix];
              }
            }
          }
          ys[(co * ho + oy) * wo + ox] = acc;
        }
      }
    }
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& gy, const Tensor& kernel, const ConvGeometry& g) {
  const std::size_t n = gy.rows(), ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
  Tensor gx({n, g.in_size()});
  for (std::size_t s = 0; s < n; ++s) {
    const double* gys = gy.data().data() + s * g.out_size();
    double* gxs = gx.data().data() + s * g.in_size();
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double up = gys[(co * ho + oy) * wo + ox];
          if (up == 0.0) continue;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            const double* kk = kernel.data().data() + ((co * g.in_channels + ci) * k) * k;
            double* gxc = gxs + ci * g.height * g.width;
            for (std::size_t ky = 0; ky < k; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
              if (iy < 0 || iy >= h) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
                if (ix < 0 || ix >= w) continue;
                gxc[iy * w + ix] += kk[ky * k + kx] * up;
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

Tensor conv2d_backward_kernel(const Tensor& gy, const Tensor& x, const ConvGeometry& g) {
  const std::size_t n = gy.rows(), ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
  Tensor gk(g.kernel_shape());
  for (std::size_t s = 0; s < n; ++s) {
    const double* gys = gy.data().data() + s * g.out_size();
    const double* xs = x.data().data() + s * g.in_size();
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double up = gys[(co * ho + oy) * wo + ox];
          if (up == 0.0) continue;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            double* gkk = gk.data().data() + ((co * g.in_channels + ci) * k) * k;
            const double* xc = xs + ci * g.height * g.width;
            for (std::size_t ky = 0; ky < k; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
              if (iy < 0 || iy >= h) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
                if (ix < 0 || ix >= w) continue;
                gkk[ky * k + kx] += xc[iy * w + ix] * up;
              }
            }
          }
        }
      }
    }
  }
  return gk;
}

}  // namespace kernels
}  // namespace maxmatch
