// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "selfcheck/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace maxmatch::oracle {

std::vector<double> singular_values(const Tensor& m) {
  const std::size_t rows = m.rows(), cols = m.cols();
  // Work on the orientation with fewer columns.
  const bool transpose = cols > rows;
  const std::size_t r = transpose ? cols : rows, c = transpose ? rows : cols;
  std::vector<double> a(r * c);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (transpose) {
        a[j * c + i] = m.at(i, j);
      } else {
        a[i * c + j] = m.at(i, j);
      }
    }
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < c; ++p) {
      for (std::size_t q = p + 1; q < c; ++q) {
        double alpha = 0, beta = 0, gamma = 0;
        for (std::size_t i = 0; i < r; ++i) {
          alpha += a[i * c + p] * a[i * c + p];
          beta += a[i * c + q] * a[i * c + q];
          gamma += a[i * c + p] * a[i * c + q];
        }
        if (gamma == 0.0) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t), sn = cs * t;
        for (std::size_t i = 0; i < r; ++i) {
          const double ap = a[i * c + p], aq = a[i * c + q];
          a[i * c + p] = cs * ap - sn * aq;
          a[i * c + q] = sn * ap + cs * aq;
        }
      }
    }
    if (off < 1e-15) break;
  }
  std::vector<double> sv(c);
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < r; ++i) s += a[i * c + j] * a[i * c + j];
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.rbegin(), sv.rend());
  return sv;
}

std::vector<double> scatter_conv(std::span<const double> x, const Tensor& kernel, const ConvGeometry& g) {
  const std::size_t ho = g.out_height(), wo = g.out_width();
  std::vector<double> out(g.out_size(), 0.0);
  const long pad = static_cast<long>(g.padding);
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t iy = 0; iy < g.height; ++iy) {
      for (std::size_t ix = 0; ix < g.width; ++ix) {
        const double v = x[(ci * g.height + iy) * g.width + ix];
        if (v == 0.0) continue;
        // Output (oy, ox) reads input (oy + ky - pad, ox + kx - pad).
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            const long oy = static_cast<long>(iy) + pad - static_cast<long>(ky);
            if (oy < 0 || oy >= static_cast<long>(ho)) continue;
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const long ox = static_cast<long>(ix) + pad - static_cast<long>(kx);
              if (ox < 0 || ox >= static_cast<long>(wo)) continue;
              const double w = kernel[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
              out[(co * ho + static_cast<std::size_t>(oy)) * wo + static_cast<std::size_t>(ox)] += w * v;
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor impulse_response_matrix(const Tensor& kernel, const ConvGeometry& g) {
  Tensor m({g.out_size(), g.in_size()});
  std::vector<double> e(g.in_size(), 0.0);
  for (std::size_t col = 0; col < g.in_size(); ++col) {
    e[col] = 1.0;
    const auto y = scatter_conv(e, kernel, g);
    for (std::size_t row = 0; row < y.size(); ++row) m.at(row, col) = y[row];
    e[col] = 0.0;
  }
  return m;
}

std::vector<Tensor> finite_difference(const std::function<double(const std::vector<Tensor>&)>& f,
                                      const std::vector<Tensor>& params, double h) {
  std::vector<Tensor> probe = params;
  std::vector<Tensor> grads;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor g(params[t].shape());
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double orig = probe[t][i];
      probe[t][i] = orig + h;
      const double up = f(probe);
      probe[t][i] = orig - h;
      const double down = f(probe);
      probe[t][i] = orig;
      g[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

namespace {
void grid_recurse(std::span<const double> l, std::size_t j, std::size_t left, std::size_t divisions, double acc,
                  double& best) {
  if (j + 1 == l.size()) {
    best = std::max(best, acc + l[j] * static_cast<double>(left) / static_cast<double>(divisions));
    return;
  }
  for (std::size_t u = 0; u <= left; ++u) {
    grid_recurse(l, j + 1, left - u, divisions, acc + l[j] * static_cast<double>(u) / static_cast<double>(divisions),
                 best);
  }
}
}  // namespace

double simplex_grid_max(std::span<const double> losses, std::size_t divisions) {
  if (losses.empty()) throw ConfigError("simplex grid: empty vector");
  double best = -INFINITY;
  grid_recurse(losses, 0, divisions, divisions, 0.0, best);
  return best;
}

std::vector<double> matvec(const Tensor& m, std::span<const double> x) {
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) y[i] += m.at(i, j) * x[j];
  }
  return y;
}

}  // namespace maxmatch::oracle
