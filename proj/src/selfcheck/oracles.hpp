// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

// Reference implementations used only to cross-check the library: slow,
// written independently of the production kernels.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "autodiff/kernels.hpp"
#include "autodiff/tensor.hpp"

namespace maxmatch::oracle {

/// Singular values (descending) by one-sided Jacobi rotations.
std::vector<double> singular_values(const Tensor& m);

/// Convolution of one sample by scattering every input pixel into the
/// outputs it touches (cross-correlation, zero padding, no bias).
std::vector<double> scatter_conv(std::span<const double> x, const Tensor& kernel, const ConvGeometry& g);

/// op(U) assembled column by column from scatter_conv impulse responses.
Tensor impulse_response_matrix(const Tensor& kernel, const ConvGeometry& g);

/// Central differences of f with respect to every entry of every tensor.
std::vector<Tensor> finite_difference(const std::function<double(const std::vector<Tensor>&)>& f,
                                      const std::vector<Tensor>& params, double h);

/// Best value of sum_j w_j l_j over the simplex grid with spacing 1/divisions.
double simplex_grid_max(std::span<const double> losses, std::size_t divisions);

/// Matrix-vector product row by row.
std::vector<double> matvec(const Tensor& m, std::span<const double> x);

}  // namespace maxmatch::oracle
