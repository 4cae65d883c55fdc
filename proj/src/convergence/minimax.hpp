// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace maxmatch {

using Point = std::vector<double>;

/// phi(theta) = max_j 0.5 ||theta - c_j||^2. Each component has identity
/// Hessian, so kappa = 1 is its gradient-Lipschitz constant.
struct SyntheticMinimax {
  std::vector<Point> centers;

  std::size_t dim() const { return centers.empty() ? 0 : centers[0].size(); }
  std::size_t m() const { return centers.size(); }
  std::vector<double> component_losses(std::span<const double> theta) const;
  double phi(std::span<const double> theta) const;
  void validate() const;

  /// m centers with coordinates drawn N(0, scale^2).
  static SyntheticMinimax random(std::size_t d, std::size_t m, double scale, std::uint64_t seed);
};

struct ProxResult {
  Point point;                  // argmin phi(t) + kappa ||t - theta||^2
  std::vector<double> weights;  // dual simplex weights over components
  double value = 0.0;           // phi(point) + kappa ||point - theta||^2
  double gap = 0.0;             // duality gap certificate
};

/// Exact solve by enumerating active sets; with kappa = 0 this is the
/// minimizer of phi itself (minimum enclosing ball center). Throws
/// NumericError if no candidate certifies a gap below `tolerance`.
ProxResult prox_point(const SyntheticMinimax& inst, std::span<const double> theta, double kappa,
                      double tolerance = 1e-8);

/// 2 kappa ||theta - prox(theta)||.
double moreau_grad_norm(const SyntheticMinimax& inst, std::span<const double> theta, double kappa);

/// Envelope value phi(prox) + kappa ||prox - theta||^2.
double moreau_envelope(const SyntheticMinimax& inst, std::span<const double> theta, double kappa);

double min_phi(const SyntheticMinimax& inst);

double stationarity_rhs(double lipschitz, double kappa, double b, double gap, double t, double delta);

struct ConvergenceConfig {
  std::size_t d = 10;
  std::size_t m = 5;
  std::vector<Point> centers;  // empty: generated from center_seed
  std::uint64_t center_seed = 11;
  double center_scale = 1.0;
  Point theta0;  // empty: generated from theta0_seed
  std::uint64_t theta0_seed = 12;
  double theta0_scale = 3.0;
  double sigma = 0.1;
  std::size_t steps = 10000;
  std::string eta = "optimal";  // "optimal" or a positive number as text
  double kappa = 1.0;
  double delta = 0.1;
  std::uint64_t seed = 1;
  std::size_t stride = 1;
  std::size_t fit_from = 100;

  void validate() const;
  SyntheticMinimax instance() const;
  Point initial_point() const;
};

nlohmann::json to_json(const ConvergenceConfig& c);
ConvergenceConfig convergence_config_from_json(const nlohmann::json& j);

struct TracePoint {
  std::size_t step = 0;
  double envelope_grad_norm = 0.0;
  double running_avg_sq = 0.0;
  double rhs_bound = 0.0;
  double selected_value = 0.0;  // max component loss at theta_t
  std::size_t selected = 0;     // component used for the step
};

struct ConvergenceTrace {
  std::vector<TracePoint> points;
  std::vector<Point> thetas;  // strided iterates
  double eta = 0.0;
  double lipschitz = 0.0;     // L used in the bound
  double lipschitz_observed = 0.0;
  double b = 0.0;             // max phi gap over visited iterates
  double gap0 = 0.0;          // envelope(theta0) - min phi
  double final_avg_sq = 0.0;
  double final_rhs = 0.0;
  double slope = 0.0;         // least-squares slope of log running average vs log t
};

/// Iterates theta <- theta - eta (grad l_{j*}(theta) + sigma xi) with j* the
/// vertex maximizer. With eta = "optimal" the step is
/// sqrt(gap / (kappa L^2 T)), with L re-estimated from the visited region
/// until it covers every observed gradient norm.
ConvergenceTrace run_convergence_experiment(const ConvergenceConfig& cfg);

/// Least-squares slope of log(y) against log(x) over points with x >= from.
double loglog_slope(std::span<const double> x, std::span<const double> y, double from);

std::string convergence_csv(const ConvergenceTrace& trace);

}  // namespace maxmatch
