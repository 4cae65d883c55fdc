// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "augment/augment.hpp"
#include "autodiff/tensor.hpp"
#include "model/network.hpp"

namespace maxmatch {

struct BoundConfig {
  double epsilon = 0.05;
  double delta = 0.05;
  double n_l = 40;
  double n_u = 50000;
  double n_c = 10;
  double k = 3;
  double w = 1e5;    // parameter count W
  double w_g = 1e5;  // single-output parameter count W_g
  double chi = 1.0;
  double chi_tau = 1.0;
  double beta_dist = 2.0;  // parameter-distance budget
  double nu = 0.0;
  double c0 = 1.0;

  void validate() const;
};

nlohmann::json to_json(const BoundConfig& c);
BoundConfig bound_config_from_json(const nlohmann::json& j);
/// Names accepted by sweeps and JSON ("n-u", "k", "chi-tau", ...).
std::vector<std::string> bound_config_fields();
void set_bound_field(BoundConfig& c, const std::string& field, double value);

struct Constants {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// C1 = 1 / (n_c eps ln(1/(1-eps))), C2 = 1 / ln 2.
Constants constants(double n_c, double eps);

/// 4/sqrt(n n_c) + 12/sqrt(n n_c) * sqrt(W ln(C_N sqrt(n n_c))),
/// C_N = 3 chi e^{beta/(1+nu)}. Throws NumericError when the log argument is <= 1.
double rademacher_multi_bound(double n, double n_c, double w, double chi, double beta_dist, double nu);

/// Single-output form: 4/sqrt(n) + 12/sqrt(n) * sqrt(W_g ln(C n)).
double rademacher_single_bound(double n, double w_g, double chi, double beta_dist, double nu);

struct BoundReport {
  double c1 = 0.0, c2 = 0.0;
  double c_n = 0.0, c_m = 0.0;
  double psi = 0.0, big_psi = 0.0;
  double risk_l = 0.0, risk_u = 0.0;
  double term_risk_u = 0.0;        // C1 * R_DU
  double term_risk_l = 0.0;        // C2 (1 + C0/2) * R_DL
  double term_complexity_u = 0.0;  // C1 (K-term + deviation)
  double term_k = 0.0;             //   K-proportional part of the above
  double term_deviation_u = 0.0;   //   C1 * 3 sqrt(ln(4/delta) / (2 n_u))
  double term_complexity_l = 0.0;  // (3 C0 C2 / 2) * Psi
  double total = 0.0;
};

nlohmann::json to_json(const BoundReport& r);
std::string bound_table(const BoundReport& r);

/// Psi term for the labeled side; needs n_l >= 3 so that ln ln n_l is defined
/// and nonnegative.
double big_psi(double n_l, double n_c, double psi, double delta);

BoundReport kterm_bound(const BoundConfig& cfg, double risk_l, double risk_u);

double risk_bound_assemble(double c1, double c2, double risk_l, double risk_u, double rad_l, double rad_u, double n_l,
                     double n_u, double delta);

struct AggregationResult {
  std::vector<double> weights;
  double value = 0.0;
};

/// Maximizes sum_j w_j l_j over the simplex: one-hot at the smallest argmax.
AggregationResult max_aggregation_verify(std::span<const double> losses);

/// Mean hard cross-entropy of the network over (x, y).
double empirical_risk_labeled(const Network& net, const Tensor& x, std::span<const std::size_t> y);

/// Mean over samples of the max over variants of clamped soft cross-entropy
/// between f(x') and f(x).
double empirical_risk_unlabeled_worst(const Network& net, const Tensor& x, const std::vector<UncertaintySet>& usets,
                                      double eps);

struct NormBounds {
  double chi = 0.0;
  double chi_tau = 0.0;
  double nu = 0.0;
  double beta_dist = 0.0;
  bool converged = true;  // false when a power iteration hit its cap
};

/// chi / chi_tau: largest input norm before / after transformation;
/// nu: largest initial layer operator norm minus one (floored at 0);
/// beta_dist: network distance between current and initial parameters.
NormBounds measure_norm_bounds(const ParamSnapshot& init, const ParamSnapshot& current, const Tensor& inputs,
                               const Tensor& transformed);

/// Rows: field value, then the itemized report columns.
std::string bound_sweep_csv(const BoundConfig& base, const std::string& field, double start, double stop,
                            std::size_t steps, double risk_l, double risk_u);

}  // namespace maxmatch
