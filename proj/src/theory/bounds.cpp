// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "theory/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "autodiff/kernels.hpp"
#include "common/error.hpp"
#include "losses/losses.hpp"
#include "model/operator_norm.hpp"

namespace maxmatch {

namespace {

struct Field {
  const char* name;
  double BoundConfig::*member;
};

constexpr Field kFields[] = {
    {"epsilon", &BoundConfig::epsilon}, {"delta", &BoundConfig::delta},     {"n-l", &BoundConfig::n_l},
    {"n-u", &BoundConfig::n_u},         {"n-c", &BoundConfig::n_c},         {"k", &BoundConfig::k},
    {"w", &BoundConfig::w},             {"w-g", &BoundConfig::w_g},         {"chi", &BoundConfig::chi},
    {"chi-tau", &BoundConfig::chi_tau}, {"beta-dist", &BoundConfig::beta_dist}, {"nu", &BoundConfig::nu},
    {"c0", &BoundConfig::c0},
};

double log_checked(double arg, const char* what) {
  if (!(arg > 1.0)) {
    throw NumericError(std::string(what) + ": log argument " + std::to_string(arg) +
                       " is not above 1; the bound is vacuous for these inputs");
  }
  return std::log(arg);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive and finite");
}

double scale_constant(double chi, double beta_dist, double nu) {
  if (chi < 0.0) throw ConfigError("chi must be nonnegative");
  if (!(nu > -1.0)) throw ConfigError("nu must exceed -1");
  return 3.0 * chi * std::exp(beta_dist / (1.0 + nu));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double row_norm(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

}  // namespace

void BoundConfig::validate() const {
  check_epsilon(epsilon);
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  require_positive(n_l, "n-l");
  require_positive(n_u, "n-u");
  require_positive(n_c, "n-c");
  require_positive(k, "k");
  require_positive(w, "w");
  require_positive(w_g, "w-g");
  if (chi < 0.0 || chi_tau < 0.0) throw ConfigError("chi and chi-tau must be nonnegative");
  if (beta_dist < 0.0) throw ConfigError("beta-dist must be nonnegative");
  if (!(nu > -1.0)) throw ConfigError("nu must exceed -1");
  require_positive(c0, "c0");
}

nlohmann::json to_json(const BoundConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : kFields) j[f.name] = c.*(f.member);
  return j;
}

BoundConfig bound_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("bound config must be a JSON object");
  BoundConfig c;
  for (const auto& [key, v] : j.items()) {
    if (!v.is_number()) throw ConfigError("bound config: '" + key + "' must be a number");
    set_bound_field(c, key, v.get<double>());
  }
  c.validate();
  return c;
}

std::vector<std::string> bound_config_fields() {
  std::vector<std::string> out;
  for (const Field& f : kFields) out.emplace_back(f.name);
  return out;
}

void set_bound_field(BoundConfig& c, const std::string& field, double value) {
  for (const Field& f : kFields) {
    if (field == f.name) {
      c.*(f.member) = value;
      return;
    }
  }
  throw ConfigError("bound config: unknown field '" + field + "'");
}

Constants constants(double n_c, double eps) {
  check_epsilon(eps);
  require_positive(n_c, "n_c");
  return {1.0 / (n_c * eps * std::log(1.0 / (1.0 - eps))), 1.0 / std::log(2.0)};
}

double rademacher_multi_bound(double n, double n_c, double w, double chi, double beta_dist, double nu) {
  require_positive(n, "n");
  require_positive(n_c, "n_c");
  require_positive(w, "W");
  const double root = std::sqrt(n * n_c);
  const double c_n = scale_constant(chi, beta_dist, nu);
  const double lg = log_checked(c_n * root, "multi-output Rademacher bound");
  return 4.0 / root + 12.0 / root * std::sqrt(w * lg);
}

double rademacher_single_bound(double n, double w_g, double chi, double beta_dist, double nu) {
  require_positive(n, "n");
  require_positive(w_g, "W_g");
  const double c = scale_constant(chi, beta_dist, nu);
  const double lg = log_checked(c * n, "single-output Rademacher bound");
  return 4.0 / std::sqrt(n) + 12.0 / std::sqrt(n) * std::sqrt(w_g * lg);
}

double big_psi(double n_l, double n_c, double psi, double delta) {
  if (!(n_l >= 3.0)) throw ConfigError("n-l must be at least 3 for the labeled complexity term");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  const double lead = std::sqrt(n_c) * std::pow(std::log(n_l * n_c * std::exp(1.0)), 1.5) * psi;
  return 2.0 * (lead + 1.0 / std::sqrt(n_l)) +
         std::log(n_c * std::exp(1.0)) / n_l * (std::log(2.0 / delta) + std::log(std::log(n_l)));
}

BoundReport kterm_bound(const BoundConfig& cfg, double risk_l, double risk_u) {
  cfg.validate();
  if (risk_l < 0.0 || risk_u < 0.0) throw ConfigError("empirical risks must be nonnegative");
  BoundReport r;
  const Constants c = constants(cfg.n_c, cfg.epsilon);
  r.c1 = c.c1;
  r.c2 = c.c2;
  r.risk_l = risk_l;
  r.risk_u = risk_u;
  r.c_n = scale_constant(cfg.chi, cfg.beta_dist, cfg.nu);
  r.c_m = scale_constant(std::max(cfg.chi, cfg.chi_tau), cfg.beta_dist, cfg.nu);
  r.psi = rademacher_multi_bound(cfg.n_l, cfg.n_c, cfg.w, cfg.chi, cfg.beta_dist, cfg.nu);
  r.big_psi = big_psi(cfg.n_l, cfg.n_c, r.psi, cfg.delta);

  const double bracket = 1.0 + 3.0 * std::sqrt(cfg.w_g * log_checked(r.c_m * cfg.n_u, "unlabeled complexity term"));
  r.term_k = r.c1 * (16.0 * cfg.k * cfg.n_c / std::sqrt(cfg.n_u)) * ((1.0 - cfg.epsilon) / cfg.epsilon) * bracket;
  r.term_deviation_u = r.c1 * 3.0 * std::sqrt(std::log(4.0 / cfg.delta) / (2.0 * cfg.n_u));
  r.term_risk_u = r.c1 * risk_u;
  r.term_risk_l = r.c2 * (1.0 + cfg.c0 / 2.0) * risk_l;
  r.term_complexity_u = r.term_k + r.term_deviation_u;
  r.term_complexity_l = 1.5 * cfg.c0 * r.c2 * r.big_psi;
  r.total = r.term_risk_u + r.term_risk_l + r.term_complexity_u + r.term_complexity_l;
  return r;
}

double risk_bound_assemble(double c1, double c2, double risk_l, double risk_u, double rad_l, double rad_u, double n_l,
                     double n_u, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  require_positive(n_l, "n_l");
  require_positive(n_u, "n_u");
  const double lg = std::log(4.0 / delta);
  return c1 * risk_u + c2 * risk_l + 2.0 * c2 * rad_l + 2.0 * c1 * rad_u + 3.0 * c2 * std::sqrt(lg / (2.0 * n_l)) +
         3.0 * c1 * std::sqrt(lg / (2.0 * n_u));
}

nlohmann::json to_json(const BoundReport& r) {
  return {{"c1", r.c1},
          {"c2", r.c2},
          {"c-n", r.c_n},
          {"c-m", r.c_m},
          {"psi", r.psi},
          {"big-psi", r.big_psi},
          {"risk-labeled", r.risk_l},
          {"risk-unlabeled", r.risk_u},
          {"terms",
           {{"unlabeled-risk", r.term_risk_u},
            {"labeled-risk", r.term_risk_l},
            {"unlabeled-complexity", r.term_complexity_u},
            {"unlabeled-k-term", r.term_k},
            {"unlabeled-deviation", r.term_deviation_u},
            {"labeled-complexity", r.term_complexity_l}}},
          {"total", r.total}};
}

std::string bound_table(const BoundReport& r) {
  std::ostringstream os;
  auto line = [&](const char* name, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-28s %18.10g\n", name, v);
    os << buf;
  };
  line("C1", r.c1);
  line("C2", r.c2);
  line("C_N", r.c_n);
  line("C_M", r.c_m);
  line("psi", r.psi);
  line("Psi", r.big_psi);
  line("C1 * R_DU", r.term_risk_u);
  line("C2 (1 + C0/2) * R_DL", r.term_risk_l);
  line("unlabeled complexity", r.term_complexity_u);
  line("  K-proportional part", r.term_k);
  line("  deviation part", r.term_deviation_u);
  line("labeled complexity", r.term_complexity_l);
  line("total", r.total);
  return os.str();
}

AggregationResult max_aggregation_verify(std::span<const double> losses) {
  const Aggregate best = aggregate(losses, AggregatorMode::kMax);
  AggregationResult r;
  r.weights.assign(losses.size(), 0.0);
  r.weights[best.index] = 1.0;
  r.value = best.value;
  return r;
}

double empirical_risk_labeled(const Network& net, const Tensor& x, std::span<const std::size_t> y) {
  if (y.empty()) throw ConfigError("empirical risk: empty labeled set");
  if (x.rows() != y.size()) throw ShapeError("empirical risk: feature/label count mismatch");
  const Tensor s = net.forward(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += ce_hard(s.row(i), y[i]);
  return acc / static_cast<double>(y.size());
}

double empirical_risk_unlabeled_worst(const Network& net, const Tensor& x, const std::vector<UncertaintySet>& usets,
                                      double eps) {
  check_epsilon(eps);
  if (x.rows() == 0) throw ConfigError("empirical risk: empty unlabeled set");
  if (usets.size() != x.rows()) {
    throw ConfigError("empirical risk: " + std::to_string(x.rows()) + " unlabeled samples but " +
                      std::to_string(usets.size()) + " uncertainty sets");
  }
  const Tensor targets = kernels::softmax(net.forward(x));
  double acc = 0.0;
  for (std::size_t i = 0; i < usets.size(); ++i) {
    if (usets[i].size() == 0) throw ConfigError("empirical risk: empty uncertainty set");
    const auto losses = variant_losses(net.forward(usets[i].variants), targets.row(i), 0, TargetMode::kSoft, eps);
    acc += aggregate(losses, AggregatorMode::kMax).value;
  }
  return acc / static_cast<double>(usets.size());
}

NormBounds measure_norm_bounds(const ParamSnapshot& init, const ParamSnapshot& current, const Tensor& inputs,
                               const Tensor& transformed) {
  NormBounds b;
  for (std::size_t i = 0; i < inputs.rows(); ++i) b.chi = std::max(b.chi, row_norm(inputs.row(i)));
  for (std::size_t i = 0; i < transformed.rows(); ++i) b.chi_tau = std::max(b.chi_tau, row_norm(transformed.row(i)));
  if (!(init.architecture == current.architecture)) {
    throw ShapeError("measure_norm_bounds: initial and current architectures differ");
  }
  double largest = 0.0;
  for (std::size_t l = 0; l < init.layer_count(); ++l) {
    double norm = 0.0;
    try {
      norm = layer_operator_norm(init.architecture, l, init.weight(l));
    } catch (const NonConvergenceError& e) {
      norm = e.last_estimate();
      b.converged = false;
    }
    largest = std::max(largest, norm);
  }
  b.nu = std::max(0.0, largest - 1.0);
  try {
    b.beta_dist = network_distance(current, init);
  } catch (const NonConvergenceError& e) {
    b.beta_dist = e.last_estimate();
    b.converged = false;
  }
  return b;
}

std::string bound_sweep_csv(const BoundConfig& base, const std::string& field, double start, double stop,
                            std::size_t steps, double risk_l, double risk_u) {
  if (steps < 1) throw ConfigError("sweep: steps must be at least 1");
  BoundConfig probe = base;
  set_bound_field(probe, field, start);  // rejects unknown fields early
  std::ostringstream os;
  os << field
     << ",c1,psi,big_psi,unlabeled_risk,labeled_risk,unlabeled_complexity,unlabeled_k_term,labeled_complexity,total\n";
  for (std::size_t i = 0; i < steps; ++i) {
    const double v =
        steps == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(steps - 1);
    BoundConfig c = base;
    set_bound_field(c, field, v);
    const BoundReport r = kterm_bound(c, risk_l, risk_u);
    os << fmt(v) << ',' << fmt(r.c1) << ',' << fmt(r.psi) << ',' << fmt(r.big_psi) << ',' << fmt(r.term_risk_u)
       << ',' << fmt(r.term_risk_l) << ',' << fmt(r.term_complexity_u) << ',' << fmt(r.term_k) << ','
       << fmt(r.term_complexity_l) << ',' << fmt(r.total) << '\n';
  }
  return os.str();
}

}  // namespace maxmatch
