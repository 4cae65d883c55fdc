// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "convergence/minimax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "theory/bounds.hpp"

namespace maxmatch {

namespace {

constexpr std::size_t kMaxComponents = 16;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dist_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Solves A x = b in place (row-major n x n); false when singular.
bool solve_linear(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (std::abs(a[piv * n + col]) < 1e-13) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * b[c];
    b[i] = s / a[i * n + i];
  }
  return true;
}

Point random_point(std::size_t d, double scale, Rng& rng) {
  Point p(d);
  for (double& v : p) v = rng.normal(0.0, scale);
  return p;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<double> SyntheticMinimax::component_losses(std::span<const double> theta) const {
  std::vector<double> out(centers.size());
  for (std::size_t j = 0; j < centers.size(); ++j) out[j] = 0.5 * dist_sq(theta, centers[j]);
  return out;
}

double SyntheticMinimax::phi(std::span<const double> theta) const {
  const auto l = component_losses(theta);
  return *std::max_element(l.begin(), l.end());
}

void SyntheticMinimax::validate() const {
  if (centers.empty()) throw ConfigError("minimax instance needs at least one center");
  if (centers.size() > kMaxComponents) {
    throw ConfigError("minimax instance: at most " + std::to_string(kMaxComponents) + " centers supported");
  }
  const std::size_t d = centers[0].size();
  if (d == 0) throw ConfigError("minimax instance: zero-dimensional centers");
  for (const Point& c : centers) {
    if (c.size() != d) throw ShapeError("minimax instance: centers differ in dimension");
  }
}

SyntheticMinimax SyntheticMinimax::random(std::size_t d, std::size_t m, double scale, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticMinimax inst;
  for (std::size_t j = 0; j < m; ++j) inst.centers.push_back(random_point(d, scale, rng));
  inst.validate();
  return inst;
}

ProxResult prox_point(const SyntheticMinimax& inst, std::span<const double> theta, double kappa, double tolerance) {
  inst.validate();
  if (kappa < 0.0) throw ConfigError("prox: kappa must be nonnegative");
  const std::size_t m = inst.m(), d = inst.dim();
  if (theta.size() != d) throw ShapeError("prox: point dimension does not match the instance");
  const double denom = 1.0 + 2.0 * kappa;

  std::vector<double> gram(m * m), half_sq(m), theta_dot(m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) gram[j * m + k] = dot(inst.centers[j], inst.centers[k]);
    half_sq[j] = 0.5 * gram[j * m + j];
    theta_dot[j] = dot(theta, inst.centers[j]);
  }

  ProxResult best;
  best.value = std::numeric_limits<double>::infinity();
  best.gap = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> active;
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    active.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (mask & (1u << j)) active.push_back(j);
    }
    // Unknowns: lambda over the active set, then mu. Equal active losses:
    // -theta'.c_j + |c_j|^2/2 = mu with theta' = (C lambda + 2 kappa theta) / denom.
    const std::size_t s = active.size(), n = s + 1;
    std::vector<double> a(n * n, 0.0), b(n, 0.0);
    for (std::size_t r = 0; r < s; ++r) {
      const std::size_t j = active[r];
      for (std::size_t c = 0; c < s; ++c) a[r * n + c] = -gram[j * m + active[c]] / denom;
      a[r * n + s] = -1.0;
      b[r] = -half_sq[j] + 2.0 * kappa * theta_dot[j] / denom;
    }
    for (std::size_t c = 0; c < s; ++c) a[s * n + c] = 1.0;
    b[s] = 1.0;
    if (!solve_linear(a, b, n)) continue;

    std::vector<double> lambda(m, 0.0);
    bool feasible = true;
    for (std::size_t r = 0; r < s; ++r) {
      if (b[r] < -1e-10) feasible = false;
      lambda[active[r]] = std::max(0.0, b[r]);
    }
    if (!feasible) continue;
    double total = 0.0;
    for (double v : lambda) total += v;
    for (double& v : lambda) v /= total;

    Point pt(d);
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 2.0 * kappa * theta[i];
      for (std::size_t j = 0; j < m; ++j) acc += lambda[j] * inst.centers[j][i];
      pt[i] = acc / denom;
    }
    const auto losses = inst.component_losses(pt);
    const double top = *std::max_element(losses.begin(), losses.end());
    double weighted = 0.0;
    for (std::size_t j = 0; j < m; ++j) weighted += lambda[j] * losses[j];
    const double reg = kappa * dist_sq(pt, theta);
    const double value = top + reg;
    // Primal minus dual value at lambda; zero exactly at the optimum.
    const double gap = top - weighted;
    if (gap > tolerance * std::max(1.0, value)) continue;
    if (value < best.value) {
      best.point = std::move(pt);
      best.weights = std::move(lambda);
      best.value = value;
      best.gap = gap;
    }
  }
  if (!std::isfinite(best.value)) {
    throw NumericError("prox: no active set certified optimality (tolerance " + std::to_string(tolerance) + ")");
  }
  return best;
}

double moreau_grad_norm(const SyntheticMinimax& inst, std::span<const double> theta, double kappa) {
  const ProxResult p = prox_point(inst, theta, kappa);
  return 2.0 * kappa * std::sqrt(dist_sq(theta, p.point));
}

double moreau_envelope(const SyntheticMinimax& inst, std::span<const double> theta, double kappa) {
  return prox_point(inst, theta, kappa).value;
}

double min_phi(const SyntheticMinimax& inst) {
  const Point origin(inst.dim(), 0.0);
  return prox_point(inst, origin, 0.0).value;
}

double stationarity_rhs(double lipschitz, double kappa, double b, double gap, double t, double delta) {
  if (!(t > 0.0)) throw ConfigError("stationarity_rhs: T must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("stationarity_rhs: delta must lie in (0, 1]");
  if (lipschitz < 0.0 || kappa < 0.0 || b < 0.0 || gap < 0.0) {
    throw ConfigError("stationarity_rhs: constants must be nonnegative");
  }
  return 4.0 * lipschitz * std::sqrt(kappa * gap / t) +
         8.0 * lipschitz * std::sqrt(2.0 * b * kappa / (t + 1.0) * std::log(1.0 / delta));
}

void ConvergenceConfig::validate() const {
  if (d == 0 || m == 0) throw ConfigError("converge: d and m must be positive");
  if (m > kMaxComponents) throw ConfigError("converge: at most " + std::to_string(kMaxComponents) + " centers");
  if (!centers.empty() && centers.size() != m) throw ConfigError("converge: centers count differs from m");
  for (const Point& c : centers) {
    if (c.size() != d) throw ConfigError("converge: center dimension differs from d");
  }
  if (!theta0.empty() && theta0.size() != d) throw ConfigError("converge: theta0 dimension differs from d");
  if (sigma < 0.0) throw ConfigError("converge: sigma must be nonnegative");
  if (steps == 0) throw ConfigError("converge: steps must be positive");
  if (kappa < 1.0) throw ConfigError("converge: kappa must be at least 1 (the components' curvature)");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("converge: delta must lie in (0, 1)");
  if (stride == 0) throw ConfigError("converge: stride must be positive");
  if (eta != "optimal") {
    char* end = nullptr;
    const double v = std::strtod(eta.c_str(), &end);
    if (end == eta.c_str() || *end != '\0' || !(v > 0.0)) {
      throw ConfigError("converge: eta must be 'optimal' or a positive number");
    }
  }
}

SyntheticMinimax ConvergenceConfig::instance() const {
  if (!centers.empty()) {
    SyntheticMinimax inst{centers};
    inst.validate();
    return inst;
  }
  return SyntheticMinimax::random(d, m, center_scale, center_seed);
}

Point ConvergenceConfig::initial_point() const {
  if (!theta0.empty()) return theta0;
  Rng rng(theta0_seed);
  return random_point(d, theta0_scale, rng);
}

nlohmann::json to_json(const ConvergenceConfig& c) {
  nlohmann::json eta;
  if (c.eta == "optimal") {
    eta = "optimal";
  } else {
    eta = std::strtod(c.eta.c_str(), nullptr);
  }
  return {{"d", c.d},
          {"m", c.m},
          {"centers", c.centers},
          {"center-seed", c.center_seed},
          {"center-scale", c.center_scale},
          {"theta0", c.theta0},
          {"theta0-seed", c.theta0_seed},
          {"theta0-scale", c.theta0_scale},
          {"sigma", c.sigma},
          {"steps", c.steps},
          {"eta", eta},
          {"kappa", c.kappa},
          {"delta", c.delta},
          {"seed", c.seed},
          {"stride", c.stride},
          {"fit-from", c.fit_from}};
}

ConvergenceConfig convergence_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("converge config must be a JSON object");
  ConvergenceConfig c;
  const nlohmann::json known = to_json(c);
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ConfigError("converge config: unknown key '" + k + "'");
  }
  try {
    c.d = j.value("d", c.d);
    c.m = j.value("m", c.m);
    c.centers = j.value("centers", c.centers);
    if (!c.centers.empty()) {
      if (!j.contains("m")) c.m = c.centers.size();
      if (!j.contains("d")) c.d = c.centers[0].size();
    }
    c.center_seed = j.value("center-seed", c.center_seed);
    c.center_scale = j.value("center-scale", c.center_scale);
    c.theta0 = j.value("theta0", c.theta0);
    c.theta0_seed = j.value("theta0-seed", c.theta0_seed);
    c.theta0_scale = j.value("theta0-scale", c.theta0_scale);
    c.sigma = j.value("sigma", c.sigma);
    c.steps = j.value("steps", c.steps);
    if (j.contains("eta")) {
      const auto& e = j.at("eta");
      if (e.is_string()) {
        c.eta = e.get<std::string>();
      } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", e.get<double>());
        c.eta = buf;
      }
    }
    c.kappa = j.value("kappa", c.kappa);
    c.delta = j.value("delta", c.delta);
    c.seed = j.value("seed", c.seed);
    c.stride = j.value("stride", c.stride);
    c.fit_from = j.value("fit-from", c.fit_from);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("converge config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

struct RunOutcome {
  ConvergenceTrace trace;
  std::vector<double> norms_sq;  // every step
  double phi_max = 0.0;
};

RunOutcome simulate(const ConvergenceConfig& cfg, const SyntheticMinimax& inst, const Point& theta0, double eta) {
  RunOutcome out;
  auto& tr = out.trace;
  tr.eta = eta;
  Rng rng(cfg.seed);
  Point theta = theta0;
  const std::size_t d = inst.dim();
  double sum_sq = 0.0;
  out.norms_sq.reserve(cfg.steps + 1);
  for (std::size_t t = 0; t <= cfg.steps; ++t) {
    const ProxResult p = prox_point(inst, theta, cfg.kappa);
    const double norm = 2.0 * cfg.kappa * std::sqrt(dist_sq(theta, p.point));
    sum_sq += norm * norm;
    out.norms_sq.push_back(norm * norm);

    const auto losses = inst.component_losses(theta);
    const AggregationResult v = max_aggregation_verify(losses);
    const std::size_t j = static_cast<std::size_t>(
        std::max_element(v.weights.begin(), v.weights.end()) - v.weights.begin());
    out.phi_max = std::max(out.phi_max, v.value);
    for (const Point& c : inst.centers) {
      tr.lipschitz_observed = std::max(tr.lipschitz_observed, std::sqrt(dist_sq(theta, c)));
    }
    if (t % cfg.stride == 0 || t == cfg.steps) {
      TracePoint pt;
      pt.step = t;
      pt.envelope_grad_norm = norm;
      pt.running_avg_sq = sum_sq / static_cast<double>(t + 1);
      pt.selected_value = v.value;
      pt.selected = j;
      tr.points.push_back(pt);
      tr.thetas.push_back(theta);
    }
    if (t == cfg.steps) break;

    double g_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double g = theta[i] - inst.centers[j][i] + cfg.sigma * rng.normal();
      g_sq += g * g;
      theta[i] -= eta * g;
    }
    tr.lipschitz_observed = std::max(tr.lipschitz_observed, std::sqrt(g_sq));
    if (!std::isfinite(dot(theta, theta)) || std::sqrt(dot(theta, theta)) > 1e6) {
      throw NumericError("converge: iterate diverged at step " + std::to_string(t + 1));
    }
  }
  tr.final_avg_sq = sum_sq / static_cast<double>(cfg.steps + 1);
  return out;
}

}  // namespace

ConvergenceTrace run_convergence_experiment(const ConvergenceConfig& cfg) {
  cfg.validate();
  const SyntheticMinimax inst = cfg.instance();
  const Point theta0 = cfg.initial_point();
  const double phi_min = min_phi(inst);
  const double gap0 = moreau_envelope(inst, theta0, cfg.kappa) - phi_min;
  const bool optimal = cfg.eta == "optimal";

  double lipschitz = 0.0;
  for (const Point& c : inst.centers) lipschitz = std::max(lipschitz, std::sqrt(dist_sq(theta0, c)));
  RunOutcome run;
  for (int round = 0;; ++round) {
    const double eta = optimal ? std::sqrt(gap0 / (cfg.kappa * lipschitz * lipschitz * static_cast<double>(cfg.steps)))
                               : std::strtod(cfg.eta.c_str(), nullptr);
    if (!(eta > 0.0) || !std::isfinite(eta)) throw NumericError("converge: degenerate step size");
    run = simulate(cfg, inst, theta0, eta);
    if (!optimal || run.trace.lipschitz_observed <= lipschitz || round >= 20) break;
    lipschitz = run.trace.lipschitz_observed;
  }
  ConvergenceTrace& tr = run.trace;
  tr.lipschitz = std::max(lipschitz, tr.lipschitz_observed);
  tr.b = run.phi_max - phi_min;
  tr.gap0 = gap0;
  for (TracePoint& p : tr.points) {
    p.rhs_bound = stationarity_rhs(tr.lipschitz, cfg.kappa, tr.b, gap0, static_cast<double>(std::max<std::size_t>(p.step, 1)),
                               cfg.delta);
  }
  tr.final_rhs = stationarity_rhs(tr.lipschitz, cfg.kappa, tr.b, gap0, static_cast<double>(cfg.steps), cfg.delta);

  std::vector<double> xs, ys;
  for (const TracePoint& p : tr.points) {
    if (p.step == 0) continue;
    xs.push_back(static_cast<double>(p.step));
    ys.push_back(p.running_avg_sq);
  }
  tr.slope = loglog_slope(xs, ys, static_cast<double>(cfg.fit_from));
  return tr;
}

double loglog_slope(std::span<const double> x, std::span<const double> y, double from) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < from || !(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double nn = static_cast<double>(n);
  const double den = nn * sxx - sx * sx;
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (nn * sxy - sx * sy) / den;
}

std::string convergence_csv(const ConvergenceTrace& trace) {
  std::ostringstream os;
  os << "step,envelope_grad_norm,running_avg_sq,rhs_bound\n";
  for (const TracePoint& p : trace.points) {
    os << p.step << ',' << fmt(p.envelope_grad_norm) << ',' << fmt(p.running_avg_sq) << ',' << fmt(p.rhs_bound)
       << '\n';
  }
  return os.str();
}

}  // namespace maxmatch
