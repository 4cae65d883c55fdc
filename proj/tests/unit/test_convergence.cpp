// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include <doctest.h>

#include <cmath>
#include <vector>

#include "common/error.hpp"
#include "convergence/minimax.hpp"

using namespace maxmatch;

namespace {

SyntheticMinimax single_quadratic() { return SyntheticMinimax{{Point{0.0}}}; }

}  // namespace

TEST_CASE("prox of a single quadratic") {
  const SyntheticMinimax q = single_quadratic();
  const std::vector<double> theta{3.0};
  const ProxResult r = prox_point(q, theta, 1.0);
  CHECK(r.point[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(moreau_grad_norm(q, theta, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  // The closed form 2 kappa theta / (1 + 2 kappa) is linear in theta.
  for (double t : {-4.0, 0.5, 7.0}) {
    CHECK(prox_point(q, std::vector<double>{t}, 1.0).point[0] == doctest::Approx(2.0 * t / 3.0).epsilon(1e-12));
  }
  CHECK(moreau_grad_norm(q, std::vector<double>{0.0}, 1.0) <= 1e-8);
}

TEST_CASE("prox at a center far from the others moves toward that center") {
  const SyntheticMinimax inst{{Point{0.0, 0.0}, Point{10.0, 0.0}, Point{0.0, 10.0}}};
  // theta sits on the first center; phi is driven by the far ones.
  const std::vector<double> theta{0.0, 0.0};
  const ProxResult r = prox_point(inst, theta, 1.0);
  CHECK(r.gap <= 1e-8);
  double w = 0.0;
  for (double v : r.weights) {
    CHECK(v >= -1e-12);
    w += v;
  }
  CHECK(w == doctest::Approx(1.0));

  const SyntheticMinimax far{{Point{5.0, 5.0}, Point{-50.0, 0.0}}};
  const std::vector<double> at{-50.0, 0.0};
  const ProxResult p = prox_point(far, at, 1.0);
  // Only the first component is active: the prox lies on the segment to (5, 5).
  const double s = (p.point[0] + 50.0) / 55.0;
  CHECK(s > 0.0);
  CHECK(s < 1.0);
  CHECK(p.point[1] == doctest::Approx(5.0 * s).epsilon(1e-10));
}

TEST_CASE("prox value matches a grid search in one dimension") {
  const SyntheticMinimax inst{{Point{-1.3}, Point{2.1}}};
  for (double theta : {-3.0, 0.2, 4.5}) {
    const std::vector<double> th{theta};
    const double value = prox_point(inst, th, 1.5).value;
    auto f = [&](double t) { return inst.phi(std::vector<double>{t}) + 1.5 * (t - theta) * (t - theta); };
    // Coarse grid to bracket, then ternary search (the objective is convex).
    double best_t = -6.0;
    for (int i = 0; i <= 12000; ++i) {
      const double t = -6.0 + i * 1e-3;
      if (f(t) < f(best_t)) best_t = t;
    }
    double lo = best_t - 1e-3, hi = best_t + 1e-3;
    for (int it = 0; it < 200; ++it) {
      const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
      if (f(a) < f(b)) {
        hi = b;
      } else {
        lo = a;
      }
    }
    const double best = f(0.5 * (lo + hi));
    CHECK(std::abs(best - value) < 1e-6);
    CHECK(value <= best + 1e-12);
  }
}

TEST_CASE("kappa 0 prox is the minimizer of phi") {
  const SyntheticMinimax inst{{Point{0.0, 0.0}, Point{2.0, 0.0}, Point{1.0, 3.0}}};
  const double m = min_phi(inst);
  const ProxResult r = prox_point(inst, std::vector<double>{7.0, -2.0}, 0.0);
  CHECK(inst.phi(r.point) == doctest::Approx(m));
  CHECK(moreau_grad_norm(inst, r.point, 1.0) <= 1e-8);
}

TEST_CASE("stationarity bound right-hand side") {
  CHECK(stationarity_rhs(2, 1, 3, 1.5, 100, 0.1) == doctest::Approx(6.897357194748960612).epsilon(1e-13));
  const double t = 1e6;
  CHECK(stationarity_rhs(2, 1, 3, 1.5, 4 * t, 0.1) == doctest::Approx(0.5 * stationarity_rhs(2, 1, 3, 1.5, t, 0.1)).epsilon(1e-6));
  CHECK(stationarity_rhs(2, 1, 3, 1.5, 100, 1.0) == doctest::Approx(4.0 * 2.0 * std::sqrt(1.5 / 100.0)));
  CHECK_THROWS_AS(stationarity_rhs(2, 1, 3, 1.5, 0, 0.1), ConfigError);
}

TEST_CASE("noise-free descent on one quadratic converges geometrically") {
  ConvergenceConfig c;
  c.d = 1;
  c.m = 1;
  c.centers = {Point{0.0}};
  c.theta0 = Point{5.0};
  c.sigma = 0.0;
  c.steps = 200;
  c.eta = "0.1";
  const ConvergenceTrace tr = run_convergence_experiment(c);
  CHECK(tr.points.back().envelope_grad_norm < 1e-8);
  // Ratio of successive envelope norms equals 1 - eta.
  CHECK(tr.points[11].envelope_grad_norm / tr.points[10].envelope_grad_norm == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("the running average decays like 1/sqrt(T)") {
  ConvergenceConfig c;
  c.steps = 10000;
  const ConvergenceTrace tr = run_convergence_experiment(c);
  CHECK(tr.slope <= -0.4);
  CHECK(tr.final_avg_sq <= tr.final_rhs);
  CHECK(tr.lipschitz >= tr.lipschitz_observed);

  const ConvergenceTrace again = run_convergence_experiment(c);
  CHECK(convergence_csv(tr) == convergence_csv(again));
}

TEST_CASE("log-log slope of an exact power law") {
  std::vector<double> x, y;
  for (int i = 1; i <= 50; ++i) {
    x.push_back(i);
    y.push_back(3.0 * std::pow(i, -0.5));
  }
  CHECK(loglog_slope(x, y, 1) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("convergence config JSON and validation") {
  ConvergenceConfig c;
  c.centers = {Point{1, 2}, Point{3, 4}};
  c.d = 2;
  c.m = 2;
  c.eta = "0.01";
  CHECK(to_json(convergence_config_from_json(to_json(c))) == to_json(c));
  CHECK_THROWS_AS(convergence_config_from_json(nlohmann::json{{"kappa", 0.5}}), ConfigError);
  CHECK_THROWS_AS(convergence_config_from_json(nlohmann::json{{"eta", "fast"}}), ConfigError);
  CHECK_THROWS_AS(convergence_config_from_json(nlohmann::json{{"m", 17}}), ConfigError);
  CHECK_THROWS_AS(convergence_config_from_json(nlohmann::json{{"sigmaa", 1}}), ConfigError);
}
