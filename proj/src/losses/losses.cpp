// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "autodiff/kernels.hpp"
#include "common/error.hpp"

namespace maxmatch {

int zero_one(std::size_t predicted, std::size_t truth, std::size_t n_classes) {
  if (predicted >= n_classes || truth >= n_classes) {
    throw ConfigError("zero_one: label out of range for " + std::to_string(n_classes) + " classes");
  }
  return predicted != truth ? 1 : 0;
}

double ce_hard(std::span<const double> s, std::size_t y) {
  if (y >= s.size()) throw ConfigError("ce_hard: label out of range");
  return kernels::cross_entropy_row(s, y);
}

void check_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
}

std::vector<double> clamp_probabilities(std::span<const double> p, double eps) {
  std::vector<double> out(p.begin(), p.end());
  for (double& v : out) v = std::clamp(v, eps, 1.0 - eps);
  return out;
}

double ce_soft(std::span<const double> probs, std::span<const double> targets, double eps) {
  check_epsilon(eps);
  if (probs.size() != targets.size()) throw ShapeError("ce_soft: probability/target length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double s = std::clamp(probs[i], eps, 1.0 - eps);
    const double t = std::clamp(targets[i], eps, 1.0 - eps);
    acc -= t * std::log(s);
  }
  return acc;
}

double ce_soft_floor(std::size_t n_classes, double eps) {
  check_epsilon(eps);
  return static_cast<double>(n_classes) * eps * std::log(1.0 / (1.0 - eps));
}

std::string aggregator_name(AggregatorMode m) {
  switch (m) {
    case AggregatorMode::kMax: return "max";
    case AggregatorMode::kMean: return "mean";
    case AggregatorMode::kMin: return "min";
  }
  return "max";
}

AggregatorMode aggregator_from_name(const std::string& name) {
  if (name == "max") return AggregatorMode::kMax;
  if (name == "mean") return AggregatorMode::kMean;
  if (name == "min") return AggregatorMode::kMin;
  throw ConfigError("unknown aggregator '" + name + "' (expected max, mean or min)");
}

std::string target_mode_name(TargetMode m) { return m == TargetMode::kSoft ? "soft" : "pseudo-label"; }

TargetMode target_mode_from_name(const std::string& name) {
  if (name == "pseudo-label") return TargetMode::kPseudoLabel;
  if (name == "soft") return TargetMode::kSoft;
  throw ConfigError("unknown target mode '" + name + "' (expected pseudo-label or soft)");
}

Aggregate aggregate(std::span<const double> losses, AggregatorMode mode) {
  if (losses.empty()) throw ConfigError("aggregate: empty loss vector");
  Aggregate out{losses[0], 0};
  switch (mode) {
    case AggregatorMode::kMax:
      for (std::size_t j = 1; j < losses.size(); ++j) {
        if (losses[j] > out.value) out = {losses[j], j};
      }
      break;
    case AggregatorMode::kMin:
      for (std::size_t j = 1; j < losses.size(); ++j) {
        if (losses[j] < out.value) out = {losses[j], j};
      }
      break;
    case AggregatorMode::kMean: {
      double acc = 0.0;
      for (double v : losses) acc += v;
      out = {acc / static_cast<double>(losses.size()), 0};
      break;
    }
  }
  return out;
}

ConsistencyTargets consistency_targets(const Network& net, const Tensor& weak_views, double beta) {
  ConsistencyTargets t;
  t.probs = kernels::softmax(net.forward(weak_views));
  t.labels = argmax_rows(t.probs);
  t.mask.resize(t.labels.size());
  for (std::size_t i = 0; i < t.labels.size(); ++i) {
    t.mask[i] = t.probs.at(i, t.labels[i]) > beta ? 1 : 0;
  }
  return t;
}

std::vector<double> variant_losses(const Tensor& scores, std::span<const double> target_probs,
                                   std::size_t target_label, TargetMode mode, double eps) {
  std::vector<double> out(scores.rows());
  if (mode == TargetMode::kPseudoLabel) {
    for (std::size_t j = 0; j < scores.rows(); ++j) out[j] = ce_hard(scores.row(j), target_label);
  } else {
    const Tensor probs = kernels::softmax(scores);
    for (std::size_t j = 0; j < scores.rows(); ++j) out[j] = ce_soft(probs.row(j), target_probs, eps);
  }
  return out;
}

std::vector<double> consistency_losses(const Network& net, std::span<const double> weak_view,
                                       const UncertaintySet& uset, TargetMode mode, double eps) {
  if (uset.size() == 0) throw ConfigError("consistency_losses: empty uncertainty set");
  if (mode == TargetMode::kSoft) check_epsilon(eps);
  const Tensor weak({1, weak_view.size()}, std::vector<double>(weak_view.begin(), weak_view.end()));
  const Tensor target = kernels::softmax(net.forward(weak));
  const std::size_t label = argmax_rows(target)[0];
  return variant_losses(net.forward(uset.variants), target.row(0), label, mode, eps);
}

UnlabeledLoss fixmatch_unlabeled_loss(const Network& net, const Tensor& weak_views,
                                      const std::vector<UncertaintySet>& usets, double beta, AggregatorMode mode,
                                      TargetMode target_mode, double eps) {
  if (usets.size() != weak_views.rows()) throw ShapeError("fixmatch_unlabeled_loss: one uncertainty set per sample");
  if (target_mode == TargetMode::kSoft) check_epsilon(eps);
  UnlabeledLoss out;
  const std::size_t b = usets.size();
  if (b == 0) return out;
  const ConsistencyTargets t = consistency_targets(net, weak_views, beta);
  const std::size_t k = usets[0].size();
  auto& d = out.detail;
  d.losses = Tensor({b, k});
  d.mask = t.mask;
  d.targets = t.labels;
  d.chosen.assign(b, 0);
  std::size_t passed = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (usets[i].size() != k) throw ShapeError("fixmatch_unlabeled_loss: uncertainty sets differ in K");
    const auto row = variant_losses(net.forward(usets[i].variants), t.probs.row(i), t.labels[i], target_mode, eps);
    std::copy(row.begin(), row.end(), d.losses.row(i).begin());
    d.chosen[i] = aggregate(row, mode).index;
    passed += t.mask[i];
  }
  out.loss = masked_row_statistic(d, mode);
  out.mask_rate = static_cast<double>(passed) / static_cast<double>(b);
  return out;
}

double masked_row_statistic(const ConsistencyBatchLosses& l, AggregatorMode mode) {
  const std::size_t b = l.batch();
  if (b == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (l.mask[i]) acc += aggregate(l.losses.row(i), mode).value;
  }
  return acc / static_cast<double>(b);
}

double total_loss(double supervised, double unsupervised, double lambda) {
  if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  return supervised + lambda * unsupervised;
}

}  // namespace maxmatch
