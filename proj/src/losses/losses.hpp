// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "augment/augment.hpp"
#include "autodiff/tensor.hpp"
#include "model/network.hpp"

namespace maxmatch {

/// 1 when the labels differ. Throws ConfigError for labels >= n_classes.
int zero_one(std::size_t predicted, std::size_t truth, std::size_t n_classes);

/// log(sum_i exp(s_i - s_y)) on raw scores.
double ce_hard(std::span<const double> scores, std::size_t label);

/// Throws ConfigError unless eps lies in (0, 0.5).
void check_epsilon(double eps);

/// Clamps every coordinate to [eps, 1 - eps] without renormalizing.
std::vector<double> clamp_probabilities(std::span<const double> p, double eps);

/// -sum_i t_i log s_i with both vectors clamped to [eps, 1 - eps].
double ce_soft(std::span<const double> probs, std::span<const double> targets, double eps);

/// n_c * eps * ln(1 / (1 - eps)), the smallest value ce_soft can take.
double ce_soft_floor(std::size_t n_classes, double eps);

enum class AggregatorMode { kMax, kMean, kMin };
std::string aggregator_name(AggregatorMode m);
AggregatorMode aggregator_from_name(const std::string& name);

enum class TargetMode { kPseudoLabel, kSoft };
std::string target_mode_name(TargetMode m);
TargetMode target_mode_from_name(const std::string& name);

struct Aggregate {
  double value = 0.0;
  std::size_t index = 0;
};

/// max/min return the extreme value and its smallest index; mean returns
/// (average, 0). Throws ConfigError on an empty vector.
Aggregate aggregate(std::span<const double> losses, AggregatorMode mode);

/// Per-sample, per-variant unlabeled losses for one batch.
struct ConsistencyBatchLosses {
  Tensor losses;                     // B_u x K
  std::vector<std::uint8_t> mask;    // 1 when the sample passes the threshold
  std::vector<std::size_t> chosen;   // aggregator index per sample
  std::vector<std::size_t> targets;  // pseudo-labels from the weak view

  std::size_t batch() const { return losses.rows(); }
  std::size_t k() const { return losses.rows() == 0 ? 0 : losses.cols(); }
};

/// Weak-view target scores, computed without gradient tracking.
struct ConsistencyTargets {
  Tensor probs;                  // B_u x n_c, softmax of the weak view
  std::vector<std::size_t> labels;
  std::vector<std::uint8_t> mask;
};

ConsistencyTargets consistency_targets(const Network& net, const Tensor& weak_views, double beta);

/// Loss of each variant scores row against one target.
std::vector<double> variant_losses(const Tensor& variant_scores, std::span<const double> target_probs,
                                   std::size_t target_label, TargetMode mode, double eps);

/// K losses of one sample's uncertainty set against the weak-view target.
std::vector<double> consistency_losses(const Network& net, std::span<const double> weak_view,
                                       const UncertaintySet& uset, TargetMode mode, double eps);

struct UnlabeledLoss {
  double loss = 0.0;       // batch mean of mask * aggregate
  double mask_rate = 0.0;
  ConsistencyBatchLosses detail;
};

/// Thresholded consistency loss: mean over the batch of
/// I(max prob > beta) * aggregate(variant losses).
UnlabeledLoss fixmatch_unlabeled_loss(const Network& net, const Tensor& weak_views,
                                      const std::vector<UncertaintySet>& usets, double beta, AggregatorMode mode,
                                      TargetMode target_mode = TargetMode::kPseudoLabel, double eps = 0.05);

/// Mean over the batch of mask * statistic of each loss row.
double masked_row_statistic(const ConsistencyBatchLosses& l, AggregatorMode mode);

double total_loss(double supervised, double unsupervised, double lambda);

}  // namespace maxmatch
