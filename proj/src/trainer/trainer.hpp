// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "augment/augment.hpp"
#include "data/dataset.hpp"
#include "losses/losses.hpp"
#include "model/network.hpp"
#include "model/snapshot_io.hpp"

namespace maxmatch {

enum class TrainMode {
  kMaxMatch,    // K-variant uncertainty sets with an aggregator
  kFixMatch,    // one strong view per sample, no aggregation
  kSupervised,  // labeled loss only
};
std::string train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::kMaxMatch;
  double lambda = 1.0;
  std::size_t k = 3;
  std::vector<std::size_t> k_set;  // nonempty: K drawn per step from this set
  AggregatorMode aggregator = AggregatorMode::kMax;
  double beta = 0.95;
  std::size_t labeled_batch = 8;
  std::size_t unlabeled_batch = 56;
  double lr = 0.03;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  double ema_decay = 0.999;
  std::size_t steps = 2000;
  std::size_t warmup_steps = 0;
  std::uint64_t model_seed = 1;
  std::uint64_t data_seed = 2;
  std::uint64_t augment_seed = 3;
  double epsilon = 0.05;
  TargetMode target_mode = TargetMode::kPseudoLabel;
  std::size_t eval_every = 50;
  std::vector<std::size_t> hidden = {64, 64};  // vector inputs: MLP widths
  DataConfig data;
  AugmentConfig augment;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys take defaults; unknown keys are a ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// lr(t) = alpha * cos(7 pi t / (16 T)); t is clamped to [0, T].
double cosine_lr(std::size_t t, std::size_t total, double alpha);

/// Linear warmup over cfg.warmup_steps, then the cosine schedule.
double learning_rate(const TrainConfig& cfg, std::size_t step);

/// ema <- m * ema + (1 - m) * params, componentwise.
void ema_update(std::vector<Tensor>& ema, const std::vector<Tensor>& params, double m);

struct SgdOptions {
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 0.0;
};

/// Decoupled decay (p -= lr * wd * p), then v = mu v + g and
/// p -= lr * (g + mu v) (Nesterov) or p -= lr * v.
void sgd_step(std::vector<Tensor>& params, std::vector<Tensor>& velocity, const std::vector<Tensor>& grads,
              double lr, const SgdOptions& opts);

struct MetricsRow {
  std::size_t step = 0;
  std::uint64_t epoch = 0;
  double loss_l = 0.0;
  double loss_u = 0.0;  // selected aggregator
  double loss_u_mean = 0.0;
  double loss_u_min = 0.0;
  double loss_u_max = 0.0;
  double mask_rate = 0.0;
  double lr = 0.0;
  double train_err = 0.0;
  double test_err = 0.0;
  double ema_test_err = 0.0;
  // Not exported to CSV: masked batch loss of variant 0 alone.
  double loss_u_first = 0.0;
  bool evaluated = false;
};

const std::vector<std::string>& metrics_columns();
std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string metrics_svg(const std::vector<MetricsRow>& rows);

struct TrainState {
  Network net;
  std::vector<Tensor> ema;
  std::vector<Tensor> velocity;
  std::vector<Tensor> init;
  std::size_t step = 0;
  BatchIterator::Position position;
};

/// Error rate of `params` on the dataset, plus per-class error counts.
struct EvalResult {
  double error = 0.0;
  std::vector<std::size_t> class_errors;
  std::vector<std::size_t> class_counts;
};
EvalResult evaluate(const Network& net, const Dataset& ds);

class Trainer {
 public:
  Trainer(TrainConfig cfg, LoadedData data);

  const TrainConfig& config() const { return cfg_; }
  const LoadedData& data() const { return data_; }
  const SslSplit& split() const { return split_; }
  const TrainState& state() const { return state_; }
  Network ema_network() const;

  /// K used at step t (fixed or sampled from the K-set).
  std::size_t k_at(std::size_t step) const;

  /// Runs one step. Throws NumericError on a non-finite loss; the state is
  /// left as it was before the step.
  MetricsRow step();

  /// Runs until cfg.steps; returns the rows emitted at the eval cadence.
  using RowCallback = std::function<void(const MetricsRow&)>;
  std::vector<MetricsRow> run(const RowCallback& on_row = {});

  /// Unlabeled losses of a batch under the current parameters, with K
  /// variants per sample (K=1 reproduces variant 0 of any larger set).
  UnlabeledLoss unlabeled_losses(const Batch& batch, std::size_t k) const;

  /// Peeks the next batch without advancing.
  Batch peek_batch() const;

  /// Weak views fed to the labeled loss at `step`.
  Tensor labeled_inputs(const Batch& batch, std::size_t step) const;
  /// Weak views that produce the frozen targets for the unlabeled batch.
  Tensor unlabeled_weak_views(const Batch& batch) const;

  SnapshotFile to_snapshot() const;
  static Trainer from_snapshot(TrainConfig cfg, LoadedData data, const SnapshotFile& snap);

 private:
  MetricsRow step_on(const Batch& batch);

  TrainConfig cfg_;
  LoadedData data_;
  SslSplit split_;
  TrainState state_;
  BatchIterator iterator_;
};

Architecture default_architecture(const TrainConfig& cfg, const Dataset& train);

/// Reference update that only uses the labeled loss, independent of the
/// SSL step path. Returns the new parameters.
std::vector<Tensor> supervised_reference_step(const Network& net, std::vector<Tensor>& velocity,
                                              const Tensor& x, const std::vector<std::size_t>& y, double lr,
                                              const SgdOptions& opts);

/// Diagnostic: approximate ||grad of the Moreau envelope|| at the current
/// parameters via an inner SGD solve of min phi(th) + kappa ||th - theta||^2
/// on one fixed batch. No guarantee for cross-entropy objectives.
double approximate_envelope_grad_norm(const Trainer& trainer, double kappa, std::size_t inner_steps = 200,
                                      double inner_lr = 0.01);

}  // namespace maxmatch
