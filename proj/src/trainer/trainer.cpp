// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "autodiff/kernels.hpp"
#include "autodiff/tape.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

namespace maxmatch {

namespace {

constexpr std::uint64_t kLabeledTag = 0x6c61624cULL;
constexpr std::uint64_t kKTag = 0x6b736574ULL;

// Unlabeled rows that enter the taped objective, chosen without gradients.
struct UnlabeledPlan {
  Tensor rows;
  std::vector<std::size_t> labels;
  Tensor soft_targets;
  std::vector<double> weights;
  double loss_u = 0.0;
  double loss_u_mean = 0.0;
  double loss_u_min = 0.0;
  double loss_u_max = 0.0;
  double loss_u_first = 0.0;
  double mask_rate = 0.0;
};

struct ObjectiveResult {
  double loss_l = 0.0;
  double loss_u = 0.0;
  double total = 0.0;
  std::vector<Tensor> grads;
};

void append_row(std::vector<double>& dst, std::span<const double> row) { dst.insert(dst.end(), row.begin(), row.end()); }

UnlabeledPlan finish_plan(UnlabeledPlan p, std::vector<double>&& rows, std::size_t d, std::size_t n_classes,
                          std::vector<double>&& soft) {
  const std::size_t r = p.labels.size();
  p.rows = Tensor({r, d}, std::move(rows));
  p.soft_targets = Tensor({r, n_classes}, std::move(soft));
  return p;
}

UnlabeledPlan plan_maxmatch(const TrainConfig& cfg, const Network& net, const Dataset& train, const Tensor& weak,
                            const Batch& batch, std::size_t k) {
  const std::size_t b = batch.unlabeled.size();
  const std::size_t d = train.features.cols();
  const std::size_t nc = net.n_classes();
  const ConsistencyTargets t = consistency_targets(net, weak, cfg.beta);

  Tensor variants({b * k, d});
  for (std::size_t i = 0; i < b; ++i) {
    const UncertaintySet u = build_uncertainty_set(weak.row(i), train.sample_shape, k, cfg.augment_seed,
                                                   batch.unlabeled[i], batch.unlabeled_epoch[i], cfg.augment);
    std::copy(u.variants.data().begin(), u.variants.data().end(), variants.data().begin() + i * k * d);
  }
  const Tensor scores = net.forward(variants);

  UnlabeledPlan p;
  std::vector<double> rows, soft;
  const double inv_b = 1.0 / static_cast<double>(b);
  std::size_t passed = 0;
  for (std::size_t i = 0; i < b; ++i) {
    Tensor own({k, nc}, std::vector<double>(scores.data().begin() + i * k * nc,
                                            scores.data().begin() + (i + 1) * k * nc));
    const auto losses = variant_losses(own, t.probs.row(i), t.labels[i], cfg.target_mode, cfg.epsilon);
    if (!t.mask[i]) continue;
    ++passed;
    const Aggregate chosen = aggregate(losses, cfg.aggregator);
    p.loss_u += chosen.value * inv_b;
    p.loss_u_mean += aggregate(losses, AggregatorMode::kMean).value * inv_b;
    p.loss_u_min += aggregate(losses, AggregatorMode::kMin).value * inv_b;
    p.loss_u_max += aggregate(losses, AggregatorMode::kMax).value * inv_b;
    p.loss_u_first += losses[0] * inv_b;
    const auto target = clamp_probabilities(t.probs.row(i), cfg.epsilon);
    auto take = [&](std::size_t j, double w) {
      append_row(rows, variants.row(i * k + j));
      append_row(soft, target);
      p.labels.push_back(t.labels[i]);
      p.weights.push_back(w);
    };
    if (cfg.aggregator == AggregatorMode::kMean) {
      for (std::size_t j = 0; j < k; ++j) take(j, inv_b / static_cast<double>(k));
    } else {
      take(chosen.index, inv_b);
    }
  }
  p.mask_rate = static_cast<double>(passed) * inv_b;
  return finish_plan(std::move(p), std::move(rows), d, nc, std::move(soft));
}

// One strong view per sample on the same seed stream as variant 0.
UnlabeledPlan plan_fixmatch(const TrainConfig& cfg, const Network& net, const Dataset& train, const Tensor& weak,
                            const Batch& batch) {
  const std::size_t b = batch.unlabeled.size();
  const std::size_t d = train.features.cols();
  const std::size_t nc = net.n_classes();
  const ConsistencyTargets t = consistency_targets(net, weak, cfg.beta);
  Tensor strong({b, d});
  for (std::size_t i = 0; i < b; ++i) {
    const auto seed = variant_seed(cfg.augment_seed, batch.unlabeled[i], batch.unlabeled_epoch[i], 0);
    const auto v = strong_augment(weak.row(i), train.sample_shape, seed, cfg.augment);
    std::copy(v.begin(), v.end(), strong.row(i).begin());
  }
  const Tensor scores = net.forward(strong);
  const Tensor probs = kernels::softmax(scores);
  UnlabeledPlan p;
  std::vector<double> rows, soft;
  const double inv_b = 1.0 / static_cast<double>(b);
  std::size_t passed = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!t.mask[i]) continue;
    ++passed;
    const double l = cfg.target_mode == TargetMode::kPseudoLabel
                         ? ce_hard(scores.row(i), t.labels[i])
                         : ce_soft(probs.row(i), t.probs.row(i), cfg.epsilon);
    p.loss_u += l * inv_b;
    append_row(rows, strong.row(i));
    append_row(soft, clamp_probabilities(t.probs.row(i), cfg.epsilon));
    p.labels.push_back(t.labels[i]);
    p.weights.push_back(inv_b);
  }
  p.loss_u_mean = p.loss_u_min = p.loss_u_max = p.loss_u_first = p.loss_u;
  p.mask_rate = static_cast<double>(passed) * inv_b;
  return finish_plan(std::move(p), std::move(rows), d, nc, std::move(soft));
}

ObjectiveResult objective(const TrainConfig& cfg, const Network& net, const Tensor& xl,
                          const std::vector<std::size_t>& yl, const UnlabeledPlan* plan) {
  Tape tape;
  std::vector<Var> params;
  for (const Tensor& p : net.tensors()) params.push_back(tape.leaf(p));
  const Var logits = net.forward(tape, tape.constant(xl), params);
  const Var loss_l = ops::mean(ops::cross_entropy_rows(logits, yl));
  Var total = loss_l;
  ObjectiveResult r;
  if (plan != nullptr) {
    Var loss_u = tape.constant(Tensor::scalar(0.0));
    if (!plan->labels.empty()) {
      const Var scores = net.forward(tape, tape.constant(plan->rows), params);
      Var per_row;
      if (cfg.target_mode == TargetMode::kPseudoLabel) {
        per_row = ops::cross_entropy_rows(scores, plan->labels);
      } else {
        const Var probs = ops::clamp(ops::softmax(scores), cfg.epsilon, 1.0 - cfg.epsilon);
        per_row = ops::soft_cross_entropy_rows(probs, plan->soft_targets);
      }
      loss_u = ops::weighted_sum(per_row, Tensor::from(plan->weights));
    }
    total = ops::add(loss_l, ops::scale(loss_u, cfg.lambda));
    r.loss_u = loss_u.value().item();
  }
  r.loss_l = loss_l.value().item();
  r.total = total.value().item();
  if (!std::isfinite(r.total)) {
    throw NumericError("non-finite training loss (loss_l=" + std::to_string(r.loss_l) +
                       ", loss_u=" + std::to_string(r.loss_u) + ")");
  }
  tape.backward(total);
  for (const Var& p : params) r.grads.push_back(p.grad());
  return r;
}

std::vector<Tensor> zeros_like(const std::vector<Tensor>& ts) {
  std::vector<Tensor> out;
  for (const Tensor& t : ts) out.emplace_back(t.shape());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

ParamSnapshot as_snapshot(const Architecture& arch, const std::vector<Tensor>& ts) { return {arch, ts}; }

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

std::string train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kMaxMatch: return "maxmatch";
    case TrainMode::kFixMatch: return "fixmatch";
    case TrainMode::kSupervised: return "supervised";
  }
  return "maxmatch";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "maxmatch") return TrainMode::kMaxMatch;
  if (name == "fixmatch") return TrainMode::kFixMatch;
  if (name == "supervised") return TrainMode::kSupervised;
  throw ConfigError("unknown training mode '" + name + "' (expected maxmatch, fixmatch or supervised)");
}

void TrainConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (k == 0) throw ConfigError("k must be at least 1");
  for (std::size_t v : k_set) {
    if (v == 0) throw ConfigError("k-set entries must be at least 1");
  }
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  if (labeled_batch == 0) throw ConfigError("labeled-batch must be positive");
  if (mode != TrainMode::kSupervised && unlabeled_batch == 0) throw ConfigError("unlabeled-batch must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight-decay must be nonnegative");
  if (ema_decay < 0.0 || ema_decay >= 1.0) throw ConfigError("ema-decay must lie in [0, 1)");
  if (steps == 0) throw ConfigError("steps must be positive");
  if (eval_every == 0) throw ConfigError("eval-every must be positive");
  check_epsilon(epsilon);
  augment.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"mode", train_mode_name(c.mode)},
          {"lambda", c.lambda},
          {"k", c.k},
          {"k-set", c.k_set},
          {"aggregator", aggregator_name(c.aggregator)},
          {"beta", c.beta},
          {"labeled-batch", c.labeled_batch},
          {"unlabeled-batch", c.unlabeled_batch},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"nesterov", c.nesterov},
          {"weight-decay", c.weight_decay},
          {"ema-decay", c.ema_decay},
          {"steps", c.steps},
          {"warmup-steps", c.warmup_steps},
          {"model-seed", c.model_seed},
          {"data-seed", c.data_seed},
          {"augment-seed", c.augment_seed},
          {"epsilon", c.epsilon},
          {"target-mode", target_mode_name(c.target_mode)},
          {"eval-every", c.eval_every},
          {"hidden", c.hidden},
          {"data", to_json(c.data)},
          {"augment", to_json(c.augment)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  const nlohmann::json known = to_json(TrainConfig{});
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ConfigError("train config: unknown key '" + k + "'");
  }
  TrainConfig c;
  try {
    c.mode = train_mode_from_name(get_or<std::string>(j, "mode", train_mode_name(c.mode)));
    c.lambda = get_or(j, "lambda", c.lambda);
    c.k = get_or(j, "k", c.k);
    c.k_set = get_or(j, "k-set", c.k_set);
    c.aggregator = aggregator_from_name(get_or<std::string>(j, "aggregator", aggregator_name(c.aggregator)));
    c.beta = get_or(j, "beta", c.beta);
    c.labeled_batch = get_or(j, "labeled-batch", c.labeled_batch);
    c.unlabeled_batch = get_or(j, "unlabeled-batch", c.unlabeled_batch);
    c.lr = get_or(j, "lr", c.lr);
    c.momentum = get_or(j, "momentum", c.momentum);
    c.nesterov = get_or(j, "nesterov", c.nesterov);
    c.weight_decay = get_or(j, "weight-decay", c.weight_decay);
    c.ema_decay = get_or(j, "ema-decay", c.ema_decay);
    c.steps = get_or(j, "steps", c.steps);
    c.warmup_steps = get_or(j, "warmup-steps", c.warmup_steps);
    c.model_seed = get_or(j, "model-seed", c.model_seed);
    c.data_seed = get_or(j, "data-seed", c.data_seed);
    c.augment_seed = get_or(j, "augment-seed", c.augment_seed);
    c.epsilon = get_or(j, "epsilon", c.epsilon);
    c.target_mode = target_mode_from_name(get_or<std::string>(j, "target-mode", target_mode_name(c.target_mode)));
    c.eval_every = get_or(j, "eval-every", c.eval_every);
    c.hidden = get_or(j, "hidden", c.hidden);
    if (j.contains("data")) c.data = data_config_from_json(j.at("data"));
    if (j.contains("augment")) c.augment = augment_config_from_json(j.at("augment"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double cosine_lr(std::size_t t, std::size_t total, double alpha) {
  if (total == 0) return alpha;
  const double frac = static_cast<double>(std::min(t, total)) / static_cast<double>(total);
  return alpha * std::cos(7.0 * std::numbers::pi * frac / 16.0);
}

double learning_rate(const TrainConfig& cfg, std::size_t step) {
  if (step < cfg.warmup_steps) {
    return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  }
  return cosine_lr(step, cfg.steps, cfg.lr);
}

void ema_update(std::vector<Tensor>& ema, const std::vector<Tensor>& params, double m) {
  if (ema.size() != params.size()) throw ShapeError("ema_update: parameter count mismatch");
  for (std::size_t i = 0; i < ema.size(); ++i) {
    require_same_shape(ema[i], params[i], "ema_update");
    auto e = ema[i].data();
    const auto p = params[i].data();
    for (std::size_t j = 0; j < e.size(); ++j) e[j] = m * e[j] + (1.0 - m) * p[j];
  }
}

void sgd_step(std::vector<Tensor>& params, std::vector<Tensor>& velocity, const std::vector<Tensor>& grads,
              double lr, const SgdOptions& opts) {
  if (params.size() != velocity.size() || params.size() != grads.size()) {
    throw ShapeError("sgd_step: parameter/velocity/gradient count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i], grads[i], "sgd_step");
    require_same_shape(params[i], velocity[i], "sgd_step");
    auto p = params[i].data();
    auto v = velocity[i].data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] -= lr * opts.weight_decay * p[j];
      v[j] = opts.momentum * v[j] + g[j];
      p[j] -= opts.nesterov ? lr * (g[j] + opts.momentum * v[j]) : lr * v[j];
    }
  }
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {"step",        "epoch",      "loss_l",   "loss_u",
                                                "loss_u_mean", "loss_u_min", "loss_u_max", "mask_rate",
                                                "lr",          "train_err",  "test_err", "ema_test_err"};
  return cols;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const MetricsRow& r : rows) {
    os << r.step << ',' << r.epoch << ',' << fmt(r.loss_l) << ',' << fmt(r.loss_u) << ',' << fmt(r.loss_u_mean)
       << ',' << fmt(r.loss_u_min) << ',' << fmt(r.loss_u_max) << ',' << fmt(r.mask_rate) << ',' << fmt(r.lr) << ','
       << fmt(r.train_err) << ',' << fmt(r.test_err) << ',' << fmt(r.ema_test_err) << '\n';
  }
  return os.str();
}

std::string metrics_svg(const std::vector<MetricsRow>& rows) {
  constexpr double kW = 640, kH = 360, kPad = 40;
  struct Series {
    const char* name;
    const char* color;
    double MetricsRow::*field;
  };
  const Series series[] = {{"loss_l", "#1f77b4", &MetricsRow::loss_l},
                           {"loss_u_max", "#d62728", &MetricsRow::loss_u_max},
                           {"loss_u_mean", "#ff7f0e", &MetricsRow::loss_u_mean},
                           {"loss_u_min", "#2ca02c", &MetricsRow::loss_u_min},
                           {"test_err", "#7f7f7f", &MetricsRow::test_err}};
  double max_step = 1, max_y = 1e-12;
  for (const MetricsRow& r : rows) {
    max_step = std::max(max_step, static_cast<double>(r.step));
    for (const Series& s : series) max_y = std::max(max_y, r.*(s.field));
  }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" font-size=\"12\">step (max " << max_step
     << ")</text>\n";
  os << "<text x=\"4\" y=\"" << kPad - 10 << "\" font-size=\"12\">y max " << fmt(max_y) << "</text>\n";
  int legend = 0;
  for (const Series& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" points=\"";
    for (const MetricsRow& r : rows) {
      const double x = kPad + (kW - 2 * kPad) * static_cast<double>(r.step) / max_step;
      const double y = kH - kPad - (kH - 2 * kPad) * (r.*(s.field)) / max_y;
      os << fmt(x) << ',' << fmt(y) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - kPad - 90 << "\" y=\"" << kPad + 14 * legend++ << "\" font-size=\"11\" fill=\""
       << s.color << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

EvalResult evaluate(const Network& net, const Dataset& ds) {
  EvalResult r;
  const std::size_t nc = std::max(net.n_classes(), ds.n_classes);
  r.class_errors.assign(nc, 0);
  r.class_counts.assign(nc, 0);
  if (ds.size() == 0) throw ConfigError("evaluate: empty dataset");
  constexpr std::size_t kChunk = 1024;
  std::size_t wrong = 0;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(ds.size(), start + kChunk); ++i) idx.push_back(i);
    const auto pred = argmax_rows(net.forward(ds.gather(idx)));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t y = ds.labels[idx[i]];
      ++r.class_counts[y];
      if (pred[i] != y) {
        ++r.class_errors[y];
        ++wrong;
      }
    }
  }
  r.error = static_cast<double>(wrong) / static_cast<double>(ds.size());
  return r;
}

Architecture default_architecture(const TrainConfig& cfg, const Dataset& train) {
  if (train.is_image()) {
    return Architecture::small_cnn(train.sample_shape[0], train.sample_shape[1], train.sample_shape[2],
                                   train.n_classes);
  }
  return Architecture::mlp(shape_size(train.sample_shape), cfg.hidden, train.n_classes);
}

Trainer::Trainer(TrainConfig cfg, LoadedData data)
    : cfg_(std::move(cfg)),
      data_(std::move(data)),
      split_(split_ssl(data_.train, cfg_.data.labels_per_class, cfg_.data.fold_seed, cfg_.data.unlabeled_mode)),
      state_{Network(default_architecture(cfg_, data_.train), cfg_.model_seed), {}, {}, {}, 0, {}},
      iterator_(split_, cfg_.labeled_batch, cfg_.mode == TrainMode::kSupervised ? 0 : cfg_.unlabeled_batch,
                cfg_.data_seed, cfg_.mode != TrainMode::kSupervised) {
  cfg_.validate();
  state_.ema = state_.net.tensors();
  state_.init = state_.net.tensors();
  state_.velocity = zeros_like(state_.net.tensors());
  state_.position = iterator_.position();
}

Network Trainer::ema_network() const { return Network(as_snapshot(state_.net.architecture(), state_.ema)); }

std::size_t Trainer::k_at(std::size_t step) const {
  if (cfg_.k_set.empty()) return cfg_.k;
  Rng rng(derive_seed(cfg_.augment_seed, {kKTag, step}));
  return cfg_.k_set[rng.below(cfg_.k_set.size())];
}

Batch Trainer::peek_batch() const {
  BatchIterator it = iterator_;
  return it.next();
}

Tensor Trainer::labeled_inputs(const Batch& batch, std::size_t step) const {
  const Dataset& ds = data_.train;
  Tensor x({batch.labeled.size(), ds.features.cols()});
  for (std::size_t i = 0; i < batch.labeled.size(); ++i) {
    const auto seed = derive_seed(cfg_.augment_seed, {kLabeledTag, step, i});
    const auto v = weak_augment(ds.features.row(batch.labeled[i]), ds.sample_shape, seed, cfg_.augment);
    std::copy(v.begin(), v.end(), x.row(i).begin());
  }
  return x;
}

Tensor Trainer::unlabeled_weak_views(const Batch& batch) const {
  const Dataset& ds = data_.train;
  Tensor x({batch.unlabeled.size(), ds.features.cols()});
  for (std::size_t i = 0; i < batch.unlabeled.size(); ++i) {
    const auto seed = weak_seed(cfg_.augment_seed, batch.unlabeled[i], batch.unlabeled_epoch[i]);
    const auto v = weak_augment(ds.features.row(batch.unlabeled[i]), ds.sample_shape, seed, cfg_.augment);
    std::copy(v.begin(), v.end(), x.row(i).begin());
  }
  return x;
}

UnlabeledLoss Trainer::unlabeled_losses(const Batch& batch, std::size_t k) const {
  const Tensor weak = unlabeled_weak_views(batch);
  std::vector<UncertaintySet> usets;
  for (std::size_t i = 0; i < batch.unlabeled.size(); ++i) {
    usets.push_back(build_uncertainty_set(weak.row(i), data_.train.sample_shape, k, cfg_.augment_seed,
                                          batch.unlabeled[i], batch.unlabeled_epoch[i], cfg_.augment));
  }
  return fixmatch_unlabeled_loss(state_.net, weak, usets, cfg_.beta, cfg_.aggregator, cfg_.target_mode,
                                 cfg_.epsilon);
}

MetricsRow Trainer::step_on(const Batch& batch) {
  const std::size_t t = state_.step;
  const Tensor xl = labeled_inputs(batch, t);
  const auto yl = data_.train.gather_labels(batch.labeled);

  std::optional<UnlabeledPlan> plan;
  if (cfg_.mode != TrainMode::kSupervised) {
    const Tensor weak = unlabeled_weak_views(batch);
    plan = cfg_.mode == TrainMode::kFixMatch ? plan_fixmatch(cfg_, state_.net, data_.train, weak, batch)
                                             : plan_maxmatch(cfg_, state_.net, data_.train, weak, batch, k_at(t));
  }
  const ObjectiveResult obj = objective(cfg_, state_.net, xl, yl, plan ? &*plan : nullptr);

  MetricsRow row;
  row.lr = learning_rate(cfg_, t);
  std::vector<Tensor> params = state_.net.tensors();
  std::vector<Tensor> velocity = state_.velocity;
  sgd_step(params, velocity, obj.grads, row.lr, {cfg_.momentum, cfg_.nesterov, cfg_.weight_decay});
  for (const Tensor& p : params) {
    if (!p.all_finite()) throw NumericError("non-finite parameters after step " + std::to_string(t + 1));
  }
  state_.net.tensors() = std::move(params);
  state_.velocity = std::move(velocity);
  ema_update(state_.ema, state_.net.tensors(), cfg_.ema_decay);
  state_.step = t + 1;

  row.step = state_.step;
  row.loss_l = obj.loss_l;
  if (plan) {
    row.loss_u = plan->loss_u;
    row.loss_u_mean = plan->loss_u_mean;
    row.loss_u_min = plan->loss_u_min;
    row.loss_u_max = plan->loss_u_max;
    row.loss_u_first = plan->loss_u_first;
    row.mask_rate = plan->mask_rate;
  }
  return row;
}

MetricsRow Trainer::step() {
  const BatchIterator::Position before = iterator_.position();
  const Batch batch = iterator_.next();
  MetricsRow row;
  try {
    row = step_on(batch);
  } catch (...) {
    iterator_.seek(before);
    throw;
  }
  state_.position = iterator_.position();
  row.epoch = cfg_.mode == TrainMode::kSupervised ? state_.position.labeled_epoch : state_.position.unlabeled_epoch;
  if (state_.step % cfg_.eval_every == 0 || state_.step == cfg_.steps) {
    Dataset labeled = data_.train;
    labeled.features = data_.train.gather(split_.labeled);
    labeled.labels = data_.train.gather_labels(split_.labeled);
    row.train_err = evaluate(state_.net, labeled).error;
    row.test_err = evaluate(state_.net, data_.test).error;
    row.ema_test_err = evaluate(ema_network(), data_.test).error;
    row.evaluated = true;
  }
  return row;
}

std::vector<MetricsRow> Trainer::run(const RowCallback& on_row) {
  std::vector<MetricsRow> rows;
  while (state_.step < cfg_.steps) {
    MetricsRow r = step();
    if (r.evaluated) {
      if (on_row) on_row(r);
      rows.push_back(r);
    }
  }
  return rows;
}

SnapshotFile Trainer::to_snapshot() const {
  SnapshotFile f;
  const Architecture& arch = state_.net.architecture();
  f.architecture = arch;
  f.add_group("params", state_.net.snapshot());
  f.add_group("ema", as_snapshot(arch, state_.ema));
  f.add_group("velocity", as_snapshot(arch, state_.velocity));
  f.add_group("init", as_snapshot(arch, state_.init));
  const auto& p = state_.position;
  f.meta = {{"step", state_.step},
            {"position",
             {{"labeled-epoch", p.labeled_epoch},
              {"labeled-offset", p.labeled_offset},
              {"unlabeled-epoch", p.unlabeled_epoch},
              {"unlabeled-offset", p.unlabeled_offset}}},
            {"config", to_json(cfg_)}};
  return f;
}

Trainer Trainer::from_snapshot(TrainConfig cfg, LoadedData data, const SnapshotFile& snap) {
  Trainer t(std::move(cfg), std::move(data));
  if (!(snap.architecture == t.state_.net.architecture())) {
    throw ConfigError("snapshot architecture does not match the training configuration");
  }
  for (const char* g : {"params", "ema", "velocity", "init"}) {
    if (!snap.has_group(g)) throw FormatError(std::string("training snapshot lacks group '") + g + "'");
  }
  t.state_.net.restore(snap.group("params"));
  t.state_.ema = snap.group("ema").tensors;
  t.state_.velocity = snap.group("velocity").tensors;
  t.state_.init = snap.group("init").tensors;
  try {
    t.state_.step = snap.meta.at("step").get<std::size_t>();
    const auto& p = snap.meta.at("position");
    t.state_.position = {p.at("labeled-epoch").get<std::uint64_t>(), p.at("labeled-offset").get<std::size_t>(),
                         p.at("unlabeled-epoch").get<std::uint64_t>(), p.at("unlabeled-offset").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("training snapshot metadata: ") + e.what());
  }
  t.iterator_.seek(t.state_.position);
  return t;
}

std::vector<Tensor> supervised_reference_step(const Network& net, std::vector<Tensor>& velocity, const Tensor& x,
                                              const std::vector<std::size_t>& y, double lr, const SgdOptions& opts) {
  Tape tape;
  std::vector<Var> params;
  for (const Tensor& p : net.tensors()) params.push_back(tape.leaf(p));
  const Var loss = ops::mean(ops::cross_entropy_rows(net.forward(tape, tape.constant(x), params), y));
  tape.backward(loss);
  std::vector<Tensor> grads;
  for (const Var& p : params) grads.push_back(p.grad());
  std::vector<Tensor> out = net.tensors();
  sgd_step(out, velocity, grads, lr, opts);
  return out;
}

double approximate_envelope_grad_norm(const Trainer& trainer, double kappa, std::size_t inner_steps,
                                      double inner_lr) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  const TrainConfig& cfg = trainer.config();
  const Batch batch = trainer.peek_batch();
  const std::size_t t = trainer.state().step;
  const Tensor xl = trainer.labeled_inputs(batch, t);
  const auto yl = trainer.data().train.gather_labels(batch.labeled);
  const Tensor weak = cfg.mode == TrainMode::kSupervised ? Tensor() : trainer.unlabeled_weak_views(batch);
  const std::vector<Tensor> anchor = trainer.state().net.tensors();
  Network probe = trainer.state().net;
  for (std::size_t s = 0; s < inner_steps; ++s) {
    std::optional<UnlabeledPlan> plan;
    if (cfg.mode == TrainMode::kFixMatch) {
      plan = plan_fixmatch(cfg, probe, trainer.data().train, weak, batch);
    } else if (cfg.mode == TrainMode::kMaxMatch) {
      plan = plan_maxmatch(cfg, probe, trainer.data().train, weak, batch, trainer.k_at(t));
    }
    const ObjectiveResult obj = objective(cfg, probe, xl, yl, plan ? &*plan : nullptr);
    auto& ps = probe.tensors();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto p = ps[i].data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] -= inner_lr * (obj.grads[i][j] + 2.0 * kappa * (p[j] - anchor[i][j]));
      }
    }
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < anchor.size(); ++i) {
    for (std::size_t j = 0; j < anchor[i].size(); ++j) {
      const double d = anchor[i][j] - probe.tensors()[i][j];
      sq += d * d;
    }
  }
  return 2.0 * kappa * std::sqrt(sq);
}

}  // namespace maxmatch
