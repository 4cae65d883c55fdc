// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "common/error.hpp"
#include "model/snapshot_io.hpp"
#include "trainer/trainer.hpp"

using namespace maxmatch;

namespace {

constexpr double kCos7Pi16 = 0.19509032201612826785;
constexpr double kCos7Pi32 = 0.77301045336273696081;
constexpr double kEma1000 = 0.63230457522903595537;

TrainConfig small_config() {
  TrainConfig c;
  c.data.n = 200;
  c.data.n_test = 200;
  c.hidden = {16};
  c.labeled_batch = 4;
  c.unlabeled_batch = 12;
  c.steps = 30;
  c.eval_every = 10;
  c.beta = 0.6;
  return c;
}

Trainer make(const TrainConfig& c) { return Trainer(c, load_data(c.data)); }

}  // namespace

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 100, 0.03) == 0.03);
  CHECK(cosine_lr(100, 100, 0.03) == doctest::Approx(0.03 * kCos7Pi16).epsilon(1e-14));
  CHECK(cosine_lr(50, 100, 0.03) == doctest::Approx(0.03 * kCos7Pi32).epsilon(1e-14));
  CHECK(cosine_lr(250, 100, 0.03) == cosine_lr(100, 100, 0.03));
  for (std::size_t t = 1; t <= 100; ++t) CHECK(cosine_lr(t, 100, 1.0) < cosine_lr(t - 1, 100, 1.0));
}

TEST_CASE("warmup ramps linearly into the cosine schedule") {
  TrainConfig c;
  c.lr = 0.1;
  c.steps = 100;
  c.warmup_steps = 10;
  CHECK(learning_rate(c, 0) < learning_rate(c, 5));
  CHECK(learning_rate(c, 5) < learning_rate(c, 9));
  CHECK(learning_rate(c, 9) <= 0.1);
  c.warmup_steps = 0;
  CHECK(learning_rate(c, 40) == cosine_lr(40, 100, 0.1));
}

TEST_CASE("EMA of constant parameters") {
  const std::vector<Tensor> params{Tensor({2}, {3.0, -1.0})};
  std::vector<Tensor> ema{Tensor({2}, 0.0)};
  const double m = 0.9;
  for (int t = 1; t <= 20; ++t) {
    ema_update(ema, params, m);
    CHECK(ema[0][0] == doctest::Approx(3.0 * (1.0 - std::pow(m, t))).epsilon(1e-12));
  }
  std::vector<Tensor> tracking{Tensor({2}, 0.0)};
  ema_update(tracking, params, 0.0);
  CHECK(tracking[0] == params[0]);

  std::vector<Tensor> slow{Tensor({1}, 0.0)};
  const std::vector<Tensor> one{Tensor({1}, 1.0)};
  for (int t = 0; t < 1000; ++t) ema_update(slow, one, 0.999);
  CHECK(slow[0][0] == doctest::Approx(kEma1000).epsilon(1e-10));
}

TEST_CASE("SGD step with decoupled decay and momentum") {
  std::vector<Tensor> p{Tensor({1}, {1.0})};
  std::vector<Tensor> v{Tensor({1}, {0.5})};
  const std::vector<Tensor> g{Tensor({1}, {2.0})};
  SgdOptions o;
  o.momentum = 0.9;
  o.weight_decay = 0.1;

  SUBCASE("nesterov") {
    o.nesterov = true;
    sgd_step(p, v, g, 0.1, o);
    // p = 1 - 0.1*0.1*1 = 0.99; v = 0.9*0.5 + 2 = 2.45; p -= 0.1*(2 + 0.9*2.45).
    CHECK(v[0][0] == doctest::Approx(2.45));
    CHECK(p[0][0] == doctest::Approx(0.99 - 0.1 * (2.0 + 0.9 * 2.45)));
  }
  SUBCASE("heavy ball") {
    o.nesterov = false;
    sgd_step(p, v, g, 0.1, o);
    CHECK(p[0][0] == doctest::Approx(0.99 - 0.1 * 2.45));
  }
}

TEST_CASE("lambda 0 step equals the supervised reference update exactly") {
  TrainConfig c = small_config();
  c.lambda = 0.0;
  Trainer t = make(c);
  const Network before = t.state().net;
  const Batch b = t.peek_batch();
  const Tensor x = t.labeled_inputs(b, 0);
  const auto y = t.data().train.gather_labels(b.labeled);
  std::vector<Tensor> velocity = t.state().velocity;
  SgdOptions o;
  o.momentum = c.momentum;
  o.nesterov = c.nesterov;
  o.weight_decay = c.weight_decay;
  const auto expect = supervised_reference_step(before, velocity, x, y, learning_rate(c, 0), o);
  t.step();
  CHECK(t.state().net.tensors() == expect);
  CHECK(t.state().velocity == velocity);
}

TEST_CASE("beta 1 masks every unlabeled sample so training matches lambda 0") {
  TrainConfig a = small_config();
  a.beta = 1.0;
  TrainConfig b = small_config();
  b.lambda = 0.0;
  Trainer ta = make(a), tb = make(b);
  for (int i = 0; i < 10; ++i) {
    const MetricsRow r = ta.step();
    tb.step();
    CHECK(r.mask_rate == 0.0);
    CHECK(r.loss_u == 0.0);
  }
  CHECK(ta.state().net.tensors() == tb.state().net.tensors());
}

TEST_CASE("same seeds give identical metrics") {
  const TrainConfig c = small_config();
  Trainer a = make(c), b = make(c);
  CHECK(metrics_csv(a.run()) == metrics_csv(b.run()));
}

TEST_CASE("resume from a snapshot continues the same trajectory") {
  const TrainConfig c = small_config();
  Trainer full = make(c);
  for (int i = 0; i < 30; ++i) full.step();

  Trainer first = make(c);
  for (int i = 0; i < 13; ++i) first.step();
  const SnapshotFile snap = decode_snapshot(encode_snapshot(first.to_snapshot()));
  Trainer resumed = Trainer::from_snapshot(c, load_data(c.data), snap);
  CHECK(resumed.state().step == 13);
  for (int i = 13; i < 30; ++i) resumed.step();
  CHECK(resumed.state().net.tensors() == full.state().net.tensors());
  CHECK(resumed.state().ema == full.state().ema);
}

TEST_CASE("K=1 max and FixMatch mode follow the same trajectory") {
  TrainConfig a = small_config();
  a.k = 1;
  TrainConfig b = a;
  b.mode = TrainMode::kFixMatch;
  Trainer ta = make(a), tb = make(b);
  for (int i = 0; i < 20; ++i) {
    ta.step();
    tb.step();
  }
  CHECK(ta.state().net.tensors() == tb.state().net.tensors());
}

TEST_CASE("supervised mode with no unlabeled batch runs") {
  TrainConfig c = small_config();
  c.mode = TrainMode::kSupervised;
  c.unlabeled_batch = 0;
  c.lambda = 0.0;
  Trainer t = make(c);
  const auto rows = t.run();
  CHECK(rows.back().step == 30);
  CHECK(rows.back().loss_u == 0.0);
}

TEST_CASE("a non-finite step throws and leaves the state untouched") {
  TrainConfig c = small_config();
  c.lr = 1e200;
  Trainer t = make(c);
  bool threw = false;
  for (int i = 0; i < 5 && !threw; ++i) {
    const std::vector<Tensor> params = t.state().net.tensors();
    const std::size_t step = t.state().step;
    const auto pos = t.state().position;
    try {
      t.step();
    } catch (const NumericError&) {
      threw = true;
      CHECK(t.state().net.tensors() == params);
      CHECK(t.state().step == step);
      CHECK(t.state().position.labeled_offset == pos.labeled_offset);
      CHECK(t.state().position.unlabeled_offset == pos.unlabeled_offset);
    }
  }
  CHECK(threw);
}

TEST_CASE("sampled K stays within the configured set") {
  TrainConfig c = small_config();
  c.k_set = {1, 3, 5};
  const Trainer t = make(c);
  bool saw[6] = {};
  for (std::size_t s = 0; s < 200; ++s) {
    const std::size_t k = t.k_at(s);
    REQUIRE((k == 1 || k == 3 || k == 5));
    saw[k] = true;
  }
  CHECK((saw[1] && saw[3] && saw[5]));
}

TEST_CASE("config round trip, defaults and validation") {
  TrainConfig c = small_config();
  c.aggregator = AggregatorMode::kMean;
  c.target_mode = TargetMode::kSoft;
  c.k_set = {2, 4};
  const nlohmann::json j = to_json(c);
  CHECK(to_json(train_config_from_json(j)) == j);
  CHECK(to_json(train_config_from_json(nlohmann::json::object())) == to_json(TrainConfig{}));
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"lamda", 1.0}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"mode", "cotraining"}}), ConfigError);
  TrainConfig bad;
  bad.beta = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("metrics CSV columns are in the documented order") {
  const std::vector<std::string> expect{"step",       "epoch",      "loss_l",   "loss_u",
                                        "loss_u_mean", "loss_u_min", "loss_u_max", "mask_rate",
                                        "lr",         "train_err",  "test_err", "ema_test_err"};
  CHECK(metrics_columns() == expect);
  const std::string csv = metrics_csv({});
  CHECK(csv.substr(0, csv.find('\n')) ==
        "step,epoch,loss_l,loss_u,loss_u_mean,loss_u_min,loss_u_max,mask_rate,lr,train_err,test_err,ema_test_err");
}

TEST_CASE("evaluation error of a constant classifier on balanced data") {
  Dataset d;
  d.n_classes = 10;
  d.sample_shape = {2};
  d.features = Tensor({100, 2});
  for (std::size_t i = 0; i < 100; ++i) d.labels.push_back(i % 10);
  ParamSnapshot p{Architecture::mlp(2, {}, 10), {Tensor({2, 10}), Tensor({10})}};
  p.tensors[1][3] = 1.0;
  const EvalResult r = evaluate(Network(p), d);
  CHECK(r.error == doctest::Approx(0.9));
  CHECK(r.class_errors[3] == 0);
  CHECK(r.class_errors[0] == 10);
}
