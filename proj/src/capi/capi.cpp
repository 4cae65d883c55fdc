// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "maxmatch/maxmatch.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "augment/augment.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "convergence/minimax.hpp"
#include "data/dataset.hpp"
#include "model/network.hpp"
#include "model/snapshot_io.hpp"
#include "selfcheck/criteria.hpp"
#include "theory/bounds.hpp"
#include "trainer/trainer.hpp"

#ifndef MAXMATCH_VERSION
#define MAXMATCH_VERSION "0.0.0"
#endif

using nlohmann::json;
namespace mm = maxmatch;
namespace fs = std::filesystem;

struct mm_trainer {
  std::unique_ptr<mm::Trainer> trainer;
  std::vector<mm::MetricsRow> rows;
};

namespace {

thread_local std::string g_last_error;

mm_status fail(mm_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
mm_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MM_OK;
  } catch (const mm::Error& e) {
    switch (e.kind()) {
      case mm::ErrorKind::kConfig:
        return fail(MM_ERR_CONFIG, e.what());
      case mm::ErrorKind::kNumeric:
        return fail(MM_ERR_NUMERIC, e.what());
      case mm::ErrorKind::kIo:
        return fail(MM_ERR_IO, e.what());
    }
    return fail(MM_ERR_INTERNAL, e.what());
  } catch (const json::exception& e) {
    return fail(MM_ERR_CONFIG, std::string("json: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(MM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MM_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

json parse_json(const char* text, const char* what) {
  if (text == nullptr) throw mm::ConfigError(std::string(what) + ": missing JSON");
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw mm::ConfigError(std::string(what) + ": " + e.what());
  }
}

mm::TrainConfig parse_train_config(const char* text) {
  json j = parse_json(text, "train config");
  // A run manifest carries the resolved config under "config".
  if (j.is_object() && j.contains("config") && j.contains("subcommand")) j = j["config"];
  mm::TrainConfig cfg = mm::train_config_from_json(j);
  cfg.validate();
  return cfg;
}

void fill_row(const mm::MetricsRow& r, mm_metrics_row* out) {
  out->step = r.step;
  out->epoch = r.epoch;
  out->loss_l = r.loss_l;
  out->loss_u = r.loss_u;
  out->loss_u_mean = r.loss_u_mean;
  out->loss_u_min = r.loss_u_min;
  out->loss_u_max = r.loss_u_max;
  out->mask_rate = r.mask_rate;
  out->lr = r.lr;
  out->train_err = r.train_err;
  out->test_err = r.test_err;
  out->ema_test_err = r.ema_test_err;
  out->evaluated = r.evaluated ? 1 : 0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw mm::IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw mm::IoError("write failed: " + path.string());
}

json eval_json(const mm::EvalResult& raw, const mm::EvalResult* ema) {
  json per_class = json::array();
  for (std::size_t c = 0; c < raw.class_counts.size(); ++c) {
    json e = {{"class", c}, {"count", raw.class_counts[c]}, {"errors", raw.class_errors[c]}};
    if (ema != nullptr) e["ema-errors"] = ema->class_errors[c];
    per_class.push_back(e);
  }
  json out = {{"error", raw.error}, {"per-class", per_class}};
  if (ema != nullptr) out["ema-error"] = ema->error;
  return out;
}

// Measured quantities for the bound from a trained snapshot.
struct Measured {
  double risk_l = 0.0;
  double risk_u = 0.0;
  json detail;
};

Measured measure_for_bound(mm::BoundConfig& bc, const mm::SnapshotFile& snap, const mm::TrainConfig& tc) {
  const mm::LoadedData data = mm::load_data(tc.data);
  const mm::SslSplit split =
      mm::split_ssl(data.train, tc.data.labels_per_class, tc.data.fold_seed, tc.data.unlabeled_mode);
  const mm::ParamSnapshot params = snap.group("params");
  const mm::Network net(params);
  if (net.architecture().input_size() != data.train.features.cols()) {
    throw mm::ShapeError("snapshot input width does not match the dataset");
  }

  Measured m;
  const mm::Tensor xl = data.train.gather(split.labeled);
  const std::vector<std::size_t> yl = data.train.gather_labels(split.labeled);
  m.risk_l = mm::empirical_risk_labeled(net, xl, yl);

  // Unlabeled side in chunks to bound memory; risk_u is a mean over samples.
  const std::size_t chunk = 1024;
  const std::size_t k = tc.k;
  double sum_u = 0.0;
  double best_norm = -1.0;
  std::vector<double> widest;
  for (std::size_t start = 0; start < split.unlabeled.size(); start += chunk) {
    const std::size_t end = std::min(split.unlabeled.size(), start + chunk);
    std::vector<std::size_t> idx(split.unlabeled.begin() + static_cast<std::ptrdiff_t>(start),
                                 split.unlabeled.begin() + static_cast<std::ptrdiff_t>(end));
    const mm::Tensor xu = data.train.gather(idx);
    std::vector<mm::UncertaintySet> usets;
    usets.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      usets.push_back(mm::build_uncertainty_set(xu.row(i), data.train.sample_shape, k, tc.augment_seed, idx[i], 0,
                                                tc.augment));
      const mm::Tensor& v = usets.back().variants;
      for (std::size_t r = 0; r < v.rows(); ++r) {
        double s = 0.0;
        for (double x : v.row(r)) s += x * x;
        if (s > best_norm) {
          best_norm = s;
          widest.assign(v.row(r).begin(), v.row(r).end());
        }
      }
    }
    sum_u += mm::empirical_risk_unlabeled_worst(net, xu, usets, bc.epsilon) * static_cast<double>(idx.size());
  }
  m.risk_u = split.unlabeled.empty() ? 0.0 : sum_u / static_cast<double>(split.unlabeled.size());

  bc.n_l = static_cast<double>(split.labeled.size());
  bc.n_u = static_cast<double>(split.unlabeled.size());
  bc.n_c = static_cast<double>(net.n_classes());
  bc.k = static_cast<double>(k);
  bc.w = static_cast<double>(net.parameter_count());
  bc.w_g = static_cast<double>(net.single_output_parameter_count());

  const mm::Tensor xu_all = data.train.gather(split.unlabeled);
  const std::size_t d = data.train.features.cols();
  const mm::Tensor transformed = widest.empty() ? mm::Tensor({0, d}) : mm::Tensor({1, d}, widest);
  const bool has_init = snap.has_group("init");
  const mm::ParamSnapshot init = has_init ? snap.group("init") : params;
  const mm::NormBounds nb = mm::measure_norm_bounds(init, params, xu_all, transformed);
  bc.chi = nb.chi;
  bc.chi_tau = nb.chi_tau;
  if (has_init) {
    bc.nu = nb.nu;
    bc.beta_dist = nb.beta_dist;
  }
  m.detail = {{"risk-labeled", m.risk_l},
              {"risk-unlabeled", m.risk_u},
              {"n-l", bc.n_l},
              {"n-u", bc.n_u},
              {"n-c", bc.n_c},
              {"k", bc.k},
              {"w", bc.w},
              {"w-g", bc.w_g},
              {"chi", bc.chi},
              {"chi-tau", bc.chi_tau},
              {"nu", bc.nu},
              {"beta-dist", bc.beta_dist},
              {"norms-from-init", has_init},
              {"power-iteration-converged", nb.converged}};
  return m;
}

// Splits the risk keys out of a bound config object.
mm::BoundConfig parse_bound(const char* text, double& risk_l, double& risk_u) {
  json j = parse_json(text, "bound config");
  if (!j.is_object()) throw mm::ConfigError("bound config must be a JSON object");
  risk_l = 0.0;
  risk_u = 0.0;
  if (j.contains("risk-labeled")) {
    risk_l = j["risk-labeled"].get<double>();
    j.erase("risk-labeled");
  }
  if (j.contains("risk-unlabeled")) {
    risk_u = j["risk-unlabeled"].get<double>();
    j.erase("risk-unlabeled");
  }
  if (risk_l < 0.0 || risk_u < 0.0) throw mm::ConfigError("risks must be nonnegative");
  return mm::bound_config_from_json(j);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Writes one image grid per sample: original, weak view, then the strong views.
void preview_images(const mm::Dataset& ds, const std::vector<std::size_t>& picks, std::size_t k,
                    std::uint64_t seed, const mm::AugmentConfig& acfg, const fs::path& out) {
  const std::size_t c = ds.sample_shape[0], h = ds.sample_shape[1], w = ds.sample_shape[2];
  const std::size_t tiles = k + 2, gap = 2;
  const std::size_t width = tiles * w + (tiles - 1) * gap;
  for (std::size_t p = 0; p < picks.size(); ++p) {
    const std::size_t id = picks[p];
    const auto x = ds.features.row(id);
    std::vector<std::vector<double>> views;
    views.emplace_back(x.begin(), x.end());
    views.push_back(mm::weak_augment(x, ds.sample_shape, mm::weak_seed(seed, id, 0), acfg));
    const mm::UncertaintySet us = mm::build_uncertainty_set(views[1], ds.sample_shape, k, seed, id, 0, acfg);
    for (std::size_t j = 0; j < k; ++j) views.emplace_back(us.variants.row(j).begin(), us.variants.row(j).end());

    const bool color = c == 3;
    std::string pix(width * h * (color ? 3 : 1), '\0');
    for (std::size_t t = 0; t < tiles; ++t) {
      for (std::size_t yy = 0; yy < h; ++yy) {
        for (std::size_t xx = 0; xx < w; ++xx) {
          const std::size_t col = t * (w + gap) + xx;
          if (color) {
            for (std::size_t ch = 0; ch < 3; ++ch) {
              pix[(yy * width + col) * 3 + ch] = static_cast<char>(to_byte(views[t][(ch * h + yy) * w + xx]));
            }
          } else {
            double s = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) s += views[t][(ch * h + yy) * w + xx];
            pix[yy * width + col] = static_cast<char>(to_byte(s / static_cast<double>(c)));
          }
        }
      }
    }
    char name[64];
    std::snprintf(name, sizeof(name), "sample-%05zu.%s", id, color ? "ppm" : "pgm");
    std::ostringstream os;
    os << (color ? "P6\n" : "P5\n") << width << ' ' << h << "\n255\n" << pix;
    write_text(out / name, os.str());
  }
}

// One SVG: originals as filled dots, weak views as rings, strong views as
// crosses, each sample linked to its views.
void preview_vectors(const mm::Dataset& ds, const std::vector<std::size_t>& picks, std::size_t k,
                     std::uint64_t seed, const mm::AugmentConfig& acfg, const fs::path& out) {
  if (ds.features.cols() < 2) throw mm::ConfigError("augment preview needs at least two features");
  struct Item {
    std::size_t label;
    std::vector<double> orig, weak;
    std::vector<std::vector<double>> strong;
  };
  std::vector<Item> items;
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  auto grow = [&](const std::vector<double>& v) {
    lo_x = std::min(lo_x, v[0]);
    hi_x = std::max(hi_x, v[0]);
    lo_y = std::min(lo_y, v[1]);
    hi_y = std::max(hi_y, v[1]);
  };
  for (std::size_t id : picks) {
    Item it;
    it.label = ds.labels[id];
    const auto x = ds.features.row(id);
    it.orig.assign(x.begin(), x.end());
    it.weak = mm::weak_augment(x, ds.sample_shape, mm::weak_seed(seed, id, 0), acfg);
    const mm::UncertaintySet us = mm::build_uncertainty_set(it.weak, ds.sample_shape, k, seed, id, 0, acfg);
    for (std::size_t j = 0; j < k; ++j) it.strong.emplace_back(us.variants.row(j).begin(), us.variants.row(j).end());
    grow(it.orig);
    grow(it.weak);
    for (const auto& s : it.strong) grow(s);
    items.push_back(std::move(it));
  }
  const double size = 640.0, margin = 30.0;
  const double sx = (size - 2 * margin) / std::max(1e-9, hi_x - lo_x);
  const double sy = (size - 2 * margin) / std::max(1e-9, hi_y - lo_y);
  auto px = [&](double v) { return margin + (v - lo_x) * sx; };
  auto py = [&](double v) { return size - margin - (v - lo_y) * sy; };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream os;
  char buf[256];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const Item& it : items) {
    const char* col = kColors[it.label % 10];
    for (const auto& s : it.strong) {
      std::snprintf(buf, sizeof(buf),
                    "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" stroke-opacity=\"0.3\"/>\n",
                    px(it.orig[0]), py(it.orig[1]), px(s[0]), py(s[1]), col);
      os << buf;
      std::snprintf(buf, sizeof(buf),
                    "<path d=\"M%.2f %.2f l6 6 m0 -6 l-6 6\" stroke=\"%s\" transform=\"translate(-3 -3)\"/>\n",
                    px(s[0]), py(s[1]), col);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"none\" stroke=\"%s\"/>\n",
                  px(it.weak[0]), py(it.weak[1]), col);
    os << buf;
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", px(it.orig[0]),
                  py(it.orig[1]), col);
    os << buf;
  }
  os << "</svg>\n";
  write_text(out / "preview.svg", os.str());
}

}  // namespace

extern "C" {

const char* mm_version(void) { return MAXMATCH_VERSION; }

const char* mm_last_error(void) { return g_last_error.c_str(); }

void mm_string_free(char* s) { std::free(s); }

mm_status mm_config_normalize(const char* train_config_json, char** resolved_json) {
  if (resolved_json == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null output pointer");
  return guarded([&] { *resolved_json = dup_string(mm::to_json(parse_train_config(train_config_json)).dump(2)); });
}

mm_status mm_trainer_create(const char* train_config_json, mm_trainer** out) {
  if (out == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null output pointer");
  *out = nullptr;
  return guarded([&] {
    mm::TrainConfig cfg = parse_train_config(train_config_json);
    mm::LoadedData data = mm::load_data(cfg.data);
    auto h = std::make_unique<mm_trainer>();
    h->trainer = std::make_unique<mm::Trainer>(std::move(cfg), std::move(data));
    *out = h.release();
  });
}

mm_status mm_trainer_resume(const char* train_config_json, const char* snapshot_path, mm_trainer** out) {
  if (out == nullptr || snapshot_path == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    mm::TrainConfig cfg = parse_train_config(train_config_json);
    const mm::SnapshotFile snap = mm::load_snapshot(snapshot_path);
    mm::LoadedData data = mm::load_data(cfg.data);
    auto h = std::make_unique<mm_trainer>();
    h->trainer = std::make_unique<mm::Trainer>(mm::Trainer::from_snapshot(std::move(cfg), std::move(data), snap));
    *out = h.release();
  });
}

void mm_trainer_free(mm_trainer* t) { delete t; }

mm_status mm_trainer_step(mm_trainer* t, mm_metrics_row* row) {
  if (t == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null trainer");
  return guarded([&] {
    const mm::MetricsRow r = t->trainer->step();
    if (r.evaluated) t->rows.push_back(r);
    if (row != nullptr) fill_row(r, row);
  });
}

mm_status mm_trainer_run(mm_trainer* t, mm_row_callback cb, void* user) {
  if (t == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null trainer");
  return guarded([&] {
    t->trainer->run([&](const mm::MetricsRow& r) {
      t->rows.push_back(r);
      if (cb != nullptr) {
        mm_metrics_row out;
        fill_row(r, &out);
        cb(&out, user);
      }
    });
  });
}

uint64_t mm_trainer_current_step(const mm_trainer* t) { return t == nullptr ? 0 : t->trainer->state().step; }

mm_status mm_trainer_metrics_csv(const mm_trainer* t, char** csv) {
  if (t == nullptr || csv == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *csv = dup_string(mm::metrics_csv(t->rows)); });
}

mm_status mm_trainer_metrics_svg(const mm_trainer* t, char** svg) {
  if (t == nullptr || svg == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *svg = dup_string(mm::metrics_svg(t->rows)); });
}

mm_status mm_trainer_config_json(const mm_trainer* t, char** out) {
  if (t == nullptr || out == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = dup_string(mm::to_json(t->trainer->config()).dump(2)); });
}

mm_status mm_trainer_save_snapshot(const mm_trainer* t, const char* path) {
  if (t == nullptr || path == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { mm::save_snapshot(path, t->trainer->to_snapshot()); });
}

mm_status mm_trainer_envelope_estimate(const mm_trainer* t, double kappa, uint64_t inner_steps, double* norm) {
  if (t == nullptr || norm == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null argument");
  if (!(kappa > 0.0) || inner_steps == 0) return fail(MM_ERR_INVALID_ARGUMENT, "kappa and inner_steps must be positive");
  return guarded([&] { *norm = mm::approximate_envelope_grad_norm(*t->trainer, kappa, inner_steps); });
}

mm_status mm_evaluate(const char* snapshot_path, const char* spec_json, char** report_json) {
  if (snapshot_path == nullptr || report_json == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    json spec = parse_json(spec_json, "dataset spec");
    if (spec.is_object() && spec.contains("config") && spec.contains("subcommand")) spec = spec["config"];
    std::string split = "test";
    json data_json = spec;
    if (spec.is_object() && spec.contains("data")) {
      data_json = spec["data"];
      if (spec.contains("split")) split = spec["split"].get<std::string>();
    }
    if (split != "test" && split != "train" && split != "labeled") {
      throw mm::ConfigError("split must be test, train or labeled, got '" + split + "'");
    }
    mm::DataConfig dc;
    try {
      dc = mm::data_config_from_json(data_json);
    } catch (const mm::ConfigError&) {
      // A training config without a "data" block uses the default dataset.
      dc = mm::train_config_from_json(data_json).data;
    }
    const mm::LoadedData data = mm::load_data(dc);
    mm::Dataset target;
    if (split == "test") {
      target = data.test;
    } else if (split == "train") {
      target = data.train;
    } else {
      const mm::SslSplit s = mm::split_ssl(data.train, dc.labels_per_class, dc.fold_seed, dc.unlabeled_mode);
      target = data.train;
      target.features = data.train.gather(s.labeled);
      target.labels = data.train.gather_labels(s.labeled);
    }

    const mm::SnapshotFile snap = mm::load_snapshot(snapshot_path);
    const mm::Network net(snap.group("params"));
    if (net.architecture().input_size() != target.features.cols()) {
      throw mm::ShapeError("snapshot expects " + std::to_string(net.architecture().input_size()) +
                           " input features, dataset has " + std::to_string(target.features.cols()));
    }
    if (net.n_classes() < target.n_classes) {
      throw mm::ShapeError("snapshot has fewer outputs than the dataset has classes");
    }
    const mm::EvalResult raw = mm::evaluate(net, target);
    std::optional<mm::EvalResult> ema;
    if (snap.has_group("ema")) ema = mm::evaluate(mm::Network(snap.group("ema")), target);
    json out = eval_json(raw, ema ? &*ema : nullptr);
    out["snapshot"] = snapshot_path;
    out["split"] = split;
    out["n"] = target.size();
    if (snap.meta.contains("step")) out["step"] = snap.meta["step"];
    *report_json = dup_string(out.dump(2));
  });
}

mm_status mm_bound_evaluate(const char* bound_json, const char* snapshot_path, const char* train_config_json,
                            char** report_json, char** table) {
  if ((snapshot_path == nullptr) != (train_config_json == nullptr)) {
    return fail(MM_ERR_INVALID_ARGUMENT, "snapshot and training config must be given together");
  }
  return guarded([&] {
    double risk_l = 0.0, risk_u = 0.0;
    mm::BoundConfig bc = parse_bound(bound_json, risk_l, risk_u);
    json measured;
    if (snapshot_path != nullptr) {
      const mm::TrainConfig tc = parse_train_config(train_config_json);
      const mm::SnapshotFile snap = mm::load_snapshot(snapshot_path);
      const Measured m = measure_for_bound(bc, snap, tc);
      risk_l = m.risk_l;
      risk_u = m.risk_u;
      measured = m.detail;
    }
    const mm::BoundReport r = mm::kterm_bound(bc, risk_l, risk_u);
    if (report_json != nullptr) {
      json out = {{"config", mm::to_json(bc)}, {"report", mm::to_json(r)}};
      if (!measured.is_null()) out["measured"] = measured;
      *report_json = dup_string(out.dump(2));
    }
    if (table != nullptr) *table = dup_string(mm::bound_table(r));
  });
}

mm_status mm_bound_sweep(const char* bound_json, const char* field, double start, double stop, uint64_t steps,
                         char** csv) {
  if (field == nullptr || csv == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    double risk_l = 0.0, risk_u = 0.0;
    const mm::BoundConfig bc = parse_bound(bound_json, risk_l, risk_u);
    *csv = dup_string(mm::bound_sweep_csv(bc, field, start, stop, steps, risk_l, risk_u));
  });
}

mm_status mm_converge_run(const char* instance_json, char** trace_csv, char** summary_json) {
  return guarded([&] {
    const mm::ConvergenceConfig cfg = mm::convergence_config_from_json(parse_json(instance_json, "instance"));
    const mm::ConvergenceTrace tr = mm::run_convergence_experiment(cfg);
    if (trace_csv != nullptr) *trace_csv = dup_string(mm::convergence_csv(tr));
    if (summary_json != nullptr) {
      json s = {{"config", mm::to_json(cfg)},
                {"eta", tr.eta},
                {"lipschitz", tr.lipschitz},
                {"lipschitz-observed", tr.lipschitz_observed},
                {"b", tr.b},
                {"gap0", tr.gap0},
                {"final-running-avg-sq", tr.final_avg_sq},
                {"final-rhs", tr.final_rhs},
                {"slope", tr.slope}};
      *summary_json = dup_string(s.dump(2));
    }
  });
}

mm_status mm_augment_preview(const char* train_config_json, const char* out_dir, uint64_t count, uint64_t k,
                             uint64_t seed) {
  if (out_dir == nullptr) return fail(MM_ERR_INVALID_ARGUMENT, "null output directory");
  if (count == 0 || k == 0) return fail(MM_ERR_INVALID_ARGUMENT, "count and k must be positive");
  return guarded([&] {
    const mm::TrainConfig cfg = parse_train_config(train_config_json);
    const mm::LoadedData data = mm::load_data(cfg.data);
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw mm::IoError("cannot create " + out.string() + ": " + ec.message());
    std::vector<std::size_t> picks(data.train.size());
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    mm::Rng rng(seed);
    rng.shuffle(picks);
    picks.resize(std::min<std::size_t>(picks.size(), count));
    std::sort(picks.begin(), picks.end());
    if (data.train.is_image()) {
      preview_images(data.train, picks, k, seed, cfg.augment, out);
    } else {
      preview_vectors(data.train, picks, k, seed, cfg.augment, out);
    }
  });
}

mm_status mm_selfcheck(const int* ids, size_t n, int quick, mm_check_callback cb, void* user, int* failures) {
  if (ids == nullptr && n > 0) return fail(MM_ERR_INVALID_ARGUMENT, "null id list");
  return guarded([&] {
    std::vector<int> run;
    if (n == 0) {
      for (const auto& c : mm::criteria()) run.push_back(c.id);
    } else {
      run.assign(ids, ids + n);
    }
    for (int id : run) {
      const bool known = std::any_of(mm::criteria().begin(), mm::criteria().end(),
                                     [id](const mm::CriterionInfo& c) { return c.id == id; });
      if (!known) throw mm::ConfigError("unknown criterion " + std::to_string(id));
    }
    int failed = 0;
    for (int id : run) {
      const mm::CriterionResult r = mm::run_criterion(id, quick != 0);
      if (!r.passed) ++failed;
      if (cb != nullptr) cb(r.id, r.name.c_str(), r.passed ? 1 : 0, r.seconds, r.detail.c_str(), user);
    }
    if (failures != nullptr) *failures = failed;
  });
}

}  // extern "C"
