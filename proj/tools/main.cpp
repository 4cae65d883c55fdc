// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

// maxmatch command-line front end. Talks to the library only through the C API.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "maxmatch/maxmatch.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

// Carries an exit code up to main.
struct Exit {
  int code;
  std::string message;
};

int exit_code(mm_status s) {
  switch (s) {
    case MM_OK:
      return kExitOk;
    case MM_ERR_INVALID_ARGUMENT:
    case MM_ERR_CONFIG:
      return kExitConfig;
    case MM_ERR_NUMERIC:
      return kExitNumeric;
    case MM_ERR_IO:
      return kExitIo;
    default:
      return kExitFailure;
  }
}

void check(mm_status s, const std::string& what) {
  if (s != MM_OK) throw Exit{exit_code(s), what + ": " + mm_last_error()};
}

// Owns a string returned by the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { mm_string_free(p); }
  std::string str() const { return p == nullptr ? std::string() : std::string(p); }
};

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Exit{kExitIo, "cannot read " + path};
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Exit{kExitIo, "cannot write " + path.string()};
  os << text;
  if (!os) throw Exit{kExitIo, "write failed: " + path.string()};
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Exit{kExitIo, "cannot create " + dir.string() + ": " + ec.message()};
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Exit{kExitConfig, what + ": " + e.what()};
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- train -----------------------------------------------------------------

struct TrainOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t folds = 1;
  bool plot = false;
  bool quiet = false;
  bool parallel = false;
};

struct RunResult {
  int code = kExitOk;
  std::string message;
  std::optional<mm_metrics_row> last;
};

std::mutex g_print_mutex;

void print_row(const mm_metrics_row& r, const std::string& prefix) {
  std::lock_guard<std::mutex> lock(g_print_mutex);
  std::printf("%sstep %6llu  loss_l %.4f  loss_u %.4f  mask %.3f  lr %.5f  train_err %.4f  test_err %.4f  ema_test_err %.4f\n",
              prefix.c_str(), static_cast<unsigned long long>(r.step), r.loss_l, r.loss_u, r.mask_rate, r.lr,
              r.train_err, r.test_err, r.ema_test_err);
  std::fflush(stdout);
}

// One full training run into `dir`. The manifest goes to disk before the
// first step and is rewritten with the end time and outcome afterwards.
RunResult train_one(const json& config, const fs::path& dir, bool plot, bool quiet, const std::string& prefix) {
  RunResult res;
  try {
    make_dirs(dir);
    Owned resolved;
    check(mm_config_normalize(config.dump().c_str(), &resolved.p), "config");
    const json cfg = parse_json(resolved.str(), "resolved config");
    json manifest = {{"subcommand", "train"},
                     {"tool", "maxmatch"},
                     {"version", mm_version()},
                     {"config", cfg},
                     {"seeds",
                      {{"model", cfg["model-seed"]}, {"data", cfg["data-seed"]}, {"augment", cfg["augment-seed"]}}},
                     {"started", utc_now()},
                     {"finished", nullptr},
                     {"status", "running"},
                     {"outputs", {{"metrics", "metrics.csv"}, {"snapshot", "snapshot.mmsnap"}}}};
    if (plot) manifest["outputs"]["plot"] = "metrics.svg";
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    mm_trainer* raw = nullptr;
    check(mm_trainer_create(resolved.p, &raw), "trainer");
    std::unique_ptr<mm_trainer, void (*)(mm_trainer*)> t(raw, mm_trainer_free);

    struct Ctx {
      RunResult* res;
      bool quiet;
      const std::string* prefix;
    } ctx{&res, quiet, &prefix};
    const mm_status st = mm_trainer_run(
        t.get(),
        [](const mm_metrics_row* r, void* user) {
          auto* c = static_cast<Ctx*>(user);
          c->res->last = *r;
          if (!c->quiet) print_row(*r, *c->prefix);
        },
        &ctx);
    const std::string err = st == MM_OK ? "" : mm_last_error();

    Owned csv;
    check(mm_trainer_metrics_csv(t.get(), &csv.p), "metrics");
    write_file(dir / "metrics.csv", csv.str());
    if (plot) {
      Owned svg;
      check(mm_trainer_metrics_svg(t.get(), &svg.p), "plot");
      write_file(dir / "metrics.svg", svg.str());
    }
    if (st == MM_ERR_NUMERIC) {
      // The failed step left the state untouched; keep it for inspection.
      check(mm_trainer_save_snapshot(t.get(), (dir / "diagnostic.mmsnap").c_str()), "diagnostic snapshot");
      manifest["outputs"]["diagnostic"] = "diagnostic.mmsnap";
      manifest["outputs"].erase("snapshot");
    } else if (st == MM_OK) {
      check(mm_trainer_save_snapshot(t.get(), (dir / "snapshot.mmsnap").c_str()), "snapshot");
    }
    manifest["finished"] = utc_now();
    manifest["status"] = st == MM_OK ? "ok" : "failed";
    if (st != MM_OK) manifest["error"] = err;
    if (res.last) {
      manifest["final"] = {{"step", res.last->step},
                           {"train-err", res.last->train_err},
                           {"test-err", res.last->test_err},
                           {"ema-test-err", res.last->ema_test_err}};
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    if (st != MM_OK) {
      res.code = exit_code(st);
      res.message = "train: " + err;
    }
  } catch (const Exit& e) {
    res.code = e.code;
    res.message = e.message;
  }
  return res;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1); 0 for a single run.
double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int cmd_train(const TrainOptions& o) {
  if (o.folds == 0) throw Exit{kExitConfig, "--folds must be at least 1"};
  json config = parse_json(read_file(o.config), o.config);
  if (config.is_object() && config.contains("subcommand") && config.contains("config")) config = config["config"];
  if (!config.is_object()) throw Exit{kExitConfig, o.config + ": expected a JSON object"};
  if (o.seed) {
    config["model-seed"] = *o.seed;
    config["data-seed"] = *o.seed + 1;
    config["augment-seed"] = *o.seed + 2;
  }

  fs::path out = o.out;
  if (out.empty()) {
    const char* root = std::getenv("MAXMATCH_OUT_ROOT");
    fs::path base = root != nullptr && *root != '\0' ? fs::path(root) : fs::path("runs");
    out = base / fs::path(o.config).stem();
  }

  if (o.folds == 1) {
    const RunResult r = train_one(config, out, o.plot, o.quiet, "");
    if (r.code != kExitOk) throw Exit{r.code, r.message};
    if (r.last) {
      std::printf("final step %llu  test_err %.4f  ema_test_err %.4f\n",
                  static_cast<unsigned long long>(r.last->step), r.last->test_err, r.last->ema_test_err);
    }
    std::printf("outputs in %s\n", out.string().c_str());
    return kExitOk;
  }

  // Fold f shifts every seed by f, which moves the labeled split as well.
  Owned resolved;
  check(mm_config_normalize(config.dump().c_str(), &resolved.p), "config");
  const json base = parse_json(resolved.str(), "resolved config");
  std::vector<json> fold_cfg;
  for (std::size_t f = 0; f < o.folds; ++f) {
    json c = base;
    c["model-seed"] = base["model-seed"].get<std::uint64_t>() + f;
    c["data-seed"] = base["data-seed"].get<std::uint64_t>() + f;
    c["augment-seed"] = base["augment-seed"].get<std::uint64_t>() + f;
    c["data"]["fold-seed"] = base["data"]["fold-seed"].get<std::uint64_t>() + f;
    fold_cfg.push_back(c);
  }
  std::vector<RunResult> results(o.folds);
  auto run_fold = [&](std::size_t f) {
    char prefix[32];
    std::snprintf(prefix, sizeof(prefix), "[fold %zu] ", f);
    results[f] = train_one(fold_cfg[f], out / ("fold-" + std::to_string(f)), o.plot, o.quiet || o.parallel, prefix);
  };
  if (o.parallel) {
    std::vector<std::thread> threads;
    for (std::size_t f = 0; f < o.folds; ++f) threads.emplace_back(run_fold, f);
    for (auto& th : threads) th.join();
  } else {
    for (std::size_t f = 0; f < o.folds; ++f) run_fold(f);
  }
  for (const RunResult& r : results) {
    if (r.code != kExitOk) throw Exit{r.code, r.message};
  }

  std::vector<double> test, ema;
  json runs = json::array();
  for (std::size_t f = 0; f < o.folds; ++f) {
    const mm_metrics_row& r = *results[f].last;
    test.push_back(r.test_err);
    ema.push_back(r.ema_test_err);
    runs.push_back({{"fold", f}, {"dir", "fold-" + std::to_string(f)}, {"test-err", r.test_err},
                    {"ema-test-err", r.ema_test_err}});
  }
  const json summary = {{"folds", o.folds},
                        {"runs", runs},
                        {"test-err", {{"mean", mean_of(test)}, {"stddev", stddev_of(test)}}},
                        {"ema-test-err", {{"mean", mean_of(ema)}, {"stddev", stddev_of(ema)}}}};
  write_file(out / "summary.json", summary.dump(2) + "\n");
  std::printf("test_err      %.2f%% ± %.2f%%  (%zu folds)\n", 100.0 * mean_of(test), 100.0 * stddev_of(test), o.folds);
  std::printf("ema_test_err  %.2f%% ± %.2f%%\n", 100.0 * mean_of(ema), 100.0 * stddev_of(ema));
  std::printf("outputs in %s\n", out.string().c_str());
  return kExitOk;
}

// ---- eval / bound / converge / preview / selfcheck ----------------------------

int cmd_eval(const std::string& snapshot, const std::string& data, const std::string& split, const std::string& out) {
  json spec = parse_json(read_file(data), data);
  if (!split.empty()) {
    if (spec.is_object() && spec.contains("subcommand") && spec.contains("config")) spec = spec["config"];
    if (!spec.is_object() || !spec.contains("data")) spec = json{{"data", spec}};
    spec["split"] = split;
  }
  Owned report;
  check(mm_evaluate(snapshot.c_str(), spec.dump().c_str(), &report.p), "eval");
  if (!out.empty()) write_file(out, report.str() + "\n");
  std::printf("%s\n", report.str().c_str());
  return kExitOk;
}

struct SweepSpec {
  std::string field;
  double start = 0.0, stop = 0.0;
  std::uint64_t steps = 0;
};

// field=start:stop:steps
SweepSpec parse_sweep(const std::string& s) {
  SweepSpec sw;
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw Exit{kExitConfig, "--sweep expects field=start:stop:steps"};
  sw.field = s.substr(0, eq);
  std::stringstream rest(s.substr(eq + 1));
  std::string a, b, c;
  if (!std::getline(rest, a, ':') || !std::getline(rest, b, ':') || !std::getline(rest, c)) {
    throw Exit{kExitConfig, "--sweep expects field=start:stop:steps"};
  }
  try {
    std::size_t used = 0;
    sw.start = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    sw.stop = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    const long long n = std::stoll(c, &used);
    if (used != c.size() || n < 1) throw std::invalid_argument(c);
    sw.steps = static_cast<std::uint64_t>(n);
  } catch (const std::exception&) {
    throw Exit{kExitConfig, "--sweep: malformed range in '" + s + "'"};
  }
  return sw;
}

int cmd_bound(const std::string& config, const std::string& snapshot, const std::string& data,
              const std::string& sweep, bool table, const std::string& out) {
  const std::string bound = config.empty() ? std::string("{}") : read_file(config);
  if (!sweep.empty()) {
    const SweepSpec sw = parse_sweep(sweep);
    Owned csv;
    check(mm_bound_sweep(bound.c_str(), sw.field.c_str(), sw.start, sw.stop, sw.steps, &csv.p), "bound sweep");
    if (!out.empty()) write_file(out, csv.str());
    std::fputs(csv.str().c_str(), stdout);
    return kExitOk;
  }
  if (snapshot.empty() != data.empty()) throw Exit{kExitConfig, "--snapshot and --data must be given together"};
  const std::string train = data.empty() ? std::string() : read_file(data);
  Owned report, tab;
  check(mm_bound_evaluate(bound.c_str(), snapshot.empty() ? nullptr : snapshot.c_str(),
                          data.empty() ? nullptr : train.c_str(), &report.p, &tab.p),
        "bound");
  if (!out.empty()) write_file(out, report.str() + "\n");
  std::printf("%s\n", table ? tab.str().c_str() : report.str().c_str());
  return kExitOk;
}

int cmd_converge(const std::string& config, const std::string& out) {
  const std::string inst = config.empty() ? std::string("{}") : read_file(config);
  Owned csv, summary;
  check(mm_converge_run(inst.c_str(), &csv.p, &summary.p), "converge");
  const json s = parse_json(summary.str(), "summary");
  if (!out.empty()) {
    make_dirs(out);
    write_file(fs::path(out) / "trace.csv", csv.str());
    write_file(fs::path(out) / "summary.json", summary.str() + "\n");
  } else {
    std::fputs(csv.str().c_str(), stdout);
  }
  std::printf("slope %.6f\n", s["slope"].get<double>());
  return kExitOk;
}

int cmd_preview(const std::string& config, const std::string& out, std::uint64_t count, std::uint64_t k,
                std::optional<std::uint64_t> seed) {
  const std::string text = read_file(config);
  std::uint64_t s = 0;
  if (seed) {
    s = *seed;
  } else {
    Owned resolved;
    check(mm_config_normalize(text.c_str(), &resolved.p), "config");
    s = parse_json(resolved.str(), "config")["augment-seed"].get<std::uint64_t>();
  }
  check(mm_augment_preview(text.c_str(), out.c_str(), count, k, s), "augment-preview");
  std::printf("wrote preview to %s\n", out.c_str());
  return kExitOk;
}

int cmd_selfcheck(bool quick, const std::vector<int>& only) {
  int failures = 0;
  check(mm_selfcheck(only.empty() ? nullptr : only.data(), only.size(), quick ? 1 : 0,
                     [](int id, const char* name, int passed, double seconds, const char* detail, void*) {
                       std::printf("[%s] %2d %-24s %7.2fs  %s\n", passed ? "PASS" : "FAIL", id, name, seconds, detail);
                       std::fflush(stdout);
                     },
                     nullptr, &failures),
        "selfcheck");
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maxmatch: semi-supervised training with worst-case consistency"};
  app.set_version_flag("--version", std::string(mm_version()));
  app.require_subcommand(1);

  TrainOptions topt;
  auto* train = app.add_subcommand("train", "Train a model and write metrics, snapshot and manifest");
  train->add_option("--config", topt.config, "Training config JSON (or a run manifest)")->required();
  train->add_option("--out", topt.out, "Output directory (default $MAXMATCH_OUT_ROOT/<config name>)");
  train->add_option("--seed", topt.seed, "Sets model/data/augment seeds to N, N+1, N+2");
  train->add_option("--folds", topt.folds, "Number of fold runs with shifted seeds");
  train->add_flag("--plot", topt.plot, "Also write metrics.svg");
  train->add_flag("--quiet", topt.quiet, "No per-evaluation progress lines");
  train->add_flag("--parallel", topt.parallel, "Run folds concurrently");

  std::string e_snapshot, e_data, e_split, e_out;
  auto* eval = app.add_subcommand("eval", "Error rates of a snapshot on a dataset");
  eval->add_option("--snapshot", e_snapshot, "Snapshot file")->required();
  eval->add_option("--data", e_data, "Dataset spec or training config JSON")->required();
  eval->add_option("--split", e_split, "test (default), train or labeled");
  eval->add_option("--out", e_out, "Also write the report here");

  std::string b_config, b_snapshot, b_data, b_sweep, b_out;
  bool b_table = false;
  auto* bound = app.add_subcommand("bound", "Evaluate the generalization bound");
  bound->add_option("--config", b_config, "Bound config JSON");
  bound->add_option("--snapshot", b_snapshot, "Measure risks and norms from this snapshot");
  bound->add_option("--data", b_data, "Training config used with --snapshot");
  bound->add_option("--sweep", b_sweep, "field=start:stop:steps, emits CSV");
  bound->add_flag("--table", b_table, "Print the term table instead of JSON");
  bound->add_option("--out", b_out, "Also write the output here");

  std::string c_config, c_out;
  auto* converge = app.add_subcommand("converge", "Run the synthetic minimax convergence experiment");
  converge->add_option("--config", c_config, "Instance JSON");
  converge->add_option("--out", c_out, "Write trace.csv and summary.json here instead of printing the trace");

  std::string p_config, p_out;
  std::uint64_t p_count = 8, p_k = 3;
  std::optional<std::uint64_t> p_seed;
  auto* preview = app.add_subcommand("augment-preview", "Write augmentation previews (PGM/PPM or SVG)");
  preview->add_option("--config", p_config, "Training config JSON")->required();
  preview->add_option("--out", p_out, "Output directory")->required();
  preview->add_option("--count", p_count, "Number of samples");
  preview->add_option("--k", p_k, "Strong views per sample");
  preview->add_option("--seed", p_seed, "Augmentation seed (default: the config's)");

  bool s_quick = false;
  std::vector<int> s_only;
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the acceptance checks");
  selfcheck->add_flag("--quick", s_quick, "Smaller runs, same thresholds");
  selfcheck->add_option("--only", s_only, "Criterion ids")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(topt);
    if (*eval) return cmd_eval(e_snapshot, e_data, e_split, e_out);
    if (*bound) return cmd_bound(b_config, b_snapshot, b_data, b_sweep, b_table, b_out);
    if (*converge) return cmd_converge(c_config, c_out);
    if (*preview) return cmd_preview(p_config, p_out, p_count, p_k, p_seed);
    if (*selfcheck) return cmd_selfcheck(s_quick, s_only);
  } catch (const Exit& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  }
  return kExitFailure;
}
