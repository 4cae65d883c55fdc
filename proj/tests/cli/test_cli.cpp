// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

// Runs the maxmatch binary and checks artifacts and exit codes.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "maxmatch_cli_test";

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" MAXMATCH_CLI "\" " + args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
}

std::string path(const std::string& name) { return (kWork / name).string(); }

struct Fixture {
  Fixture() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    spit(kWork / "cfg.json", R"({"steps": 40, "eval-every": 20, "hidden": [8], "labeled-batch": 4,
                                "unlabeled-batch": 8, "data": {"n": 100, "n-test": 100}})");
  }
};

// Last row of a metrics CSV as column name -> value.
json last_row(const fs::path& csv) {
  std::istringstream is(slurp(csv));
  std::string header, line, last;
  std::getline(is, header);
  while (std::getline(is, line)) {
    if (!line.empty()) last = line;
  }
  std::vector<std::string> names, values;
  std::stringstream hs(header), vs(last);
  std::string cell;
  while (std::getline(hs, cell, ',')) names.push_back(cell);
  while (std::getline(vs, cell, ',')) values.push_back(cell);
  json out;
  for (std::size_t i = 0; i < names.size() && i < values.size(); ++i) out[names[i]] = std::stod(values[i]);
  return out;
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "train writes metrics, snapshot and manifest, and the manifest reproduces the run") {
  REQUIRE(run("train --config " + path("cfg.json") + " --out " + path("runs/a") + " --quiet --plot") == 0);
  for (const char* f : {"metrics.csv", "snapshot.mmsnap", "manifest.json", "metrics.svg"}) {
    CHECK(fs::exists(kWork / "runs/a" / f));
  }
  const json m = json::parse(slurp(kWork / "runs/a/manifest.json"));
  CHECK(m["subcommand"] == "train");
  CHECK(m["status"] == "ok");
  CHECK(m["config"]["steps"] == 40);
  CHECK(m["config"]["beta"] == 0.95);
  CHECK(m["seeds"]["model"] == 1);
  CHECK(m.contains("started"));
  CHECK(m.contains("finished"));
  CHECK(m.contains("version"));

  REQUIRE(run("train --config " + path("runs/a/manifest.json") + " --out " + path("runs/b") + " --quiet") == 0);
  CHECK(slurp(kWork / "runs/a/metrics.csv") == slurp(kWork / "runs/b/metrics.csv"));
}

TEST_CASE_FIXTURE(Fixture, "seed flag and default output root") {
  REQUIRE(run("train --config " + path("cfg.json") + " --seed 10 --quiet", "MAXMATCH_OUT_ROOT=" + path("root")) == 0);
  const json m = json::parse(slurp(kWork / "root/cfg/manifest.json"));
  CHECK(m["seeds"]["model"] == 10);
  CHECK(m["seeds"]["data"] == 11);
  CHECK(m["seeds"]["augment"] == 12);
}

TEST_CASE_FIXTURE(Fixture, "fold summary matches the aggregation of the fold CSVs") {
  REQUIRE(run("train --config " + path("cfg.json") + " --out " + path("folds") + " --folds 5 --quiet") == 0);
  const json s = json::parse(slurp(kWork / "folds/summary.json"));
  std::vector<double> test, ema;
  for (int f = 0; f < 5; ++f) {
    const json row = last_row(kWork / "folds" / ("fold-" + std::to_string(f)) / "metrics.csv");
    test.push_back(row["test_err"]);
    ema.push_back(row["ema_test_err"]);
  }
  auto mean = [](const std::vector<double>& v) {
    double a = 0.0;
    for (double x : v) a += x;
    return a / static_cast<double>(v.size());
  };
  auto sd = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double a = 0.0;
    for (double x : v) a += (x - m) * (x - m);
    return std::sqrt(a / static_cast<double>(v.size() - 1));
  };
  CHECK(s["test-err"]["mean"].get<double>() == doctest::Approx(mean(test)).epsilon(1e-9));
  CHECK(s["test-err"]["stddev"].get<double>() == doctest::Approx(sd(test)).epsilon(1e-9));
  CHECK(s["ema-test-err"]["mean"].get<double>() == doctest::Approx(mean(ema)).epsilon(1e-9));
  CHECK(s["ema-test-err"]["stddev"].get<double>() == doctest::Approx(sd(ema)).epsilon(1e-9));
  // Folds draw different labeled sets.
  const json f0 = json::parse(slurp(kWork / "folds/fold-0/manifest.json"));
  const json f1 = json::parse(slurp(kWork / "folds/fold-1/manifest.json"));
  CHECK(f0["config"]["data"]["fold-seed"] != f1["config"]["data"]["fold-seed"]);
  CHECK(slurp(kWork / "stdout.txt").find("±") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "eval and bound print JSON") {
  REQUIRE(run("train --config " + path("cfg.json") + " --out " + path("e") + " --quiet") == 0);
  REQUIRE(run("eval --snapshot " + path("e/snapshot.mmsnap") + " --data " + path("cfg.json")) == 0);
  const json r = json::parse(slurp(kWork / "stdout.txt"));
  CHECK(r.contains("error"));
  CHECK(r.contains("ema-error"));
  CHECK(r.contains("per-class"));

  spit(kWork / "bound.json", "{}");
  REQUIRE(run("bound --config " + path("bound.json")) == 0);
  CHECK(json::parse(slurp(kWork / "stdout.txt"))["report"].contains("total"));
  REQUIRE(run("bound --sweep k=1:5:5") == 0);
  CHECK(slurp(kWork / "stdout.txt").rfind("k,c1,", 0) == 0);
  REQUIRE(run("converge --config " + path("bound.json")) == 0);
  CHECK(slurp(kWork / "stdout.txt").find("slope") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "exit codes for each failure class") {
  CHECK(run("train --config " + path("cfg.json") + " --no-such-flag") == 2);
  CHECK(slurp(kWork / "stderr.txt").find("Usage") != std::string::npos);
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("train --config " + path("missing.json")) == 4);

  spit(kWork / "bad.json", R"({"beta": 0})");
  CHECK(run("train --config " + path("bad.json") + " --out " + path("bad")) == 2);
  spit(kWork / "broken.json", "{\"steps\": ");
  CHECK(run("train --config " + path("broken.json") + " --out " + path("broken")) == 2);

  spit(kWork / "nan.json", R"({"lr": 1e200, "steps": 20, "hidden": [8], "data": {"n": 100, "n-test": 100}})");
  CHECK(run("train --config " + path("nan.json") + " --out " + path("nan") + " --quiet") == 3);
  CHECK(fs::exists(kWork / "nan/diagnostic.mmsnap"));
  CHECK(json::parse(slurp(kWork / "nan/manifest.json"))["status"] == "failed");

  REQUIRE(run("train --config " + path("cfg.json") + " --out " + path("ok") + " --quiet") == 0);
  const std::string snap = slurp(kWork / "ok/snapshot.mmsnap");
  spit(kWork / "trunc.mmsnap", snap.substr(0, snap.size() - 100));
  CHECK(run("eval --snapshot " + path("trunc.mmsnap") + " --data " + path("cfg.json")) == 4);

  // A two-feature snapshot against 2x2 IDX images.
  std::string img("\x00\x00\x08\x03\x00\x00\x00\x02\x00\x00\x00\x02\x00\x00\x00\x02", 16);
  img += std::string(8, '\x10');
  std::string lab("\x00\x00\x08\x01\x00\x00\x00\x02\x00\x01", 10);
  spit(kWork / "img", img);
  spit(kWork / "lab", lab);
  const json idx = {{"kind", "idx"},
                    {"train-images", path("img")},
                    {"train-labels", path("lab")},
                    {"test-images", path("img")},
                    {"test-labels", path("lab")}};
  spit(kWork / "idx.json", json{{"data", idx}}.dump());
  CHECK(run("eval --snapshot " + path("ok/snapshot.mmsnap") + " --data " + path("idx.json")) == 2);

  spit(kWork / "nl.json", R"({"n-l": 2})");
  CHECK(run("bound --config " + path("nl.json")) == 2);
  CHECK(run("bound --sweep k=1:x:3") == 2);
  CHECK(run("selfcheck --only 99") == 2);
}

TEST_CASE_FIXTURE(Fixture, "selfcheck runs headlessly") {
  CHECK(run("selfcheck --quick --only 1,8,10") == 0);
  const std::string out = slurp(kWork / "stdout.txt");
  CHECK(out.find("[PASS]  1") != std::string::npos);
  CHECK(out.find("[PASS]  8") != std::string::npos);
  CHECK(out.find("0 failure(s)") != std::string::npos);
}
