// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

// Runs every acceptance criterion at full size and prints one line per
// criterion. Usage: maxmatch_acceptance [--quick] [ID ...]

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "selfcheck/criteria.hpp"

int main(int argc, char** argv) {
  bool quick = false;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--quick") {
      quick = true;
    } else {
      ids.push_back(std::atoi(arg.c_str()));
    }
  }
  if (ids.empty()) {
    for (const auto& c : maxmatch::criteria()) ids.push_back(c.id);
  }
  int failed = 0;
  for (int id : ids) {
    const auto r = maxmatch::run_criterion(id, quick);
    std::printf("%s\n", maxmatch::format_result(r).c_str());
    std::fflush(stdout);
    if (!r.passed) ++failed;
  }
  std::printf("%zu criteria, %d failed\n", ids.size(), failed);
  return failed == 0 ? 0 : 1;
}
