// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <functional>
#include <string>
#include <vector>

namespace maxmatch {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct CriterionInfo {
  int id;
  const char* name;
  const char* summary;
};

const std::vector<CriterionInfo>& criteria();

/// Runs one criterion. `quick` shrinks sample counts and run lengths for
/// smoke testing; the pass thresholds stay the same. Exceptions inside a
/// criterion are reported as failures.
CriterionResult run_criterion(int id, bool quick);

std::string format_result(const CriterionResult& r);

}  // namespace maxmatch
