// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "model/network.hpp"

namespace maxmatch {

/// On-disk snapshot:
///   8 bytes   magic "MMSNAP01"
///   8 bytes   header length, unsigned little-endian
///   N bytes   JSON header {format, version, architecture, groups, tensors, meta}
///   payload   little-endian IEEE-754 doubles, group by group, tensor by tensor
/// A file holds one or more named parameter groups sharing one architecture
/// (e.g. "params" and "ema").
struct SnapshotFile {
  Architecture architecture;
  std::vector<std::pair<std::string, std::vector<Tensor>>> groups;
  nlohmann::json meta = nlohmann::json::object();

  /// Throws ConfigError when the group is absent.
  ParamSnapshot group(const std::string& name) const;
  bool has_group(const std::string& name) const;
  void add_group(const std::string& name, const ParamSnapshot& snap);
};

std::string encode_snapshot(const SnapshotFile& file);
/// Throws FormatError on bad magic, truncated payload or malformed header.
SnapshotFile decode_snapshot(const std::string& bytes);

void save_snapshot(const std::filesystem::path& path, const SnapshotFile& file);
SnapshotFile load_snapshot(const std::filesystem::path& path);

}  // namespace maxmatch
