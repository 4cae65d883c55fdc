// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autodiff/tensor.hpp"

namespace maxmatch {

/// Features are n x prod(sample_shape); images use planar (C, H, W) order.
struct Dataset {
  std::string name;
  Tensor features;
  Shape sample_shape;
  std::vector<std::size_t> labels;
  std::size_t n_classes = 0;

  std::size_t size() const { return labels.size(); }
  bool is_image() const { return sample_shape.size() == 3; }
  /// Throws ConfigError on label/feature count mismatch or out-of-range labels.
  void validate() const;
  Tensor gather(std::span<const std::size_t> idx) const { return features.gather_rows(idx); }
  std::vector<std::size_t> gather_labels(std::span<const std::size_t> idx) const;
};

/// Two interleaved half circles: class 0 on (cos t, sin t), class 1 on
/// (1 - cos t, 0.5 - sin t), t ~ U[0, pi], plus isotropic Gaussian noise.
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);

/// IDX (big-endian) images 0x00000803 and labels 0x00000801; pixels scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
Dataset parse_idx(const std::string& image_bytes, const std::string& label_bytes);
/// Encodes n x rows x cols bytes and their labels in IDX format.
std::string encode_idx_images(std::span<const std::uint8_t> pixels, std::size_t n, std::size_t rows, std::size_t cols);
std::string encode_idx_labels(std::span<const std::uint8_t> labels);

enum class UnlabeledMode {
  kAll,       // every training sample, labels dropped
  kDisjoint,  // training samples not chosen as labeled
};

struct SslSplit {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::uint64_t fold_id = 0;
  std::uint64_t seed = 0;
};

/// Picks exactly `labels_per_class` samples per class, deterministic in `fold_seed`.
SslSplit split_ssl(const Dataset& ds, std::size_t labels_per_class, std::uint64_t fold_seed,
                   UnlabeledMode mode = UnlabeledMode::kAll, std::uint64_t fold_id = 0);

struct Batch {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  /// Pass over the unlabeled pool in which each unlabeled index was drawn.
  std::vector<std::uint64_t> unlabeled_epoch;
  std::uint64_t labeled_epoch = 0;
};

/// Endless stream of (B_l labeled, B_u unlabeled) index batches. Each pool is
/// walked through a fresh seeded permutation per epoch, so within an epoch
/// every index appears exactly once. Position is fully described by the two
/// (epoch, offset) pairs.
class BatchIterator {
 public:
  struct Position {
    std::uint64_t labeled_epoch = 0;
    std::size_t labeled_offset = 0;
    std::uint64_t unlabeled_epoch = 0;
    std::size_t unlabeled_offset = 0;
  };

  BatchIterator(const SslSplit& split, std::size_t labeled_batch, std::size_t unlabeled_batch, std::uint64_t seed,
                bool require_unlabeled);

  Batch next();
  Position position() const { return pos_; }
  void seek(const Position& pos);

 private:
  std::vector<std::size_t> permutation(const std::vector<std::size_t>& pool, std::uint64_t stream,
                                       std::uint64_t epoch) const;

  std::vector<std::size_t> labeled_;
  std::vector<std::size_t> unlabeled_;
  std::size_t labeled_batch_;
  std::size_t unlabeled_batch_;
  std::uint64_t seed_;
  Position pos_;
  std::vector<std::size_t> labeled_perm_;
  std::vector<std::size_t> unlabeled_perm_;
};

/// Dataset manifest (JSON, kebab-case keys).
struct DataConfig {
  std::string kind = "two-moons";  // "two-moons" | "idx"
  std::size_t n = 500;
  double noise = 0.1;
  std::size_t n_test = 2000;
  std::uint64_t seed = 7;
  std::string train_images, train_labels, test_images, test_labels;
  std::size_t limit = 0;  // idx: keep the first `limit` samples (0 = all)
  std::size_t labels_per_class = 4;
  std::uint64_t fold_seed = 1;
  UnlabeledMode unlabeled_mode = UnlabeledMode::kAll;
};

nlohmann::json to_json(const DataConfig& c);
DataConfig data_config_from_json(const nlohmann::json& j);

struct LoadedData {
  Dataset train;
  Dataset test;
};

/// Two-moons test set is an independent draw from seed + 1.
LoadedData load_data(const DataConfig& c);

}  // namespace maxmatch
