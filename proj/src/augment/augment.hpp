// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autodiff/tensor.hpp"
#include "common/rng.hpp"

namespace maxmatch {

enum class OpKind {
  // image pool
  kIdentity,
  kInvert,
  kSolarize,
  kBrightness,
  kContrast,
  kRotate,
  kTranslate,
  kShear,
  kPosterize,
  // vector pool
  kRotate2d,
  kScale,
  kJitter,
};

std::string op_name(OpKind kind);
OpKind op_from_name(const std::string& name);

/// One atomic class-invariant transform; magnitude in [0, 1] is mapped to the
/// kind's range.
struct TransformOp {
  OpKind kind = OpKind::kIdentity;
  double magnitude = 0.0;
};

struct AugmentConfig {
  // weak view
  double flip_probability = 0.5;
  std::size_t crop_padding = 4;
  double weak_noise = 0.05;  // vectors: additive Gaussian sigma

  // strong view (RandAugment-style)
  std::size_t n_ops = 2;
  std::vector<OpKind> image_pool = {OpKind::kIdentity, OpKind::kInvert,    OpKind::kSolarize,
                                    OpKind::kBrightness, OpKind::kContrast, OpKind::kRotate,
                                    OpKind::kTranslate,  OpKind::kShear,    OpKind::kPosterize};
  std::vector<OpKind> vector_pool = {OpKind::kRotate2d, OpKind::kScale, OpKind::kJitter};

  double rotate_degrees = 30.0;   // images and 2-D vectors: +-range
  double translate_fraction = 0.25;
  double shear = 0.3;
  double scale_low = 0.8;
  double scale_high = 1.2;
  double jitter_max = 0.15;
  /// Center for vector rotation/scaling; empty means the origin.
  std::vector<double> vector_pivot;

  void validate() const;
};

nlohmann::json to_json(const AugmentConfig& c);
AugmentConfig augment_config_from_json(const nlohmann::json& j);

/// Applies a single op. `rng` supplies op-specific extra draws (translate
/// axis, jitter noise). Pixel results are clamped to [0, 1].
std::vector<double> apply_op(const TransformOp& op, std::span<const double> x, const Shape& sample_shape,
                             const AugmentConfig& cfg, Rng& rng);

/// Images: horizontal flip with probability p then random crop from a
/// zero-padded copy. Vectors: additive Gaussian noise.
std::vector<double> weak_augment(std::span<const double> x, const Shape& sample_shape, std::uint64_t seed,
                                 const AugmentConfig& cfg);

/// Samples cfg.n_ops ops uniformly (with replacement) from the pool, each with
/// a uniform magnitude, and applies them in sequence.
std::vector<double> strong_augment(std::span<const double> x, const Shape& sample_shape, std::uint64_t seed,
                                   const AugmentConfig& cfg);

/// Semantic uncertainty set B_sem(x): K strong views of one sample.
struct UncertaintySet {
  std::size_t sample_id = 0;
  Tensor variants;  // K x d
  std::vector<std::uint64_t> variant_seeds;

  std::size_t size() const { return variant_seeds.size(); }
};

/// Seed of variant j; independent of K, so variant 0 is shared by every K.
std::uint64_t variant_seed(std::uint64_t base_seed, std::size_t sample_id, std::uint64_t epoch, std::size_t j);
/// Seed of the weak view of one sample in one epoch.
std::uint64_t weak_seed(std::uint64_t base_seed, std::size_t sample_id, std::uint64_t epoch);

UncertaintySet build_uncertainty_set(std::span<const double> x, const Shape& sample_shape, std::size_t k,
                                     std::uint64_t base_seed, std::size_t sample_id, std::uint64_t epoch,
                                     const AugmentConfig& cfg);

}  // namespace maxmatch
