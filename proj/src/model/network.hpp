// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autodiff/tape.hpp"
#include "autodiff/tensor.hpp"

namespace maxmatch {

enum class LayerKind { kConv, kDense };

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::size_t units = 0;    // dense: output width; conv: filter count
  std::size_t kernel = 3;   // conv only
  std::size_t padding = 1;  // conv only
};

/// Convolutional layers (if any) followed by fully-connected layers. ReLU
/// between layers, none after the last. Samples are flattened planar (C,H,W)
/// or plain feature vectors.
struct Architecture {
  Shape input;  // {d} or {C, H, W}
  std::vector<LayerSpec> layers;

  static Architecture mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t n_classes);
  /// conv(8 filters, 3x3, pad 1) -> dense(64) -> dense(n_classes).
  static Architecture small_cnn(std::size_t channels, std::size_t height, std::size_t width,
                                std::size_t n_classes);

  std::size_t input_size() const { return shape_size(input); }
  std::size_t n_classes() const;
  /// Per-layer convolution geometry; throws for dense layers.
  ConvGeometry conv_geometry(std::size_t layer) const;
  /// Flattened width feeding layer `layer`.
  std::size_t fan_in(std::size_t layer) const;
  std::vector<Shape> parameter_shapes() const;
  std::vector<std::string> parameter_names() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&);
};

bool operator==(const LayerSpec& a, const LayerSpec& b);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

/// Flat copy of all parameters with the layer structure preserved.
/// Order: for each layer, weight (dense: in x out; conv: Cout x Cin x k x k) then bias.
struct ParamSnapshot {
  Architecture architecture;
  std::vector<Tensor> tensors;

  std::size_t layer_count() const { return architecture.layers.size(); }
  const Tensor& weight(std::size_t layer) const { return tensors.at(2 * layer); }
  const Tensor& bias(std::size_t layer) const { return tensors.at(2 * layer + 1); }
  bool all_finite() const;
};

class Network {
 public:
  /// He-normal weights from `seed`, zero biases.
  Network(Architecture arch, std::uint64_t seed);
  explicit Network(ParamSnapshot params);
  static Network zeros(Architecture arch);

  const Architecture& architecture() const { return params_.architecture; }
  std::vector<Tensor>& tensors() { return params_.tensors; }
  const std::vector<Tensor>& tensors() const { return params_.tensors; }
  const ParamSnapshot& snapshot() const { return params_; }
  /// Throws ShapeError on architecture mismatch.
  void restore(const ParamSnapshot& snap);

  /// Untaped forward: N x input_size -> N x n_classes scores.
  Tensor forward(const Tensor& x) const;
  /// Taped forward using `params` (leaves or constants mirroring tensors()).
  Var forward(Tape& tape, Var x, std::span<const Var> params) const;

  std::size_t n_classes() const { return architecture().n_classes(); }
  /// W: total parameter count including biases.
  std::size_t parameter_count() const;
  /// W_g: count when the last layer is replaced by a single output.
  std::size_t single_output_parameter_count() const;

 private:
  ParamSnapshot params_;
};

/// Row-wise argmax with the smallest index winning ties.
std::vector<std::size_t> argmax_rows(const Tensor& scores);

}  // namespace maxmatch
