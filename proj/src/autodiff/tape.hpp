// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "autodiff/kernels.hpp"
#include "autodiff/tensor.hpp"

namespace maxmatch {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  /// Accumulated gradient; zeros when backward never reached this node.
  const Tensor& grad() const;
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// list is already a topological order and backward is a reverse sweep.
/// Rebuilt for every training step.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable input; its gradient accumulates across backward calls.
  Var leaf(Tensor value);
  /// Detached input; never receives gradient.
  Var constant(Tensor value);

  /// Records an op result. `parents` must already be on this tape.
  Var record(Tensor value, std::vector<std::size_t> parents, Backprop backprop);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every leaf. Loss must hold a
  /// single element. Intermediate gradients are reset on each call; leaf
  /// gradients accumulate.
  void backward(Var loss);
  void zero_leaf_grads();

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into node `id`'s gradient buffer (no-op for detached nodes).
  void accumulate(std::size_t id, const Tensor& g);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool leaf = false;
    std::vector<std::size_t> parents;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
};

/// Differentiable ops. Operands must share a tape.
namespace ops {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_bias(Var x, Var bias);
Var relu(Var x);
Var softmax(Var logits);
Var conv2d(Var x, Var kernel, Var bias, const ConvGeometry& g);
Var reshape(Var x, Shape shape);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var mean(Var x);
Var log(Var x);
Var clamp(Var x, double lo, double hi);
/// Per-row hard-label cross-entropy on logits. Throws NumericError on non-finite logits.
Var cross_entropy_rows(Var logits, std::span<const std::size_t> labels);
/// Per-row -sum_i t_i log s_i. `probs` must be strictly positive; targets carry no gradient.
Var soft_cross_entropy_rows(Var probs, const Tensor& targets);
/// sum_i w_i v_i as a one-element tensor.
Var weighted_sum(Var v, const Tensor& weights);

}  // namespace ops
}  // namespace maxmatch
