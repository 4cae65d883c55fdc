// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "autodiff/tape.hpp"

#include <cmath>

#include "common/error.hpp"

namespace maxmatch {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value) {
  Node n;
  n.grad = Tensor(value.shape());
  n.value = std::move(value);
  n.requires_grad = true;
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, Backprop backprop) {
  Node n;
  for (std::size_t p : parents) n.requires_grad = n.requires_grad || nodes_.at(p).requires_grad;
  n.value = std::move(value);
  if (n.requires_grad) {
    n.parents = std::move(parents);
    n.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.shape() != n.value.shape()) {
    static thread_local Tensor zeros;
    zeros = Tensor(n.value.shape());
    return zeros;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ConfigError("backward: loss belongs to another tape");
  const Node& ln = nodes_.at(loss.id());
  if (ln.value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(ln.value.shape()));
  }
  for (Node& n : nodes_) {
    if (!n.leaf) n.grad = Tensor();
  }
  if (!ln.requires_grad) return;
  accumulate(loss.id(), Tensor(ln.value.shape(), 1.0));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.leaf || !n.requires_grad || !n.backprop) continue;
    if (n.grad.shape() != n.value.shape()) continue;  // unreachable from loss
    n.backprop(*this, i);
  }
}

void Tape::zero_leaf_grads() {
  for (Node& n : nodes_) {
    if (n.leaf) n.grad.fill(0.0);
  }
}

namespace ops {

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw ConfigError("ops: operands on different tapes");
  return *a.tape();
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite value at loss evaluation");
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Tensor out = kernels::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.upstream(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, kernels::matmul_nt(g, tp.value(ib)));
    if (tp.requires_grad(ib)) tp.accumulate(ib, kernels::matmul_tn(tp.value(ia), g));
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.upstream(self);
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

Var add_bias(Var x, Var bias) {
  Tape& t = same_tape(x, bias);
  Tensor out = kernels::add_bias(x.value(), bias.value());
  const std::size_t ix = x.id(), ibias = bias.id();
  return t.record(std::move(out), {ix, ibias}, [ix, ibias](Tape& tp, std::size_t self) {
    const Tensor& g = tp.upstream(self);
    tp.accumulate(ix, g);
    if (tp.requires_grad(ibias)) {
      Tensor gb(tp.value(ibias).shape());
      const std::size_t c = g.cols();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
      }
      tp.accumulate(ibias, gb);
    }
  });
}

Var relu(Var x) {
  Tape& t = *x.tape();
  const std::size_t ix = x.id();
  return t.record(kernels::relu(x.value()), {ix}, [ix](Tape& tp, std::size_t self) {
    Tensor g = tp.upstream(self);
    const Tensor& xv = tp.value(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(xv[i] > 0.0)) g[i] = 0.0;
    }
    tp.accumulate(ix, g);
  });
}

Var softmax(Var logits) {
  Tape& t = *logits.tape();
  const std::size_t ix = logits.id();
  return t.record(kernels::softmax(logits.value()), {ix}, [ix](Tape& tp, std::size_t self) {
    const Tensor& g = tp.upstream(self);
    const Tensor& s = tp.value(self);
    Tensor gx(s.shape());
    const std::size_t c = s.cols();
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * s[r * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[r * c + j] = s[r * c + j] * (g[r * c + j] - dot);
    }
    tp.accumulate(ix, gx);
  });
}

Var conv2d(Var x, Var kernel, Var bias, const ConvGeometry& g) {
  Tape& t = same_tape(x, kernel);
  same_tape(x, bias);
  Tensor out = kernels::conv2d(x.value(), kernel.value(), bias.value(), g);
  const std::size_t ix = x.id(), ik = kernel.id(), ib = bias.id();
  return t.record(std::move(out), {ix, ik, ib}, [ix, ik, ib, g](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.upstream(self);
    if (tp.requires_grad(ix)) tp.accumulate(ix, kernels::conv2d_backward_input(gy, tp.value(ik), g));
    if (tp.requires_grad(ik)) tp.accumulate(ik, kernels::conv2d_backward_kernel(gy, tp.value(ix), g));
    if (tp.requires_grad(ib)) {
      Tensor gb(tp.value(ib).shape());
      const std::size_t plane = g.out_height() * g.out_width();
      for (std::size_t s = 0; s < gy.rows(); ++s) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          double acc = 0.0;
          for (std::size_t p = 0; p < plane; ++p) acc += gy[s * g.out_size() + co * plane + p];
          gb[co] += acc;
        }
      }
      tp.accumulate(ib, gb);
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tape& t = *x.tape();
  const std::size_t ix = x.id();
  return t.record(x.value().reshaped(std::move(shape)), {ix}, [ix](Tape& tp, std::size_t self) {
    tp.accumulate(ix, tp.upstream(self).reshaped(tp.value(ix).shape()));
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.upstream(self);
    Tensor ga = g, gb = g;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] *= tp.value(ib)[i];
      gb[i] *= tp.value(ia)[i];
    }
    tp.accumulate(ia, ga);
    tp.accumulate(ib, gb);
  });
}

Var scale(Var x, double factor) {
  Tape& t = *x.tape();
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  const std::size_t ix = x.id();
  return t.record(std::move(out), {ix}, [ix, factor](Tape& tp, std::size_t self) {
    Tensor g = tp.upstream(self);
    for (double& v : g.data()) v *= factor;
    tp.accumulate(ix, g);
  });
}

Var sum(Var x) {
  Tape& t = *x.tape();
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t ix = x.id();
  return t.record(Tensor::scalar(s), {ix}, [ix](Tape& tp, std::size_t self) {
    tp.accumulate(ix, Tensor(tp.value(ix).shape(), tp.upstream(self)[0]));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / n);
}

Var log(Var x) {
  Tape& t = *x.tape();
  Tensor out = x.value();
  for (double& v : out.data()) v = std::log(v);
  const std::size_t ix = x.id();
  return t.record(std::move(out), {ix}, [ix](Tape& tp, std::size_t self) {
    Tensor g = tp.upstream(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] /= tp.value(ix)[i];
    tp.accumulate(ix, g);
  });
}

Var clamp(Var x, double lo, double hi) {
  Tape& t = *x.tape();
  Tensor out = x.value();
  for (double& v : out.data()) v = std::min(std::max(v, lo), hi);
  const std::size_t ix = x.id();
  return t.record(std::move(out), {ix}, [ix, lo, hi](Tape& tp, std::size_t self) {
    Tensor g = tp.upstream(self);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = tp.value(ix)[i];
      if (v < lo || v > hi) g[i] = 0.0;
    }
    tp.accumulate(ix, g);
  });
}

Var cross_entropy_rows(Var logits, std::span<const std::size_t> labels) {
  Tape& t = *logits.tape();
  require_finite(logits.value(), "cross_entropy");
  Tensor out = kernels::cross_entropy_rows(logits.value(), labels);
  const std::size_t ix = logits.id();
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return t.record(std::move(out), {ix}, [ix, lab = std::move(lab)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.upstream(self);
    Tensor gx = kernels::softmax(tp.value(ix));
    const std::size_t c = gx.cols();
    for (std::size_t r = 0; r < gx.rows(); ++r) {
      gx[r * c + lab[r]] -= 1.0;
      for (std::size_t j = 0; j < c; ++j) gx[r * c + j] *= g[r];
    }
    tp.accumulate(ix, gx);
  });
}

Var soft_cross_entropy_rows(Var probs, const Tensor& targets) {
  Tape& t = *probs.tape();
  require_same_shape(probs.value(), targets, "soft_cross_entropy");
  require_finite(probs.value(), "soft_cross_entropy");
  const Tensor& s = probs.value();
  const std::size_t c = s.cols();
  Tensor out({s.rows()});
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc -= targets[r * c + j] * std::log(s[r * c + j]);
    out[r] = acc;
  }
  const std::size_t ix = probs.id();
  return t.record(std::move(out), {ix}, [ix, targets](Tape& tp, std::size_t self) {
    const Tensor& g = tp.upstream(self);
    const Tensor& sv = tp.value(ix);
    Tensor gx(sv.shape());
    const std::size_t cc = sv.cols();
    for (std::size_t r = 0; r < sv.rows(); ++r) {
      for (std::size_t j = 0; j < cc; ++j) gx[r * cc + j] = -g[r] * targets[r * cc + j] / sv[r * cc + j];
    }
    tp.accumulate(ix, gx);
  });
}

Var weighted_sum(Var v, const Tensor& weights) {
  Tape& t = *v.tape();
  if (weights.size() != v.value().size()) {
    throw ShapeError("weighted_sum: shape mismatch " + shape_str(v.value().shape()) + " vs " +
                     shape_str(weights.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) s += weights[i] * v.value()[i];
  }
  const std::size_t ix = v.id();
  return t.record(Tensor::scalar(s), {ix}, [ix, weights](Tape& tp, std::size_t self) {
    Tensor g = weights.reshaped(tp.value(ix).shape());
    const double up = tp.upstream(self)[0];
    for (double& x : g.data()) x *= up;
    tp.accumulate(ix, g);
  });
}

}  // namespace ops
}  // namespace maxmatch
