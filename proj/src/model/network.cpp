// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "model/network.hpp"

#include <cmath>

#include "autodiff/kernels.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

namespace maxmatch {

bool operator==(const LayerSpec& a, const LayerSpec& b) {
  if (a.kind != b.kind || a.units != b.units) return false;
  return a.kind == LayerKind::kDense || (a.kernel == b.kernel && a.padding == b.padding);
}

bool operator==(const Architecture& a, const Architecture& b) {
  return a.input == b.input && a.layers == b.layers;
}

Architecture Architecture::mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t n_classes) {
  Architecture a;
  a.input = {in};
  for (std::size_t h : hidden) a.layers.push_back({LayerKind::kDense, h, 0, 0});
  a.layers.push_back({LayerKind::kDense, n_classes, 0, 0});
  return a;
}

Architecture Architecture::small_cnn(std::size_t channels, std::size_t height, std::size_t width,
                                     std::size_t n_classes) {
  Architecture a;
  a.input = {channels, height, width};
  a.layers.push_back({LayerKind::kConv, 8, 3, 1});
  a.layers.push_back({LayerKind::kDense, 64, 0, 0});
  a.layers.push_back({LayerKind::kDense, n_classes, 0, 0});
  return a;
}

std::size_t Architecture::n_classes() const {
  if (layers.empty() || layers.back().kind != LayerKind::kDense) {
    throw ConfigError("architecture must end with a dense layer");
  }
  return layers.back().units;
}

ConvGeometry Architecture::conv_geometry(std::size_t layer) const {
  if (layers.at(layer).kind != LayerKind::kConv) throw ConfigError("layer is not convolutional");
  if (input.size() != 3) throw ConfigError("convolution needs a (C, H, W) input");
  ConvGeometry g;
  g.in_channels = input[0];
  g.height = input[1];
  g.width = input[2];
  for (std::size_t i = 0; i <= layer; ++i) {
    const LayerSpec& l = layers[i];
    g.out_channels = l.units;
    g.kernel = l.kernel;
    g.padding = l.padding;
    if (i == layer) break;
    g.height = g.out_height();
    g.width = g.out_width();
    g.in_channels = l.units;
  }
  return g;
}

std::size_t Architecture::fan_in(std::size_t layer) const {
  if (layer == 0) return input_size();
  const LayerSpec& prev = layers.at(layer - 1);
  if (prev.kind == LayerKind::kConv) return conv_geometry(layer - 1).out_size();
  return prev.units;
}

std::vector<Shape> Architecture::parameter_shapes() const {
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::kConv) {
      shapes.push_back(conv_geometry(i).kernel_shape());
    } else {
      shapes.push_back({fan_in(i), layers[i].units});
    }
    shapes.push_back({layers[i].units});
  }
  return shapes;
}

std::vector<std::string> Architecture::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool conv = layers[i].kind == LayerKind::kConv;
    const std::string base = (conv ? "conv" : "fc") + std::to_string(i);
    names.push_back(base + (conv ? ".kernel" : ".weight"));
    names.push_back(base + ".bias");
  }
  return names;
}

void Architecture::validate() const {
  if (input.empty() || input_size() == 0) throw ConfigError("architecture: empty input shape");
  if (input.size() != 1 && input.size() != 3) throw ConfigError("architecture: input must be {d} or {C,H,W}");
  if (layers.empty()) throw ConfigError("architecture: no layers");
  bool seen_dense = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.units == 0) throw ConfigError("architecture: layer " + std::to_string(i) + " has zero units");
    if (l.kind == LayerKind::kConv) {
      if (seen_dense) throw ConfigError("architecture: convolution after a dense layer");
      conv_geometry(i).validate();
    } else {
      seen_dense = true;
    }
  }
  n_classes();
}

nlohmann::json to_json(const Architecture& arch) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : arch.layers) {
    if (l.kind == LayerKind::kConv) {
      layers.push_back({{"type", "conv"}, {"filters", l.units}, {"kernel", l.kernel}, {"padding", l.padding}});
    } else {
      layers.push_back({{"type", "dense"}, {"units", l.units}});
    }
  }
  return {{"input", arch.input}, {"layers", layers}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  try {
    Architecture a;
    a.input = j.at("input").get<Shape>();
    for (const auto& l : j.at("layers")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "conv") {
        a.layers.push_back({LayerKind::kConv, l.at("filters").get<std::size_t>(), l.value("kernel", std::size_t{3}),
                            l.value("padding", std::size_t{1})});
      } else if (type == "dense") {
        a.layers.push_back({LayerKind::kDense, l.at("units").get<std::size_t>(), 0, 0});
      } else {
        throw ConfigError("architecture: unknown layer type '" + type + "'");
      }
    }
    a.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture: ") + e.what());
  }
}

bool ParamSnapshot::all_finite() const {
  for (const Tensor& t : tensors) {
    if (!t.all_finite()) return false;
  }
  return true;
}

Network::Network(Architecture arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  const auto shapes = arch.parameter_shapes();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor t(shapes[i]);
    if (i % 2 == 0) {
      const std::size_t layer = i / 2;
      const double fan = arch.layers[layer].kind == LayerKind::kConv
                             ? static_cast<double>(shapes[i][1] * shapes[i][2] * shapes[i][3])
                             : static_cast<double>(shapes[i][0]);
      const double stddev = std::sqrt(2.0 / fan);
      for (double& v : t.data()) v = rng.normal(0.0, stddev);
    }
    params_.tensors.push_back(std::move(t));
  }
  params_.architecture = std::move(arch);
}

Network::Network(ParamSnapshot params) : params_(std::move(params)) {
  params_.architecture.validate();
  const auto shapes = params_.architecture.parameter_shapes();
  if (shapes.size() != params_.tensors.size()) throw ShapeError("snapshot: parameter count mismatch");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i] != params_.tensors[i].shape()) {
      throw ShapeError("snapshot: parameter " + std::to_string(i) + " has shape " +
                       shape_str(params_.tensors[i].shape()) + ", architecture expects " + shape_str(shapes[i]));
    }
  }
}

Network Network::zeros(Architecture arch) {
  arch.validate();
  ParamSnapshot p;
  for (const Shape& s : arch.parameter_shapes()) p.tensors.emplace_back(s);
  p.architecture = std::move(arch);
  return Network(std::move(p));
}

void Network::restore(const ParamSnapshot& snap) {
  if (!(snap.architecture == params_.architecture)) throw ShapeError("restore: architecture mismatch");
  Network checked(snap);
  params_ = std::move(checked.params_);
}

Tensor Network::forward(const Tensor& x) const {
  const Architecture& arch = architecture();
  if (x.cols() != arch.input_size()) {
    throw ShapeError("forward: input " + shape_str(x.shape()) + " does not match network input " +
                     shape_str(arch.input));
  }
  Tensor h = x.reshaped({x.rows(), arch.input_size()});
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const Tensor& w = params_.weight(i);
    const Tensor& b = params_.bias(i);
    if (arch.layers[i].kind == LayerKind::kConv) {
      h = kernels::conv2d(h, w, b, arch.conv_geometry(i));
    } else {
      h = kernels::add_bias(kernels::matmul(h, w), b);
    }
    if (i + 1 < arch.layers.size()) h = kernels::relu(h);
  }
  return h;
}

Var Network::forward(Tape& tape, Var x, std::span<const Var> params) const {
  const Architecture& arch = architecture();
  if (params.size() != params_.tensors.size()) throw ShapeError("forward: parameter handle count mismatch");
  if (x.value().cols() != arch.input_size()) {
    throw ShapeError("forward: input " + shape_str(x.value().shape()) + " does not match network input " +
                     shape_str(arch.input));
  }
  Var h = x;
  if (x.value().rank() != 2) h = ops::reshape(x, {x.value().rows(), arch.input_size()});
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (arch.layers[i].kind == LayerKind::kConv) {
      h = ops::conv2d(h, params[2 * i], params[2 * i + 1], arch.conv_geometry(i));
    } else {
      h = ops::add_bias(ops::matmul(h, params[2 * i]), params[2 * i + 1]);
    }
    if (i + 1 < arch.layers.size()) h = ops::relu(h);
  }
  (void)tape;
  return h;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& t : params_.tensors) n += t.size();
  return n;
}

std::size_t Network::single_output_parameter_count() const {
  const Architecture& arch = architecture();
  const std::size_t last = arch.layers.size() - 1;
  const std::size_t fan = arch.fan_in(last);
  return parameter_count() - (arch.n_classes() - 1) * (fan + 1);
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  std::vector<std::size_t> out(scores.rows());
  const std::size_t c = scores.cols();
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (scores[r * c + j] > scores[r * c + best]) best = j;
    }
    out[r] = best;
  }
  return out;
}

}  // namespace maxmatch
