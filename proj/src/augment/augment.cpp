// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "common/error.hpp"

namespace maxmatch {

namespace {

struct NamedOp {
  OpKind kind;
  const char* name;
};

constexpr NamedOp kOpNames[] = {
    {OpKind::kIdentity, "identity"},   {OpKind::kInvert, "invert"},       {OpKind::kSolarize, "solarize"},
    {OpKind::kBrightness, "brightness"}, {OpKind::kContrast, "contrast"}, {OpKind::kRotate, "rotate"},
    {OpKind::kTranslate, "translate"}, {OpKind::kShear, "shear"},         {OpKind::kPosterize, "posterize"},
    {OpKind::kRotate2d, "rotate-2d"},  {OpKind::kScale, "scale"},         {OpKind::kJitter, "jitter"},
};

constexpr std::uint64_t kWeakTag = 0x7765616bULL;

bool is_image_op(OpKind k) { return k <= OpKind::kPosterize; }

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Bilinear sample of one plane with zero fill outside.
double sample_bilinear(const double* plane, std::size_t h, std::size_t w, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const double dy = y - fy, dx = x - fx;
  const auto y0 = static_cast<std::ptrdiff_t>(fy), x0 = static_cast<std::ptrdiff_t>(fx);
  auto at = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) {
    if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx >= static_cast<std::ptrdiff_t>(w)) return 0.0;
    return plane[yy * static_cast<std::ptrdiff_t>(w) + xx];
  };
  return (1 - dy) * ((1 - dx) * at(y0, x0) + dx * at(y0, x0 + 1)) +
         dy * ((1 - dx) * at(y0 + 1, x0) + dx * at(y0 + 1, x0 + 1));
}

// Output pixel (y, x) reads the source at map(y, x), per channel.
template <class Map>
std::vector<double> warp(std::span<const double> x, const Shape& s, Map map) {
  const std::size_t c = s[0], h = s[1], w = s[2];
  std::vector<double> out(x.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = x.data() + ch * h * w;
    for (std::size_t yy = 0; yy < h; ++yy) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        auto [sy, sx] = map(static_cast<double>(yy), static_cast<double>(xx));
        out[(ch * h + yy) * w + xx] = sample_bilinear(plane, h, w, sy, sx);
      }
    }
  }
  return out;
}

std::vector<double> pivot_for(const AugmentConfig& cfg, std::size_t d) {
  std::vector<double> p(d, 0.0);
  for (std::size_t i = 0; i < std::min(d, cfg.vector_pivot.size()); ++i) p[i] = cfg.vector_pivot[i];
  return p;
}

}  // namespace

std::string op_name(OpKind kind) {
  for (const auto& n : kOpNames) {
    if (n.kind == kind) return n.name;
  }
  return "unknown";
}

OpKind op_from_name(const std::string& name) {
  for (const auto& n : kOpNames) {
    if (name == n.name) return n.kind;
  }
  throw ConfigError("unknown transform '" + name + "'");
}

void AugmentConfig::validate() const {
  if (image_pool.empty() || vector_pool.empty()) throw ConfigError("augment: empty transform pool");
  for (OpKind k : image_pool) {
    if (!is_image_op(k)) throw ConfigError("augment: '" + op_name(k) + "' is not an image transform");
  }
  for (OpKind k : vector_pool) {
    if (k != OpKind::kIdentity && is_image_op(k)) {
      throw ConfigError("augment: '" + op_name(k) + "' is not a vector transform");
    }
  }
  if (flip_probability < 0.0 || flip_probability > 1.0) throw ConfigError("augment: flip probability outside [0,1]");
  if (weak_noise < 0.0 || jitter_max < 0.0) throw ConfigError("augment: negative noise level");
  if (scale_low <= 0.0 || scale_high < scale_low) throw ConfigError("augment: invalid scale range");
}

nlohmann::json to_json(const AugmentConfig& c) {
  auto names = [](const std::vector<OpKind>& pool) {
    std::vector<std::string> out;
    for (OpKind k : pool) out.push_back(op_name(k));
    return out;
  };
  return {{"flip-probability", c.flip_probability}, {"crop-padding", c.crop_padding},
          {"weak-noise", c.weak_noise},             {"n-ops", c.n_ops},
          {"image-pool", names(c.image_pool)},      {"vector-pool", names(c.vector_pool)},
          {"rotate-degrees", c.rotate_degrees},     {"translate-fraction", c.translate_fraction},
          {"shear", c.shear},                       {"scale-low", c.scale_low},
          {"scale-high", c.scale_high},             {"jitter-max", c.jitter_max},
          {"vector-pivot", c.vector_pivot}};
}

AugmentConfig augment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("augment config must be a JSON object");
  AugmentConfig c;
  auto pool = [](const nlohmann::json& arr) {
    std::vector<OpKind> out;
    for (const auto& n : arr) out.push_back(op_from_name(n.get<std::string>()));
    return out;
  };
  static const char* kKeys[] = {"flip-probability", "crop-padding", "weak-noise",     "n-ops",
                                "image-pool",       "vector-pool",  "rotate-degrees", "translate-fraction",
                                "shear",            "scale-low",    "scale-high",     "jitter-max",
                                "vector-pivot"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), k) == std::end(kKeys)) {
      throw ConfigError("augment config: unknown key '" + k + "'");
    }
  }
  try {
    c.flip_probability = j.value("flip-probability", c.flip_probability);
    c.crop_padding = j.value("crop-padding", c.crop_padding);
    c.weak_noise = j.value("weak-noise", c.weak_noise);
    c.n_ops = j.value("n-ops", c.n_ops);
    if (j.contains("image-pool")) c.image_pool = pool(j["image-pool"]);
    if (j.contains("vector-pool")) c.vector_pool = pool(j["vector-pool"]);
    c.rotate_degrees = j.value("rotate-degrees", c.rotate_degrees);
    c.translate_fraction = j.value("translate-fraction", c.translate_fraction);
    c.shear = j.value("shear", c.shear);
    c.scale_low = j.value("scale-low", c.scale_low);
    c.scale_high = j.value("scale-high", c.scale_high);
    c.jitter_max = j.value("jitter-max", c.jitter_max);
    c.vector_pivot = j.value("vector-pivot", c.vector_pivot);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("augment config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<double> apply_op(const TransformOp& op, std::span<const double> x, const Shape& s,
                             const AugmentConfig& cfg, Rng& rng) {
  const double m = std::min(1.0, std::max(0.0, op.magnitude));
  const double signed_m = 2.0 * m - 1.0;  // [-1, 1], 0 at mid magnitude
  std::vector<double> out(x.begin(), x.end());
  const bool image = s.size() == 3;

  switch (op.kind) {
    case OpKind::kIdentity:
      return out;
    case OpKind::kInvert:
      for (double& v : out) v = 1.0 - v;
      break;
    case OpKind::kSolarize: {
      const double threshold = 1.0 - m;
      for (double& v : out) {
        if (v > threshold) v = 1.0 - v;
      }
      break;
    }
    case OpKind::kBrightness: {
      const double f = 1.0 + 0.9 * signed_m;
      for (double& v : out) v *= f;
      break;
    }
    case OpKind::kContrast: {
      double mean = 0.0;
      for (double v : out) mean += v;
      mean /= static_cast<double>(out.size());
      const double f = 1.0 + 0.9 * signed_m;
      for (double& v : out) v = mean + (v - mean) * f;
      break;
    }
    case OpKind::kRotate: {
      const double a = signed_m * cfg.rotate_degrees * std::numbers::pi / 180.0;
      const double cy = (static_cast<double>(s[1]) - 1.0) / 2.0, cx = (static_cast<double>(s[2]) - 1.0) / 2.0;
      const double ca = std::cos(a), sa = std::sin(a);
      out = warp(x, s, [&](double y, double xx) {
        const double dy = y - cy, dx = xx - cx;
        return std::pair{cy + ca * dy - sa * dx, cx + sa * dy + ca * dx};
      });
      break;
    }
    case OpKind::kTranslate: {
      const bool vertical = rng.uniform() < 0.5;
      const double extent = static_cast<double>(vertical ? s[1] : s[2]);
      const double shift = signed_m * cfg.translate_fraction * extent;
      out = warp(x, s, [&](double y, double xx) {
        return vertical ? std::pair{y - shift, xx} : std::pair{y, xx - shift};
      });
      break;
    }
    case OpKind::kShear: {
      const double k = signed_m * cfg.shear;
      const double cy = (static_cast<double>(s[1]) - 1.0) / 2.0;
      out = warp(x, s, [&](double y, double xx) { return std::pair{y, xx + k * (y - cy)}; });
      break;
    }
    case OpKind::kPosterize: {
      const int bits = 8 - static_cast<int>(std::lround(4.0 * m));
      const int mask = (0xff << (8 - bits)) & 0xff;
      for (double& v : out) {
        const int q = static_cast<int>(std::lround(clamp01(v) * 255.0));
        v = static_cast<double>(q & mask) / 255.0;
      }
      break;
    }
    case OpKind::kRotate2d: {
      if (out.size() < 2) break;
      const double a = signed_m * cfg.rotate_degrees * std::numbers::pi / 180.0;
      const auto p = pivot_for(cfg, out.size());
      const double dx = out[0] - p[0], dy = out[1] - p[1];
      out[0] = p[0] + std::cos(a) * dx - std::sin(a) * dy;
      out[1] = p[1] + std::sin(a) * dx + std::cos(a) * dy;
      break;
    }
    case OpKind::kScale: {
      const double f = cfg.scale_low + (cfg.scale_high - cfg.scale_low) * m;
      const auto p = pivot_for(cfg, out.size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = p[i] + f * (out[i] - p[i]);
      break;
    }
    case OpKind::kJitter: {
      const double sigma = cfg.jitter_max * m;
      for (double& v : out) v += rng.normal(0.0, sigma);
      break;
    }
  }
  if (image) {
    for (double& v : out) v = clamp01(v);
  }
  return out;
}

std::vector<double> weak_augment(std::span<const double> x, const Shape& s, std::uint64_t seed,
                                 const AugmentConfig& cfg) {
  Rng rng(seed);
  if (s.size() != 3) {
    std::vector<double> out(x.begin(), x.end());
    if (cfg.weak_noise > 0.0) {
      for (double& v : out) v += rng.normal(0.0, cfg.weak_noise);
    }
    return out;
  }
  const std::size_t c = s[0], h = s[1], w = s[2];
  const bool flip = rng.bernoulli(cfg.flip_probability);
  const auto pad = static_cast<std::int64_t>(cfg.crop_padding);
  const std::int64_t oy = rng.between(-pad, pad);
  const std::int64_t ox = rng.between(-pad, pad);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t yy = 0; yy < h; ++yy) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        const std::int64_t sy = static_cast<std::int64_t>(yy) + oy;
        std::int64_t sx = static_cast<std::int64_t>(xx) + ox;
        if (sy < 0 || sx < 0 || sy >= static_cast<std::int64_t>(h) || sx >= static_cast<std::int64_t>(w)) continue;
        if (flip) sx = static_cast<std::int64_t>(w) - 1 - sx;
        out[(ch * h + yy) * w + xx] = x[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
      }
    }
  }
  return out;
}

std::vector<double> strong_augment(std::span<const double> x, const Shape& s, std::uint64_t seed,
                                   const AugmentConfig& cfg) {
  const auto& pool = s.size() == 3 ? cfg.image_pool : cfg.vector_pool;
  if (pool.empty()) throw ConfigError("strong_augment: empty transform pool");
  Rng rng(seed);
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t i = 0; i < cfg.n_ops; ++i) {
    TransformOp op;
    op.kind = pool[rng.below(pool.size())];
    op.magnitude = rng.uniform();
    cur = apply_op(op, cur, s, cfg, rng);
  }
  return cur;
}

std::uint64_t variant_seed(std::uint64_t base_seed, std::size_t sample_id, std::uint64_t epoch, std::size_t j) {
  return derive_seed(base_seed, {sample_id, epoch, j});
}

std::uint64_t weak_seed(std::uint64_t base_seed, std::size_t sample_id, std::uint64_t epoch) {
  return derive_seed(base_seed ^ kWeakTag, {sample_id, epoch});
}

UncertaintySet build_uncertainty_set(std::span<const double> x, const Shape& s, std::size_t k,
                                     std::uint64_t base_seed, std::size_t sample_id, std::uint64_t epoch,
                                     const AugmentConfig& cfg) {
  if (k == 0) throw ConfigError("uncertainty set: K must be >= 1");
  UncertaintySet set;
  set.sample_id = sample_id;
  set.variants = Tensor({k, x.size()});
  for (std::size_t j = 0; j < k; ++j) {
    const std::uint64_t seed = variant_seed(base_seed, sample_id, epoch, j);
    set.variant_seeds.push_back(seed);
    const auto v = strong_augment(x, s, seed, cfg);
    std::copy(v.begin(), v.end(), set.variants.row(j).begin());
  }
  return set;
}

}  // namespace maxmatch
