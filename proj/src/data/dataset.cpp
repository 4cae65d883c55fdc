// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace maxmatch {

void Dataset::validate() const {
  if (features.rows() != labels.size()) {
    throw ConfigError("dataset '" + name + "': " + std::to_string(features.rows()) + " feature rows vs " +
                      std::to_string(labels.size()) + " labels");
  }
  if (!labels.empty() && features.cols() != shape_size(sample_shape)) {
    throw ConfigError("dataset '" + name + "': feature width does not match sample shape");
  }
  for (std::size_t y : labels) {
    if (y >= n_classes) throw ConfigError("dataset '" + name + "': label " + std::to_string(y) + " >= n_c");
  }
}

std::vector<std::size_t> Dataset::gather_labels(std::span<const std::size_t> idx) const {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels.at(i));
  return out;
}

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n % 2 != 0) throw ConfigError("two-moons: n must be even, got " + std::to_string(n));
  if (!(noise >= 0.0)) throw ConfigError("two-moons: noise must be >= 0");
  Rng rng(seed);
  Dataset ds;
  ds.name = "two-moons";
  ds.sample_shape = {2};
  ds.n_classes = 2;
  ds.features = Tensor({n, 2});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % 2;
    const double t = rng.uniform(0.0, std::numbers::pi);
    double x = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
    if (noise > 0.0) {
      x += rng.normal(0.0, noise);
      y += rng.normal(0.0, noise);
    }
    ds.features.at(i, 0) = x;
    ds.features.at(i, 1) = y;
    ds.labels[i] = cls;
  }
  return ds;
}

namespace {

std::uint32_t read_be32(const std::string& b, std::size_t pos) {
  if (pos + 4 > b.size()) throw FormatError("idx: truncated header");
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3]));
}

void write_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Dataset parse_idx(const std::string& image_bytes, const std::string& label_bytes) {
  if (read_be32(image_bytes, 0) != 0x00000803u) throw FormatError("idx: bad image magic (expected 0x00000803)");
  if (read_be32(label_bytes, 0) != 0x00000801u) throw FormatError("idx: bad label magic (expected 0x00000801)");
  const std::size_t n = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8);
  const std::size_t cols = read_be32(image_bytes, 12);
  const std::size_t nl = read_be32(label_bytes, 4);
  if (nl != n) throw FormatError("idx: image count " + std::to_string(n) + " vs label count " + std::to_string(nl));
  if (image_bytes.size() < 16 + n * rows * cols) throw FormatError("idx: truncated image payload");
  if (label_bytes.size() < 8 + n) throw FormatError("idx: truncated label payload");

  Dataset ds;
  ds.name = "idx";
  ds.sample_shape = {1, rows, cols};
  ds.features = Tensor({n, rows * cols});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n * rows * cols; ++i) {
    ds.features[i] = static_cast<unsigned char>(image_bytes[16 + i]) / 255.0;
  }
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<unsigned char>(label_bytes[8 + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.n_classes = std::max<std::size_t>(10, max_label + 1);
  return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  return parse_idx(slurp(images), slurp(labels));
}

std::string encode_idx_images(std::span<const std::uint8_t> pixels, std::size_t n, std::size_t rows,
                              std::size_t cols) {
  if (pixels.size() != n * rows * cols) throw ConfigError("encode_idx_images: pixel count mismatch");
  std::string out;
  write_be32(out, 0x00000803u);
  write_be32(out, static_cast<std::uint32_t>(n));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  return out;
}

std::string encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::string out;
  write_be32(out, 0x00000801u);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.append(reinterpret_cast<const char*>(labels.data()), labels.size());
  return out;
}

SslSplit split_ssl(const Dataset& ds, std::size_t labels_per_class, std::uint64_t fold_seed, UnlabeledMode mode,
                   std::uint64_t fold_id) {
  if (labels_per_class == 0) throw ConfigError("split_ssl: labels_per_class must be positive");
  std::vector<std::vector<std::size_t>> by_class(ds.n_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(ds.labels[i]).push_back(i);

  SslSplit split;
  split.fold_id = fold_id;
  split.seed = fold_seed;
  for (std::size_t c = 0; c < ds.n_classes; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;  // class absent from this dataset
    if (members.size() < labels_per_class) {
      throw ConfigError("split_ssl: class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                        " samples, need " + std::to_string(labels_per_class));
    }
    Rng rng(derive_seed(fold_seed, {c}));
    rng.shuffle(members);
    split.labeled.insert(split.labeled.end(), members.begin(),
                         members.begin() + static_cast<std::ptrdiff_t>(labels_per_class));
  }
  std::sort(split.labeled.begin(), split.labeled.end());
  if (mode == UnlabeledMode::kAll) {
    split.unlabeled.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) split.unlabeled[i] = i;
  } else {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (!std::binary_search(split.labeled.begin(), split.labeled.end(), i)) split.unlabeled.push_back(i);
    }
  }
  return split;
}

BatchIterator::BatchIterator(const SslSplit& split, std::size_t labeled_batch, std::size_t unlabeled_batch,
                             std::uint64_t seed, bool require_unlabeled)
    : labeled_(split.labeled),
      unlabeled_(split.unlabeled),
      labeled_batch_(labeled_batch),
      unlabeled_batch_(unlabeled_batch),
      seed_(seed) {
  if (labeled_.empty()) throw ConfigError("batch iterator: empty labeled set");
  if (labeled_batch_ == 0 || labeled_batch_ > labeled_.size()) {
    throw ConfigError("batch iterator: B_l=" + std::to_string(labeled_batch_) + " must be in [1, " +
                      std::to_string(labeled_.size()) + "]");
  }
  if (require_unlabeled && (unlabeled_.empty() || unlabeled_batch_ == 0)) {
    throw ConfigError("batch iterator: unlabeled data required (lambda > 0) but the unlabeled set or B_u is empty");
  }
  seek(Position{});
}

std::vector<std::size_t> BatchIterator::permutation(const std::vector<std::size_t>& pool, std::uint64_t stream,
                                                    std::uint64_t epoch) const {
  std::vector<std::size_t> perm = pool;
  Rng rng(derive_seed(seed_, {stream, epoch}));
  rng.shuffle(perm);
  return perm;
}

void BatchIterator::seek(const Position& pos) {
  pos_ = pos;
  labeled_perm_ = permutation(labeled_, 0, pos_.labeled_epoch);
  if (!unlabeled_.empty()) unlabeled_perm_ = permutation(unlabeled_, 1, pos_.unlabeled_epoch);
}

Batch BatchIterator::next() {
  Batch b;
  b.labeled_epoch = pos_.labeled_epoch;
  while (b.labeled.size() < labeled_batch_) {
    if (pos_.labeled_offset == labeled_perm_.size()) {
      ++pos_.labeled_epoch;
      pos_.labeled_offset = 0;
      labeled_perm_ = permutation(labeled_, 0, pos_.labeled_epoch);
    }
    b.labeled.push_back(labeled_perm_[pos_.labeled_offset++]);
  }
  if (unlabeled_.empty()) return b;
  while (b.unlabeled.size() < unlabeled_batch_) {
    if (pos_.unlabeled_offset == unlabeled_perm_.size()) {
      ++pos_.unlabeled_epoch;
      pos_.unlabeled_offset = 0;
      unlabeled_perm_ = permutation(unlabeled_, 1, pos_.unlabeled_epoch);
    }
    b.unlabeled.push_back(unlabeled_perm_[pos_.unlabeled_offset++]);
    b.unlabeled_epoch.push_back(pos_.unlabeled_epoch);
  }
  return b;
}

nlohmann::json to_json(const DataConfig& c) {
  nlohmann::json j = {{"kind", c.kind},
                      {"labels-per-class", c.labels_per_class},
                      {"fold-seed", c.fold_seed},
                      {"unlabeled-mode", c.unlabeled_mode == UnlabeledMode::kAll ? "all" : "disjoint"},
                      {"seed", c.seed}};
  if (c.kind == "two-moons") {
    j["n"] = c.n;
    j["noise"] = c.noise;
    j["n-test"] = c.n_test;
  } else {
    j["train-images"] = c.train_images;
    j["train-labels"] = c.train_labels;
    j["test-images"] = c.test_images;
    j["test-labels"] = c.test_labels;
    j["limit"] = c.limit;
  }
  return j;
}

DataConfig data_config_from_json(const nlohmann::json& j) {
  static const char* kKeys[] = {"kind",         "n",           "noise",       "n-test", "seed",
                                "train-images", "train-labels", "test-images", "test-labels",
                                "limit",        "labels-per-class", "fold-seed", "unlabeled-mode"};
  if (!j.is_object()) throw ConfigError("data config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), k) == std::end(kKeys)) {
      throw ConfigError("data config: unknown key '" + k + "'");
    }
  }
  try {
    DataConfig c;
    c.kind = j.value("kind", c.kind);
    c.n = j.value("n", c.n);
    c.noise = j.value("noise", c.noise);
    c.n_test = j.value("n-test", c.n_test);
    c.seed = j.value("seed", c.seed);
    c.train_images = j.value("train-images", c.train_images);
    c.train_labels = j.value("train-labels", c.train_labels);
    c.test_images = j.value("test-images", c.test_images);
    c.test_labels = j.value("test-labels", c.test_labels);
    c.limit = j.value("limit", c.limit);
    c.labels_per_class = j.value("labels-per-class", c.labels_per_class);
    c.fold_seed = j.value("fold-seed", c.fold_seed);
    const std::string mode = j.value("unlabeled-mode", std::string("all"));
    if (mode == "all") {
      c.unlabeled_mode = UnlabeledMode::kAll;
    } else if (mode == "disjoint") {
      c.unlabeled_mode = UnlabeledMode::kDisjoint;
    } else {
      throw ConfigError("data config: unlabeled-mode must be 'all' or 'disjoint'");
    }
    if (c.kind != "two-moons" && c.kind != "idx") throw ConfigError("data config: unknown kind '" + c.kind + "'");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("data config: ") + e.what());
  }
}

namespace {
Dataset truncate(Dataset ds, std::size_t limit) {
  if (limit == 0 || limit >= ds.size()) return ds;
  std::vector<std::size_t> idx(limit);
  for (std::size_t i = 0; i < limit; ++i) idx[i] = i;
  ds.features = ds.features.gather_rows(idx);
  ds.labels.resize(limit);
  return ds;
}
}  // namespace

LoadedData load_data(const DataConfig& c) {
  LoadedData d;
  if (c.kind == "two-moons") {
    d.train = make_two_moons(c.n, c.noise, c.seed);
    d.test = make_two_moons(c.n_test, c.noise, c.seed + 1);
  } else {
    d.train = truncate(load_idx(c.train_images, c.train_labels), c.limit);
    d.test = c.test_images.empty() ? d.train : load_idx(c.test_images, c.test_labels);
    d.test.n_classes = d.train.n_classes = std::max(d.train.n_classes, d.test.n_classes);
  }
  d.train.validate();
  d.test.validate();
  return d;
}

}  // namespace maxmatch
