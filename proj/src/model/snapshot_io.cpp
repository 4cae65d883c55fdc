// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MaxMatch Lab Authors

#include "model/snapshot_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "common/error.hpp"

namespace maxmatch {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'S', 'N', 'A', 'P', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

ParamSnapshot SnapshotFile::group(const std::string& name) const {
  for (const auto& [n, tensors] : groups) {
    if (n == name) return ParamSnapshot{architecture, tensors};
  }
  throw ConfigError("snapshot has no parameter group '" + name + "'");
}

bool SnapshotFile::has_group(const std::string& name) const {
  for (const auto& g : groups) {
    if (g.first == name) return true;
  }
  return false;
}

void SnapshotFile::add_group(const std::string& name, const ParamSnapshot& snap) {
  if (!(snap.architecture == architecture)) throw ShapeError("snapshot group architecture mismatch");
  groups.emplace_back(name, snap.tensors);
}

std::string encode_snapshot(const SnapshotFile& file) {
  nlohmann::json header;
  header["format"] = "maxmatch-snapshot";
  header["version"] = 1;
  header["architecture"] = to_json(file.architecture);
  header["meta"] = file.meta;
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& [name, tensors] : file.groups) {
    nlohmann::json ts = nlohmann::json::array();
    for (const Tensor& t : tensors) ts.push_back(t.shape());
    groups.push_back({{"name", name}, {"shapes", ts}});
  }
  header["groups"] = groups;
  const std::string h = header.dump();

  std::string out(kMagic, 8);
  put_u64(out, h.size());
  out += h;
  for (const auto& g : file.groups) {
    for (const Tensor& t : g.second) {
      for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

SnapshotFile decode_snapshot(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("snapshot: bad magic");
  }
  const std::uint64_t hlen = get_u64(bytes, 8);
  if (hlen > bytes.size() - 16) throw FormatError("snapshot: truncated header");
  SnapshotFile file;
  std::size_t pos = 16 + hlen;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(16, hlen));
    if (header.at("format") != "maxmatch-snapshot") throw FormatError("snapshot: unknown format tag");
    file.architecture = architecture_from_json(header.at("architecture"));
    file.meta = header.value("meta", nlohmann::json::object());
    for (const auto& g : header.at("groups")) {
      std::vector<Tensor> tensors;
      for (const auto& s : g.at("shapes")) {
        Shape shape = s.get<Shape>();
        const std::size_t n = shape_size(shape);
        if (n > (bytes.size() - pos) / 8) throw FormatError("snapshot: truncated payload");
        std::vector<double> data(n);
        for (std::size_t i = 0; i < n; ++i, pos += 8) data[i] = std::bit_cast<double>(get_u64(bytes, pos));
        tensors.emplace_back(std::move(shape), std::move(data));
      }
      file.groups.emplace_back(g.at("name").get<std::string>(), std::move(tensors));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("snapshot: malformed header: ") + e.what());
  }
  if (pos != bytes.size()) throw FormatError("snapshot: trailing bytes after payload");
  for (const auto& g : file.groups) Network(ParamSnapshot{file.architecture, g.second});
  return file;
}

void save_snapshot(const std::filesystem::path& path, const SnapshotFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_snapshot(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

SnapshotFile load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_snapshot(ss.str());
}

}  // namespace maxmatch
