// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/core/tensor_archive.hpp"

#include <fstream>
#include <iterator>

namespace cvl {
namespace {

constexpr char kMagic[8] = {'C', 'V', 'L', 'T', 'E', 'N', 'S', '1'};

std::string dtype_name(DType d) { return d == DType::kFloat32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::kFloat32;
  if (s == "f64") return DType::kFloat64;
  throw std::runtime_error("tensor archive: unknown dtype '" + s + "'");
}

size_t dtype_size(DType d) { return d == DType::kFloat32 ? 4 : 8; }

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

const TensorArchive::Entry& TensorArchive::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("tensor archive: no tensor named '" + name + "'");
  return it->second;
}

std::vector<unsigned char> TensorArchive::serialize() const {
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["metadata"] = metadata_;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& name : order_) {
    const Entry& e = entries_.at(name);
    manifest["tensors"].push_back({{"name", name},
                                   {"dtype", dtype_name(e.dtype)},
                                   {"shape", {e.rows, e.cols}},
                                   {"offset", offset},
                                   {"nbytes", e.bytes.size()}});
    offset += e.bytes.size();
  }
  const std::string text = manifest.dump();
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& name : order_) {
    const Entry& e = entries_.at(name);
    out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  }
  return out;
}

TensorArchive TensorArchive::deserialize(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw std::runtime_error("tensor archive: bad magic");
  const std::uint64_t manifest_len = get_u64(bytes.data() + 8);
  if (16 + manifest_len > bytes.size()) throw std::runtime_error("tensor archive: truncated manifest");
  const auto manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + manifest_len);
  const size_t payload = 16 + manifest_len;

  TensorArchive archive;
  archive.metadata_ = manifest.value("metadata", nlohmann::json::object());
  for (const auto& t : manifest.at("tensors")) {
    Entry e;
    e.dtype = parse_dtype(t.at("dtype").get<std::string>());
    e.rows = t.at("shape").at(0).get<Index>();
    e.cols = t.at("shape").at(1).get<Index>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto nbytes = t.at("nbytes").get<std::uint64_t>();
    if (nbytes != static_cast<std::uint64_t>(e.rows * e.cols) * dtype_size(e.dtype))
      throw std::runtime_error("tensor archive: shape/nbytes mismatch for " + t.at("name").get<std::string>());
    if (payload + offset + nbytes > bytes.size()) throw std::runtime_error("tensor archive: truncated payload");
    e.bytes.assign(bytes.begin() + payload + offset, bytes.begin() + payload + offset + nbytes);
    const auto name = t.at("name").get<std::string>();
    archive.order_.push_back(name);
    archive.entries_[name] = std::move(e);
  }
  return archive;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace cvl
