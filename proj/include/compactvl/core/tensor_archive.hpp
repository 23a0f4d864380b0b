// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"

#include "json.hpp"

#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cvl {

enum class DType { kFloat32, kFloat64 };

/// Named-tensor checkpoint archive.
///
/// On disk: the 8-byte magic "CVLTENS1", a little-endian uint64 manifest
/// length, the UTF-8 JSON manifest, then the concatenated tensor payloads.
/// The manifest lists every tensor's name, dtype ("f32" or "f64"), shape
/// [rows, cols], byte offset into the payload, and byte count, plus a free
/// form "metadata" object. Payloads are row-major and stored bit-for-bit, so a
/// save/load cycle reproduces every value exactly.
class TensorArchive {
 public:
  struct Entry {
    DType dtype = DType::kFloat32;
    Index rows = 0;
    Index cols = 0;
    std::vector<unsigned char> bytes;
  };

  template <typename Scalar>
  void put(const std::string& name, const Matrix<Scalar>& m) {
    static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>,
                  "archives store float or double tensors");
    Entry e;
    e.dtype = std::is_same_v<Scalar, float> ? DType::kFloat32 : DType::kFloat64;
    e.rows = m.rows();
    e.cols = m.cols();
    e.bytes.resize(static_cast<size_t>(m.size()) * sizeof(Scalar));
    size_t k = 0;
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        const Scalar v = m(i, j);
        std::memcpy(e.bytes.data() + k, &v, sizeof(Scalar));
        k += sizeof(Scalar);
      }
    }
    if (!entries_.count(name)) order_.push_back(name);
    entries_[name] = std::move(e);
  }

  /// Reads a tensor, converting between float and double when the stored dtype differs.
  template <typename Scalar>
  Matrix<Scalar> get(const std::string& name) const {
    const Entry& e = entry(name);
    Matrix<Scalar> m(e.rows, e.cols);
    size_t k = 0;
    for (Index i = 0; i < e.rows; ++i) {
      for (Index j = 0; j < e.cols; ++j) {
        if (e.dtype == DType::kFloat32) {
          float v;
          std::memcpy(&v, e.bytes.data() + k, sizeof(float));
          k += sizeof(float);
          m(i, j) = static_cast<Scalar>(v);
        } else {
          double v;
          std::memcpy(&v, e.bytes.data() + k, sizeof(double));
          k += sizeof(double);
          m(i, j) = static_cast<Scalar>(v);
        }
      }
    }
    return m;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Entry& entry(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }

  nlohmann::json& metadata() { return metadata_; }
  const nlohmann::json& metadata() const { return metadata_; }

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

  std::vector<unsigned char> serialize() const;
  static TensorArchive deserialize(const std::vector<unsigned char>& bytes);

 private:
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
  nlohmann::json metadata_ = nlohmann::json::object();
};

}  // namespace cvl
