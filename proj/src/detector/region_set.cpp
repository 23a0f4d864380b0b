// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/detector/region_set.hpp"

#include "json.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "region store assumes a little-endian host");

namespace cvl::detector {
namespace {

constexpr char kMagic[8] = {'C', 'V', 'L', 'R', 'E', 'G', 'N', '1'};

template <typename T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  Reader(const char* data, size_t size) : data_(data), size_(size) {}
  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > size_) throw std::runtime_error("region store: truncated record");
  }
  const char* data_;
  size_t size_;
  size_t pos_ = 0;
};

}  // namespace

RegionSet RegionSet::empty(std::string image_id, int width, int height, Index feature_dim) {
  RegionSet r;
  r.image_id = std::move(image_id);
  r.image_width = width;
  r.image_height = height;
  r.boxes.resize(0, 4);
  r.features.resize(0, feature_dim);
  return r;
}

void RegionSet::validate(int max_regions) const {
  const Index n = size();
  if (boxes.cols() != 4) throw std::invalid_argument("RegionSet: boxes must have 4 columns");
  if (static_cast<Index>(scores.size()) != n || static_cast<Index>(class_ids.size()) != n ||
      static_cast<Index>(tags.size()) != n || features.rows() != n)
    throw std::invalid_argument("RegionSet: field lengths disagree");
  if (max_regions >= 0 && n > max_regions) throw std::invalid_argument("RegionSet: more regions than allowed");
  if (image_width <= 0 || image_height <= 0) throw std::invalid_argument("RegionSet: image size must be positive");
  for (Index i = 0; i < n; ++i) {
    const float x1 = boxes(i, 0), y1 = boxes(i, 1), x2 = boxes(i, 2), y2 = boxes(i, 3);
    if (!(0 <= x1 && x1 < x2 && x2 <= image_width && 0 <= y1 && y1 < y2 && y2 <= image_height))
      throw std::invalid_argument("RegionSet: box " + std::to_string(i) + " outside the image or degenerate");
    if (!(scores[i] >= 0.0f && scores[i] <= 1.0f)) throw std::invalid_argument("RegionSet: score outside [0, 1]");
    if (i > 0 && scores[i] > scores[i - 1]) throw std::invalid_argument("RegionSet: scores not sorted");
  }
  if (!features.allFinite()) throw std::invalid_argument("RegionSet: non-finite feature");
}

bool operator==(const RegionSet& a, const RegionSet& b) {
  return a.image_id == b.image_id && a.image_width == b.image_width && a.image_height == b.image_height &&
         a.boxes.rows() == b.boxes.rows() && a.features.rows() == b.features.rows() &&
         a.features.cols() == b.features.cols() && a.boxes == b.boxes && a.scores == b.scores &&
         a.class_ids == b.class_ids && a.tags == b.tags && a.features == b.features;
}

std::filesystem::path tag_sidecar_path(const std::filesystem::path& store) {
  return std::filesystem::path(store.string() + ".tags.jsonl");
}

void write_region_store(const std::filesystem::path& path, const std::vector<RegionSet>& sets) {
  std::ofstream out(path, std::ios::binary);
  std::ofstream tags(tag_sidecar_path(path));
  if (!out || !tags) throw std::runtime_error("cannot write region store " + path.string());
  out.write(kMagic, sizeof(kMagic));
  for (const auto& r : sets) {
    r.validate();
    std::string rec;
    put<std::uint32_t>(rec, static_cast<std::uint32_t>(r.image_id.size()));
    rec += r.image_id;
    put<std::uint32_t>(rec, static_cast<std::uint32_t>(r.image_width));
    put<std::uint32_t>(rec, static_cast<std::uint32_t>(r.image_height));
    put<std::uint32_t>(rec, static_cast<std::uint32_t>(r.size()));
    put<std::uint32_t>(rec, static_cast<std::uint32_t>(r.feature_dim()));
    for (Index i = 0; i < r.size(); ++i) {
      for (int k = 0; k < 4; ++k) put<float>(rec, r.boxes(i, k));
      put<float>(rec, r.scores[i]);
      put<std::uint16_t>(rec, r.class_ids[i]);
      rec.append(reinterpret_cast<const char*>(r.features.row(i).data()), sizeof(float) * r.feature_dim());
    }
    const std::uint64_t len = rec.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    tags << nlohmann::json{{"image_id", r.image_id}, {"tags", r.tags}}.dump() << "\n";
  }
  if (!out || !tags) throw std::runtime_error("error writing region store " + path.string());
}

std::vector<RegionSet> read_region_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open region store " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a region store: " + path.string());

  std::vector<RegionSet> sets;
  size_t pos = sizeof(kMagic);
  while (pos < buf.size()) {
    if (pos + 8 > buf.size()) throw std::runtime_error("region store: truncated length prefix");
    std::uint64_t len;
    std::memcpy(&len, buf.data() + pos, 8);
    pos += 8;
    if (len > buf.size() - pos) throw std::runtime_error("region store: record exceeds file");
    Reader r(buf.data() + pos, len);
    pos += len;

    RegionSet set;
    set.image_id = r.bytes(r.get<std::uint32_t>());
    set.image_width = static_cast<int>(r.get<std::uint32_t>());
    set.image_height = static_cast<int>(r.get<std::uint32_t>());
    const Index n = r.get<std::uint32_t>(), d = r.get<std::uint32_t>();
    set.boxes.resize(n, 4);
    set.features.resize(n, d);
    for (Index i = 0; i < n; ++i) {
      for (int k = 0; k < 4; ++k) set.boxes(i, k) = r.get<float>();
      set.scores.push_back(r.get<float>());
      set.class_ids.push_back(r.get<std::uint16_t>());
      const std::string raw = r.bytes(sizeof(float) * d);
      std::memcpy(set.features.row(i).data(), raw.data(), raw.size());
    }
    if (!r.done()) throw std::runtime_error("region store: trailing bytes in record");
    sets.push_back(std::move(set));
  }

  std::ifstream tags(tag_sidecar_path(path));
  if (!tags) throw std::runtime_error("missing tag sidecar for " + path.string());
  std::string line;
  size_t i = 0;
  while (std::getline(tags, line)) {
    if (line.empty()) continue;
    if (i >= sets.size()) throw std::runtime_error("tag sidecar has more lines than records");
    const auto j = nlohmann::json::parse(line);
    if (j.at("image_id").get<std::string>() != sets[i].image_id)
      throw std::runtime_error("tag sidecar out of order at " + sets[i].image_id);
    sets[i].tags = j.at("tags").get<std::vector<std::string>>();
    if (static_cast<Index>(sets[i].tags.size()) != sets[i].size())
      throw std::runtime_error("tag count differs from region count for " + sets[i].image_id);
    ++i;
  }
  if (i != sets.size()) throw std::runtime_error("tag sidecar has fewer lines than records");
  return sets;
}

}  // namespace cvl::detector
