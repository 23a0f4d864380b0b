// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cvl::detector {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Detected regions of one image: boxes in original image pixels, scores
/// sorted non-increasing, class ids (1-based) with their names, and one
/// feature row per region.
struct RegionSet {
  std::string image_id;
  int image_width = 0;
  int image_height = 0;
  RowMatrixXf boxes;                      // N x 4, (x1, y1, x2, y2)
  std::vector<float> scores;
  std::vector<std::uint16_t> class_ids;
  std::vector<std::string> tags;
  RowMatrixXf features;                   // N x D

  Index size() const { return boxes.rows(); }
  Index feature_dim() const { return features.cols(); }

  /// Empty set with a fixed feature width.
  static RegionSet empty(std::string image_id, int width, int height, Index feature_dim);

  /// Throws std::invalid_argument when an invariant is violated; pass
  /// max_regions < 0 to skip the size bound.
  void validate(int max_regions = -1) const;

  friend bool operator==(const RegionSet& a, const RegionSet& b);
};

/// Binary store: magic "CVLREGN1", then per record a u64 byte length
/// followed by id (u32 length + bytes), W, H, N, D (u32 each) and N entries
/// of (4 x f32 box, f32 score, u16 class id, D x f32 feature), little-endian.
/// Tags go to `<path>.tags.jsonl`, one {"image_id", "tags"} object per record.
void write_region_store(const std::filesystem::path& path, const std::vector<RegionSet>& sets);
std::vector<RegionSet> read_region_store(const std::filesystem::path& path);

std::filesystem::path tag_sidecar_path(const std::filesystem::path& store);

}  // namespace cvl::detector
