// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/detector/anchors.hpp"

#include <cmath>

namespace cvl::detector {

std::vector<Box> cell_anchors(const AnchorScheme& scheme, int stride) {
  std::vector<Box> out;
  for (double scale : scheme.scales) {
    const double size = scheme.size_per_stride * stride * scale;
    for (double ratio : scheme.aspect_ratios) {
      const double w = size / std::sqrt(ratio), h = size * std::sqrt(ratio);
      out.push_back({-0.5 * w, -0.5 * h, 0.5 * w, 0.5 * h});
    }
  }
  return out;
}

std::vector<Box> generate_anchors(const std::vector<LevelGrid>& levels, const AnchorScheme& scheme) {
  std::vector<Box> out;
  for (const auto& level : levels) {
    const auto base = cell_anchors(scheme, level.stride);
    for (long y = 0; y < level.height; ++y) {
      const double cy = (y + 0.5) * level.stride;
      for (long x = 0; x < level.width; ++x) {
        const double cx = (x + 0.5) * level.stride;
        for (const auto& a : base) out.push_back({a.x1 + cx, a.y1 + cy, a.x2 + cx, a.y2 + cy});
      }
    }
  }
  return out;
}

}  // namespace cvl::detector
