// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/detector/boxes.hpp"
#include "compactvl/detector/config.hpp"

#include <vector>

namespace cvl::detector {

struct LevelGrid {
  int stride = 0;
  long height = 0;
  long width = 0;
};

/// Anchor shapes at one location, centred on the origin. For ratio r = h / w
/// the side lengths are w = size / sqrt(r), h = size * sqrt(r).
std::vector<Box> cell_anchors(const AnchorScheme& scheme, int stride);

/// Anchors for every level in the order (level, y, x, anchor), centred at
/// ((x + 0.5) s, (y + 0.5) s).
std::vector<Box> generate_anchors(const std::vector<LevelGrid>& levels, const AnchorScheme& scheme);

}  // namespace cvl::detector
