// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/random.hpp"
#include "compactvl/detector/region_set.hpp"

#include <algorithm>
#include <string>

namespace cvl::testing {

/// Random but valid regions: sorted scores, boxes inside a 100 x 80 image.
inline detector::RegionSet random_regions(Index n, Index dim, std::uint64_t seed, int width = 100, int height = 80) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto r = detector::RegionSet::empty("img" + std::to_string(seed), width, height, dim);
  r.boxes.resize(n, 4);
  r.features.resize(n, dim);
  std::vector<float> scores;
  for (Index i = 0; i < n; ++i) {
    double x1 = u(rng) * width * 0.8, y1 = u(rng) * height * 0.8;
    r.boxes.row(i) << static_cast<float>(x1), static_cast<float>(y1),
        static_cast<float>(x1 + 1 + u(rng) * (width - x1 - 1)), static_cast<float>(y1 + 1 + u(rng) * (height - y1 - 1));
    scores.push_back(static_cast<float>(u(rng)));
    r.class_ids.push_back(static_cast<std::uint16_t>(1 + i % 5));
    r.tags.push_back("tag" + std::to_string(i % 5));
    for (Index k = 0; k < dim; ++k) r.features(i, k) = static_cast<float>(u(rng) * 2 - 1);
  }
  std::sort(scores.begin(), scores.end(), std::greater<>());
  r.scores = scores;
  return r;
}

}  // namespace cvl::testing
