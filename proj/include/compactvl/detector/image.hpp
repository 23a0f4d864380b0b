// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cvl::detector {

/// 8-bit interleaved RGB image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::uint8_t at(int y, int x, int c) const { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

/// Reads binary (P6) or ASCII (P3) PPM with maxval <= 255.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& image, const std::filesystem::path& path);

/// Deterministic test pattern: coloured rectangles over a gradient.
Image synthetic_image(int width, int height, std::uint64_t seed);

/// Per-channel normalization applied after scaling pixels to [0, 1].
inline constexpr float kImageMean[3] = {0.485f, 0.456f, 0.406f};
inline constexpr float kImageStd[3] = {0.229f, 0.224f, 0.225f};

/// Bilinear resize to size x size (half-pixel centres) followed by
/// normalization; the result is 3 x size x size.
FeatureMap<float> image_tensor(const Image& image, int size);

}  // namespace cvl::detector
