// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace cvl::detector {

/// Corner-form box in pixels, half-open convention: area = (x2-x1)(y2-y1).
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  /// Finite with x1 <= x2 and y1 <= y2 (zero extent allowed).
  bool well_formed() const;
  /// Strictly positive extent.
  bool non_degenerate() const { return well_formed() && x2 > x1 && y2 > y1; }

  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b);

Box clip_box(const Box& box, double image_width, double image_height);

/// Box regression target in the usual (dx, dy, log dw, log dh) parameterization.
struct BoxDelta {
  double dx = 0, dy = 0, dw = 0, dh = 0;
};

/// Largest log-scale change applied when decoding, log(1000/16).
inline constexpr double kMaxLogScale = 4.135166556742356;

Box decode_box(const Box& anchor, const BoxDelta& delta);
BoxDelta encode_box(const Box& anchor, const Box& target);

/// Greedy class-agnostic NMS. Visits boxes by descending score (ties: lower
/// index first), keeps a box unless its IoU with an already kept box exceeds
/// `iou_threshold`, and stops after `topk` survivors. Returns kept indices in
/// visiting order. Throws std::invalid_argument on malformed boxes.
std::vector<int> nms_class_agnostic(std::span<const Box> boxes, std::span<const double> scores, double iou_threshold,
                                    int topk);

/// Pyramid level heuristic: stride = 2^floor(4 + log2(sqrt(area) / 224)),
/// clamped to [min_stride, max_stride]. A 224x224 box maps to stride 16.
struct LevelRule {
  double canonical_size = 224.0;
  int canonical_level = 4;
  int min_stride = 4;
  int max_stride = 64;
};

int assign_fpn_level(const Box& box, const LevelRule& rule = {});

}  // namespace cvl::detector
