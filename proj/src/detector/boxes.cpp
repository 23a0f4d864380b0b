// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/detector/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cvl::detector {

bool Box::well_formed() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x1 <= x2 && y1 <= y2;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Box clip_box(const Box& b, double w, double h) {
  return {std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h), std::clamp(b.x2, 0.0, w), std::clamp(b.y2, 0.0, h)};
}

Box decode_box(const Box& anchor, const BoxDelta& d) {
  const double w = anchor.width(), h = anchor.height();
  const double cx = anchor.x1 + 0.5 * w, cy = anchor.y1 + 0.5 * h;
  const double pcx = d.dx * w + cx, pcy = d.dy * h + cy;
  const double pw = std::exp(std::min(d.dw, kMaxLogScale)) * w;
  const double ph = std::exp(std::min(d.dh, kMaxLogScale)) * h;
  return {pcx - 0.5 * pw, pcy - 0.5 * ph, pcx + 0.5 * pw, pcy + 0.5 * ph};
}

BoxDelta encode_box(const Box& anchor, const Box& t) {
  if (!anchor.non_degenerate() || !t.non_degenerate()) throw std::invalid_argument("encode_box: degenerate box");
  const double w = anchor.width(), h = anchor.height();
  const double cx = anchor.x1 + 0.5 * w, cy = anchor.y1 + 0.5 * h;
  const double tw = t.width(), th = t.height();
  const double tcx = t.x1 + 0.5 * tw, tcy = t.y1 + 0.5 * th;
  return {(tcx - cx) / w, (tcy - cy) / h, std::log(tw / w), std::log(th / h)};
}

std::vector<int> nms_class_agnostic(std::span<const Box> boxes, std::span<const double> scores, double iou_threshold,
                                    int topk) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("nms: boxes and scores differ in length");
  if (!(iou_threshold > 0 && iou_threshold < 1)) throw std::invalid_argument("nms: IoU threshold must be in (0, 1)");
  for (const auto& b : boxes)
    if (!b.well_formed()) throw std::invalid_argument("nms: malformed box");

  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

  std::vector<int> keep;
  std::vector<char> suppressed(boxes.size(), 0);
  for (size_t i = 0; i < order.size() && static_cast<int>(keep.size()) < topk; ++i) {
    const int idx = order[i];
    if (suppressed[idx]) continue;
    keep.push_back(idx);
    for (size_t j = i + 1; j < order.size(); ++j) {
      const int other = order[j];
      if (!suppressed[other] && iou(boxes[idx], boxes[other]) > iou_threshold) suppressed[other] = 1;
    }
  }
  return keep;
}

int assign_fpn_level(const Box& box, const LevelRule& rule) {
  if (!box.non_degenerate()) throw std::invalid_argument("assign_fpn_level: degenerate box");
  const double scale = std::sqrt(box.area());
  // The epsilon keeps exact powers of two (e.g. a 448 box) on the intended side.
  const double level = std::floor(rule.canonical_level + std::log2(scale / rule.canonical_size) + 1e-9);
  const double stride = std::ldexp(1.0, static_cast<int>(std::clamp(level, 0.0, 30.0)));
  return static_cast<int>(std::clamp(stride, static_cast<double>(rule.min_stride), static_cast<double>(rule.max_stride)));
}

}  // namespace cvl::detector
