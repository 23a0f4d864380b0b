// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/detector/extract.hpp"

#include <algorithm>
#include <numeric>

namespace cvl::detector {

std::vector<int> select_proposals(const Proposals& p, const DetectorConfig& cfg) {
  std::vector<int> idx;
  for (size_t i = 0; i < p.boxes.size(); ++i)
    if (p.boxes[i].width() >= cfg.min_box_size && p.boxes[i].height() >= cfg.min_box_size)
      idx.push_back(static_cast<int>(i));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return p.scores[a] > p.scores[b]; });
  if (static_cast<int>(idx.size()) > cfg.pre_nms_topk) idx.resize(cfg.pre_nms_topk);

  std::vector<Box> boxes;
  std::vector<double> scores;
  for (int i : idx) {
    boxes.push_back(p.boxes[i]);
    scores.push_back(p.scores[i]);
  }
  const auto kept = nms_class_agnostic(boxes, scores, cfg.nms_iou_threshold, cfg.post_nms_topk);
  std::vector<int> out;
  out.reserve(kept.size());
  for (int k : kept) out.push_back(idx[k]);
  return out;
}

RegionSet extract_regions(const FeatureMap<float>& tensor, const DetectorWeights<float>& w,
                          const std::string& image_id, int image_width, int image_height,
                          const ExtractOptions& options, ExtractTrace* trace) {
  const auto& cfg = w.config;
  const int max_regions = options.max_regions.value_or(cfg.max_regions);
  const double floor = options.score_floor.value_or(cfg.score_floor);
  if (max_regions < 0) throw ConfigError("max_regions must be non-negative");
  if (image_width <= 0 || image_height <= 0) throw ShapeError("extract_regions: image size must be positive");

  const auto fused = bifpn_fuse(forward_backbone(tensor, w), w);
  const auto proposals = rpn_propose(fused, w);
  const auto kept = select_proposals(proposals, cfg);

  std::vector<Box> boxes;
  std::vector<double> box_scores;
  for (int k : kept) {
    boxes.push_back(proposals.boxes[k]);
    box_scores.push_back(proposals.scores[k]);
  }
  RegionSet out = RegionSet::empty(image_id, image_width, image_height, cfg.feature_dim);
  if (boxes.empty()) {
    if (trace) *trace = {};
    return out;
  }

  auto head = box_head(pool_regions(fused, boxes, cfg), w.box_head);

  // Region score: highest foreground softmax probability.
  const Index n = head.class_logits.rows();
  std::vector<double> score(n);
  std::vector<int> label(n);
  for (Index i = 0; i < n; ++i) {
    const auto row = head.class_logits.row(i).cast<double>();
    const double m = row.maxCoeff();
    const double z = (row.array() - m).exp().sum();
    Index best = 1;
    for (Index c = 2; c < row.size(); ++c)
      if (row(c) > row(best)) best = c;
    score[i] = std::exp(row(best) - m) / z;
    label[i] = static_cast<int>(best);
  }

  std::vector<int> order;
  for (Index i = 0; i < n; ++i)
    if (score[i] > floor) order.push_back(static_cast<int>(i));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });
  if (static_cast<int>(order.size()) > max_regions) order.resize(max_regions);

  const double sx = static_cast<double>(image_width) / cfg.input_size;
  const double sy = static_cast<double>(image_height) / cfg.input_size;
  const Index k = static_cast<Index>(order.size());
  out.boxes.resize(k, 4);
  out.features.resize(k, cfg.feature_dim);
  for (Index r = 0; r < k; ++r) {
    const int i = order[r];
    const Box& b = boxes[i];
    out.boxes.row(r) << static_cast<float>(std::clamp(b.x1 * sx, 0.0, static_cast<double>(image_width))),
        static_cast<float>(std::clamp(b.y1 * sy, 0.0, static_cast<double>(image_height))),
        static_cast<float>(std::clamp(b.x2 * sx, 0.0, static_cast<double>(image_width))),
        static_cast<float>(std::clamp(b.y2 * sy, 0.0, static_cast<double>(image_height)));
    out.scores.push_back(static_cast<float>(score[i]));
    out.class_ids.push_back(static_cast<std::uint16_t>(label[i]));
    out.tags.push_back(cfg.class_name(label[i]));
    out.features.row(r) = head.features.row(i);
  }
  if (trace) *trace = {std::move(boxes), std::move(box_scores), std::move(head)};
  return out;
}

RegionSet extract_regions(const Image& image, const DetectorWeights<float>& w, const std::string& image_id,
                          const ExtractOptions& options) {
  return extract_regions(image_tensor(image, w.config.input_size), w, image_id, image.width, image.height, options);
}

}  // namespace cvl::detector
