// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/detector/config.hpp"

#include "compactvl/core/types.hpp"

#include <cmath>
#include <set>

namespace cvl::detector {

std::vector<MBConvStage> efficientnet_b0_stages() {
  return {
      {1, 3, 1, 16, 1}, {6, 3, 2, 24, 2}, {6, 5, 2, 40, 2},  {6, 3, 2, 80, 3},
      {6, 5, 1, 112, 3}, {6, 5, 2, 192, 4}, {6, 3, 1, 320, 1},
  };
}

int round_channels(int channels, double width_multiplier) {
  constexpr int kDivisor = 8;
  const double scaled = channels * width_multiplier;
  int rounded = std::max(kDivisor, static_cast<int>(scaled + kDivisor / 2.0) / kDivisor * kDivisor);
  if (rounded < 0.9 * scaled) rounded += kDivisor;
  return rounded;
}

int round_repeats(int repeats, double depth_multiplier) {
  return static_cast<int>(std::ceil(depth_multiplier * repeats - 1e-9));
}

int DetectorConfig::scaled_stem_channels() const { return round_channels(stem_channels, width_multiplier); }

std::vector<BlockShape> DetectorConfig::blocks() const {
  std::vector<BlockShape> out;
  int in = scaled_stem_channels();
  int stride = 2;
  for (const auto& stage : base_stages) {
    const int oc = round_channels(stage.out_channels, width_multiplier);
    const int reps = round_repeats(stage.repeats, depth_multiplier);
    for (int r = 0; r < reps; ++r) {
      BlockShape b;
      b.in_channels = in;
      b.out_channels = oc;
      b.expand_ratio = stage.expand_ratio;
      b.kernel = stage.kernel;
      b.stride = r == 0 ? stage.stride : 1;
      b.se_channels = std::max(1, static_cast<int>(in * se_ratio));
      stride *= b.stride;
      b.output_stride = stride;
      out.push_back(b);
      in = oc;
    }
  }
  return out;
}

std::map<int, int> DetectorConfig::level_channels() const {
  std::map<int, int> levels;
  for (const auto& b : blocks()) levels[b.output_stride] = b.out_channels;
  return levels;
}

std::string DetectorConfig::class_name(int id) const {
  if (id >= 1 && id <= static_cast<int>(class_names.size())) return class_names[id - 1];
  return "class_" + std::to_string(id);
}

void DetectorConfig::validate() const {
  auto fail = [this](const std::string& what) { throw ConfigError("detector config '" + name + "': " + what); };
  if (input_size <= 0 || input_size % 64 != 0) fail("input size must be a positive multiple of 64");
  if (width_multiplier <= 0 || depth_multiplier <= 0) fail("width/depth multipliers must be positive");
  if (stem_channels <= 0) fail("stem channels must be positive");
  if (base_stages.empty()) fail("backbone needs at least one stage");
  for (const auto& s : base_stages) {
    if (s.expand_ratio < 1 || s.kernel < 1 || s.kernel % 2 == 0 || s.out_channels < 1 || s.repeats < 1)
      fail("stage fields must be positive with an odd kernel");
    if (s.stride != 1 && s.stride != 2) fail("stage stride must be 1 or 2");
  }
  std::set<int> strides;
  for (const auto& b : blocks()) strides.insert(b.output_stride);
  if (strides != std::set<int>{2, 4, 8, 16, 32} && strides != std::set<int>{4, 8, 16, 32})
    fail("backbone must reach strides 4, 8, 16 and 32 exactly");
  if (se_ratio <= 0 || se_ratio > 1) fail("squeeze-excite ratio must be in (0, 1]");
  if (bifpn_channels <= 0 || bifpn_repeats <= 0) fail("BiFPN channels and repeats must be positive");
  if (anchors.scales.empty() || anchors.aspect_ratios.empty() || anchors.size_per_stride <= 0)
    fail("anchor scheme needs at least one scale and one aspect ratio");
  for (double v : anchors.scales)
    if (v <= 0) fail("anchor scales must be positive");
  for (double v : anchors.aspect_ratios)
    if (v <= 0) fail("anchor aspect ratios must be positive");
  if (rpn_layers != 2) fail("the RPN has exactly two 1x1 convolutions (regression and objectness)");
  if (box_head_layers != 2) fail("the box head has exactly two linear layers");
  if (!(nms_iou_threshold > 0 && nms_iou_threshold < 1)) fail("NMS IoU threshold must be in (0, 1)");
  if (score_floor < 0 || score_floor > 1) fail("score floor must be in [0, 1]");
  if (pre_nms_topk <= 0 || post_nms_topk <= 0 || max_regions < 0) fail("proposal budgets must be positive");
  if (min_box_size < 0) fail("minimum box size must be non-negative");
  if (roi_output_size < 1 || roi_sampling_ratio < 1) fail("RoIAlign size and sampling ratio must be >= 1");
  if (feature_dim <= 0) fail("feature dimension must be positive");
  if (num_classes <= 0 || num_attributes <= 0) fail("class and attribute counts must be positive");
  if (!class_names.empty() && static_cast<int>(class_names.size()) != num_classes)
    fail("class_names must list exactly num_classes names");
}

DetectorConfig tee_preset(int x) {
  if (x < 0 || x > 3) throw ConfigError("TEE presets exist for X in 0..3");
  static constexpr double kWidth[] = {1.0, 1.0, 1.1, 1.2};
  static constexpr double kDepth[] = {1.0, 1.1, 1.2, 1.4};
  static constexpr int kBifpnChannels[] = {64, 88, 112, 160};
  static constexpr int kBifpnRepeats[] = {3, 4, 5, 6};
  DetectorConfig c;
  c.name = "tee-" + std::to_string(x);
  c.family = x;
  c.input_size = 576 + 128 * x;
  c.width_multiplier = kWidth[x];
  c.depth_multiplier = kDepth[x];
  c.stem_channels = 32;
  c.base_stages = efficientnet_b0_stages();
  c.bifpn_channels = kBifpnChannels[x];
  c.bifpn_repeats = kBifpnRepeats[x];
  return c;
}

DetectorConfig toy_detector_config() {
  DetectorConfig c;
  c.name = "tee-toy";
  c.input_size = 256;
  c.stem_channels = 8;
  c.base_stages = {{1, 3, 1, 8, 1}, {2, 3, 2, 8, 1}, {2, 3, 2, 12, 1}, {2, 3, 2, 16, 1}, {2, 3, 2, 16, 1}};
  c.bifpn_channels = 8;
  c.bifpn_repeats = 2;
  c.pre_nms_topk = 200;
  c.post_nms_topk = 40;
  c.max_regions = 10;
  c.feature_dim = 32;
  c.num_classes = 5;
  c.num_attributes = 3;
  c.class_names = {"dog", "cat", "tree", "car", "person"};
  return c;
}

}  // namespace cvl::detector
