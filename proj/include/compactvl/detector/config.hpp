// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

namespace cvl::detector {

/// One stage of the inverted-bottleneck backbone, before width/depth scaling.
struct MBConvStage {
  int expand_ratio = 6;
  int kernel = 3;
  int stride = 1;
  int out_channels = 16;
  int repeats = 1;
};

/// A single block after width/depth scaling has been applied.
struct BlockShape {
  int in_channels = 0;
  int out_channels = 0;
  int expand_ratio = 1;
  int kernel = 3;
  int stride = 1;
  int se_channels = 1;
  int output_stride = 2;  // cumulative stride at the block output

  int mid_channels() const { return in_channels * expand_ratio; }
  bool has_skip() const { return stride == 1 && in_channels == out_channels; }
};

/// Anchors at one location: every scale paired with every aspect ratio.
/// The base side length at a level is size_per_stride * stride.
struct AnchorScheme {
  double size_per_stride = 8.0;
  std::vector<double> scales{1.0};
  std::vector<double> aspect_ratios{0.5, 1.0, 2.0};

  int per_location() const { return static_cast<int>(scales.size() * aspect_ratios.size()); }
};

/// Declarative description of a region-feature detector. Used both to build
/// the live network and to derive its closed-form cost.
struct DetectorConfig {
  std::string name = "custom";
  int family = -1;  // X of a TEE-X preset, -1 for custom configs
  int input_size = 576;

  double width_multiplier = 1.0;
  double depth_multiplier = 1.0;
  int stem_channels = 32;
  std::vector<MBConvStage> base_stages;
  double se_ratio = 0.25;

  int bifpn_channels = 64;
  int bifpn_repeats = 3;

  AnchorScheme anchors;
  int rpn_layers = 2;
  double nms_iou_threshold = 0.5;
  double score_floor = 0.05;
  int pre_nms_topk = 1000;
  int post_nms_topk = 300;
  int max_regions = 50;
  double min_box_size = 1.0;

  int roi_output_size = 4;
  int roi_sampling_ratio = 2;
  int box_head_layers = 2;
  int feature_dim = 1024;
  int num_classes = 1600;     // foreground classes; the classifier adds background
  int num_attributes = 400;   // the attribute classifier adds a "no attribute" slot
  std::vector<std::string> class_names;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  int scaled_stem_channels() const;
  std::vector<BlockShape> blocks() const;
  /// Backbone output channels at strides 4, 8, 16 and 32.
  std::map<int, int> level_channels() const;
  /// Name of class `id` (1-based; 0 is background).
  std::string class_name(int id) const;
};

/// Pyramid strides produced by the backbone and by the fused pyramid.
inline constexpr int kBackboneStrides[] = {4, 8, 16, 32};
inline constexpr int kPyramidStrides[] = {4, 8, 16, 32, 64};

std::vector<MBConvStage> efficientnet_b0_stages();

/// EfficientNet channel rounding (multiples of 8, never shrinking by >10%).
int round_channels(int channels, double width_multiplier);
int round_repeats(int repeats, double depth_multiplier);

/// TEE-X for X in 0..3: B_X backbone multipliers, D_X BiFPN widths/repeats,
/// input side 576 + 128 X.
DetectorConfig tee_preset(int x);

/// A tiny configuration with the full topology, for tests and examples.
DetectorConfig toy_detector_config();

}  // namespace cvl::detector
