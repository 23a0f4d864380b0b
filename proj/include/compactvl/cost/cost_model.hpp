// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/cost/layer_spec.hpp"
#include "compactvl/detector/config.hpp"
#include "compactvl/transformer/config.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cvl::cost {

/// ResNet-C4 Faster R-CNN (the bottom-up-attention baseline). Cost-only: no
/// live network is built for it.
struct FasterRcnnC4Config {
  std::string name = "r101-f";
  std::vector<int> stage_blocks{3, 4, 23};  // res2..res4
  int head_blocks = 3;                       // res5, run per RoI
  int input_height = 600;
  int input_width = 800;
  int anchors_per_location = 12;
  int rpn_channels = 512;
  int roi_pool_size = 14;
  int proposals = 1000;
  int num_classes = 1600;
  bool class_specific_box_regression = true;

  void validate() const;
};

FasterRcnnC4Config r101_faster_rcnn();

using ArchConfig = std::variant<detector::DetectorConfig, transformer::TransformerConfig, FasterRcnnC4Config>;

std::string arch_name(const ArchConfig& config);

/// Image input for detector families; `proposals` overrides the RoI count fed
/// to the box head (defaults to the config's post-NMS budget).
struct ImageInput {
  Count height = 0;
  Count width = 0;
  std::optional<Count> proposals;
};

/// Sequence input for transformer families.
struct SequenceInput {
  Count regions = 50;
  Count text_tokens = 35;
};

using InputSpec = std::variant<ImageInput, SequenceInput>;

/// The config's native input: its own resolution, or 50 regions + 35 tokens.
InputSpec default_input(const ArchConfig& config);

struct NamedLayer {
  std::string component;
  std::string name;
  LayerSpec spec;
};

struct ComponentCost {
  std::string name;
  Count params = 0;
  Count flops = 0;
};

/// Per-component totals. Report totals are always recomputed from components.
struct CostReport {
  std::string name;
  std::vector<ComponentCost> components;

  Count total_params() const;
  Count total_flops() const;
  const ComponentCost* find(std::string_view component) const;
  void add(const std::string& component, const LayerCost& cost);
};

/// Expanded layer inventory. Detector components: backbone, bifpn, rpn,
/// box_head, attribute_head. Transformer: embedding, encoder, pooler, decoder.
/// The transformer decoder (vocabulary projection) runs over text positions only.
std::vector<NamedLayer> expand_layers(const ArchConfig& config, const InputSpec& input);

CostReport count_arch(const ArchConfig& config, const InputSpec& input);
inline CostReport count_arch(const ArchConfig& config) { return count_arch(config, default_input(config)); }

struct ComparisonRow {
  std::string name;
  Count params = 0;
  Count flops = 0;
  double params_ratio = 1.0;  // params / baseline params
  double flops_ratio = 1.0;
};

struct ComparisonTable {
  std::string baseline;
  std::vector<ComparisonRow> rows;

  const ComparisonRow& row(std::string_view name) const;
};

/// Ratios against `baseline` (a report name; the first report when empty).
ComparisonTable compare(std::span<const CostReport> reports, std::string_view baseline = {});

}  // namespace cvl::cost
