// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace cvl::cost {

enum class LayerKind {
  kStandardConv,
  kDepthwiseConv,
  kPointwiseConv,
  kLinear,
  kEmbedding,
  kAttentionBlock,
  kFfnBlock,
  kNorm,
  kRoiAlign,
  kNms,
  kWeightedFusion,
};

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// Shape of one layer primitive. Which fields are required depends on the kind:
///
///   standard-conv    in, out, kernel, height, width   (height/width = output map)
///   depthwise-conv   in, kernel, height, width
///   pointwise-conv   in, out, height, width
///   linear           in, out, tokens                  (tokens = rows transformed)
///   embedding        in (rows), out (dim)
///   attention-block  hidden, heads, tokens
///   ffn-block        hidden, intermediate, tokens
///   norm             in
///   roi-align        in, kernel (output side), count (RoIs)
///   nms              count (boxes)
///   weighted-fusion  count (fused inputs)
///
/// Any other field set is rejected, as is `bias` on kinds without one.
struct LayerSpec {
  LayerKind kind = LayerKind::kLinear;
  std::optional<Count> in;
  std::optional<Count> out;
  std::optional<Count> kernel;
  std::optional<Count> height;
  std::optional<Count> width;
  std::optional<Count> tokens;
  std::optional<Count> hidden;
  std::optional<Count> intermediate;
  std::optional<Count> heads;
  std::optional<Count> count;
  bool bias = false;

  static LayerSpec standard_conv(Count in, Count out, Count kernel, Count height, Count width, bool bias);
  static LayerSpec depthwise_conv(Count channels, Count kernel, Count height, Count width, bool bias);
  static LayerSpec pointwise_conv(Count in, Count out, Count height, Count width, bool bias);
  static LayerSpec linear(Count in, Count out, Count tokens, bool bias = true);
  static LayerSpec embedding(Count rows, Count dim);
  static LayerSpec attention_block(Count hidden, Count heads, Count tokens);
  static LayerSpec ffn_block(Count hidden, Count intermediate, Count tokens);
  static LayerSpec norm(Count channels);
  static LayerSpec roi_align(Count channels, Count output_size, Count rois);
  static LayerSpec nms(Count boxes);
  static LayerSpec weighted_fusion(Count inputs);

  /// Throws ConfigError when a required field is missing, non-positive, or an extra is present.
  void validate() const;
};

struct LayerCost {
  Count params = 0;
  Count flops = 0;  // multiply-accumulates

  LayerCost& operator+=(const LayerCost& o) {
    params += o.params;
    flops += o.flops;
    return *this;
  }
  friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

/// Closed-form parameter and MAC counts. One FLOP is one multiply-accumulate;
/// only matmul and convolution products are counted, elementwise work is not.
/// Parameters include biases and normalization scale/shift.
LayerCost count_layer(const LayerSpec& spec);

}  // namespace cvl::cost
