// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cvl::transformer {

/// Shape of a BERT-style fusion transformer.
struct TransformerConfig {
  std::string name = "custom";
  int layers = 12;
  int hidden = 384;
  int intermediate = 1536;
  int heads = 12;
  int vocab_size = 30522;
  int max_positions = 512;
  int segments = 3;  // sentence, visual, tags
  int region_feature_dim = 1024;
  int box_encoding_dim = 6;
  double layer_norm_eps = 1e-12;
  double dropout = 0.1;
  double init_std = 0.02;

  void validate() const;
  int head_dim() const { return hidden / heads; }
  int region_input_dim() const { return region_feature_dim + box_encoding_dim; }
};

/// Segment ids used by the input layout.
inline constexpr int kSentenceSegment = 0;
inline constexpr int kVisualSegment = 1;
inline constexpr int kTagSegment = 2;

/// Registry names: minilm, bert-base, bert-8, bert-4, tinybert-6, tinybert-4.
const std::vector<std::string>& transformer_preset_names();
TransformerConfig transformer_preset(std::string_view name);
bool is_transformer_preset(std::string_view name);

/// Two layers, hidden 32: small enough for finite-difference checks.
TransformerConfig toy_transformer_config(int vocab_size = 64, int region_feature_dim = 16);

}  // namespace cvl::transformer
