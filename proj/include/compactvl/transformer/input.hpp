// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"
#include "compactvl/detector/region_set.hpp"
#include "compactvl/transformer/config.hpp"
#include "compactvl/transformer/tokenizer.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace cvl::transformer {

enum class Task { kPretrainMlm, kPretrainItm, kCaption, kVqa, kNlvr2, kRetrieval };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);  // "pretrain-mlm", "caption", ...

/// Entry (i, j) is 1 when position i may attend to position j.
using AttentionMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Positions are [CLS] S [SEP] tags [SEP] regions. The caption block is
/// [CLS] S [SEP]; the tag block is tags [SEP].
struct SequenceLayout {
  Index sentence = 0;
  Index tags = 0;
  Index regions = 0;

  Index caption_block() const { return sentence + 2; }
  Index tags_begin() const { return sentence + 2; }
  Index text_length() const { return sentence + tags + 3; }
  Index regions_begin() const { return text_length(); }
  Index total() const { return text_length() + regions; }
};

/// Full bidirectional attention for every task except captioning, where the
/// caption block is causal and sees all tags and regions, while tags and
/// regions attend only among themselves.
AttentionMask attention_mask_for_task(Task task, const SequenceLayout& layout);

/// (x1/W, y1/H, x2/W, y2/H, (x2-x1)/W, (y2-y1)/H) per row.
MatrixXd encode_box_positions(const detector::RowMatrixXf& boxes, int image_width, int image_height);

struct Truncation {
  Index sentence_dropped = 0;
  Index tags_dropped = 0;
  bool any() const { return sentence_dropped + tags_dropped > 0; }
};

/// Assembled transformer input. Region rows hold concat(feature, box
/// encoding) before the learned projection, which is part of the model.
struct FusionInput {
  Task task = Task::kPretrainMlm;
  SequenceLayout layout;
  std::vector<int> text_ids;     // text positions, [CLS] ... [SEP]
  std::vector<int> segment_ids;  // every position, regions included
  MatrixXd region_inputs;        // regions x (feature_dim + 6)
  AttentionMask mask;
  Truncation truncation;

  Index length() const { return layout.total(); }
  /// Throws ShapeError when lengths, ids or the mask are inconsistent.
  void validate(const TransformerConfig& config) const;
};

/// Builds the input for one (regions, tags, sentence) triple. When the total
/// length exceeds `max_length` (default: config.max_positions) the sentence
/// is shortened first, then the tags; regions are never dropped.
FusionInput assemble_input(const detector::RegionSet& regions, const std::vector<int>& tag_ids,
                           const std::vector<int>& sentence_ids, Task task, const Vocabulary& vocab,
                           const TransformerConfig& config, std::optional<Index> max_length = std::nullopt);

}  // namespace cvl::transformer
