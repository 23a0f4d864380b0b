// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/transformer/input.hpp"

#include <array>

namespace cvl::transformer {
namespace {

constexpr std::array<std::pair<Task, std::string_view>, 6> kTaskNames{{
    {Task::kPretrainMlm, "pretrain-mlm"},
    {Task::kPretrainItm, "pretrain-itm"},
    {Task::kCaption, "caption"},
    {Task::kVqa, "vqa"},
    {Task::kNlvr2, "nlvr2"},
    {Task::kRetrieval, "retrieval"},
}};

}  // namespace

std::string_view to_string(Task task) {
  for (const auto& [t, name] : kTaskNames)
    if (t == task) return name;
  throw std::invalid_argument("unknown task");
}

Task parse_task(std::string_view name) {
  for (const auto& [t, n] : kTaskNames)
    if (n == name) return t;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

AttentionMask attention_mask_for_task(Task task, const SequenceLayout& layout) {
  if (layout.sentence < 0 || layout.tags < 0 || layout.regions < 0) throw ShapeError("negative layout length");
  const Index n = layout.total();
  AttentionMask m = AttentionMask::Ones(n, n);
  if (task != Task::kCaption) return m;
  const Index c = layout.caption_block();
  for (Index i = 0; i < c; ++i)
    for (Index j = i + 1; j < c; ++j) m(i, j) = 0;
  m.block(c, 0, n - c, c).setZero();
  return m;
}

MatrixXd encode_box_positions(const detector::RowMatrixXf& boxes, int image_width, int image_height) {
  if (image_width <= 0 || image_height <= 0) throw ShapeError("encode_box_positions: image size must be positive");
  if (boxes.cols() != 4) throw ShapeError("encode_box_positions: boxes must be N x 4");
  const double W = image_width, H = image_height;
  MatrixXd out(boxes.rows(), 6);
  for (Index i = 0; i < boxes.rows(); ++i) {
    const double x1 = boxes(i, 0), y1 = boxes(i, 1), x2 = boxes(i, 2), y2 = boxes(i, 3);
    if (!(x2 > x1 && y2 > y1)) throw std::invalid_argument("encode_box_positions: degenerate box");
    out.row(i) << x1 / W, y1 / H, x2 / W, y2 / H, (x2 - x1) / W, (y2 - y1) / H;
  }
  return out;
}

void FusionInput::validate(const TransformerConfig& config) const {
  const Index n = length();
  if (static_cast<Index>(text_ids.size()) != layout.text_length()) throw ShapeError("FusionInput: text length mismatch");
  if (static_cast<Index>(segment_ids.size()) != n) throw ShapeError("FusionInput: segment ids cover every position");
  if (region_inputs.rows() != layout.regions || (layout.regions > 0 && region_inputs.cols() != config.region_input_dim()))
    throw ShapeError("FusionInput: region input shape mismatch");
  if (mask.rows() != n || mask.cols() != n) throw ShapeError("FusionInput: mask/length mismatch");
  if (layout.text_length() > config.max_positions) throw ShapeError("FusionInput: text exceeds position budget");
  for (int id : text_ids)
    if (id < 0 || id >= config.vocab_size) throw ShapeError("FusionInput: token id outside the vocabulary");
  for (int s : segment_ids)
    if (s < 0 || s >= config.segments) throw ShapeError("FusionInput: segment id out of range");
  for (Index i = 0; i < n; ++i) {
    if ((mask.row(i).array() > 1).any()) throw ShapeError("FusionInput: mask must be 0/1");
    if (mask.row(i).cast<int>().sum() == 0) throw ShapeError("FusionInput: a position attends to nothing");
  }
}

FusionInput assemble_input(const detector::RegionSet& regions, const std::vector<int>& tag_ids,
                           const std::vector<int>& sentence_ids, Task task, const Vocabulary& vocab,
                           const TransformerConfig& config, std::optional<Index> max_length) {
  config.validate();
  const Index K = regions.size();
  if (K > 0 && regions.feature_dim() != config.region_feature_dim)
    throw ShapeError("assemble_input: region features are " + std::to_string(regions.feature_dim()) +
                     "-d, the model expects " + std::to_string(config.region_feature_dim));
  const Index budget = max_length.value_or(config.max_positions);

  FusionInput in;
  in.task = task;
  Index s = static_cast<Index>(sentence_ids.size()), t = static_cast<Index>(tag_ids.size());
  auto total = [&] { return s + t + 3 + K; };
  while (total() > budget && s > 0) --s, ++in.truncation.sentence_dropped;
  while (total() > budget && t > 0) --t, ++in.truncation.tags_dropped;
  if (total() > budget) throw ShapeError("assemble_input: regions alone exceed the length budget");
  if (s + t + 3 > config.max_positions) throw ShapeError("assemble_input: text exceeds the position budget");
  in.layout = {s, t, K};

  in.text_ids.push_back(vocab.cls_id());
  in.text_ids.insert(in.text_ids.end(), sentence_ids.begin(), sentence_ids.begin() + s);
  in.text_ids.push_back(vocab.sep_id());
  in.text_ids.insert(in.text_ids.end(), tag_ids.begin(), tag_ids.begin() + t);
  in.text_ids.push_back(vocab.sep_id());

  in.segment_ids.assign(static_cast<size_t>(in.layout.caption_block()), kSentenceSegment);
  in.segment_ids.resize(static_cast<size_t>(in.layout.text_length()), kTagSegment);
  in.segment_ids.resize(static_cast<size_t>(in.layout.total()), kVisualSegment);

  in.region_inputs.resize(K, config.region_input_dim());
  if (K > 0) {
    in.region_inputs.leftCols(config.region_feature_dim) = regions.features.cast<double>();
    in.region_inputs.rightCols(config.box_encoding_dim) =
        encode_box_positions(regions.boxes, regions.image_width, regions.image_height);
  }
  in.mask = attention_mask_for_task(task, in.layout);
  in.validate(config);
  return in;
}

}  // namespace cvl::transformer
