// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/detector/anchors.hpp"
#include "compactvl/detector/boxes.hpp"
#include "compactvl/detector/layers.hpp"
#include "compactvl/detector/roi_align.hpp"
#include "compactvl/detector/weights.hpp"

#include <map>
#include <string>
#include <vector>

namespace cvl::detector {

/// Stride -> feature map. Backbone output holds strides 4..32, the fused
/// pyramid 4..64 with a single channel count.
template <typename Scalar>
using FeaturePyramid = std::map<int, FeatureMap<Scalar>>;

template <typename Scalar>
FeatureMap<Scalar> mbconv_forward(const FeatureMap<Scalar>& x, const MBConvWeights<Scalar>& w) {
  const auto& b = w.shape;
  if (x.channels() != b.in_channels) throw ShapeError("mbconv: input channels");
  const Matrix<Scalar> none;
  FeatureMap<Scalar> h = x;
  if (b.expand_ratio != 1) h = swish(batch_norm(pointwise_conv(h, w.expand_w, none), w.expand_bn));
  h = swish(batch_norm(depthwise_conv2d(h, w.depthwise_w, none, b.kernel, b.stride), w.depthwise_bn));
  h = squeeze_excite(h, w.se_reduce_w, w.se_reduce_b, w.se_expand_w, w.se_expand_b);
  h = batch_norm(pointwise_conv(h, w.project_w, none), w.project_bn);
  if (b.has_skip()) h.data += x.data;
  return h;
}

/// Image tensor (3 x H x W, normalized) to backbone levels {4, 8, 16, 32}.
template <typename Scalar>
FeaturePyramid<Scalar> forward_backbone(const FeatureMap<Scalar>& image, const DetectorWeights<Scalar>& w) {
  const auto& cfg = w.config;
  if (image.channels() != 3 || image.height != cfg.input_size || image.width != cfg.input_size)
    throw ShapeError("forward_backbone: expected a 3 x " + std::to_string(cfg.input_size) + " x " +
                     std::to_string(cfg.input_size) + " image");
  FeatureMap<Scalar> h = swish(batch_norm(conv2d(image, w.backbone.stem_w, Matrix<Scalar>(), 3, 2), w.backbone.stem_bn));
  FeaturePyramid<Scalar> out;
  for (const auto& block : w.backbone.blocks) {
    h = mbconv_forward(h, block);
    const int s = block.shape.output_stride;
    if (s >= 4 && s <= 32) out[s] = h;
  }
  return out;
}

/// Fast normalized fusion: sum_i relu(w_i) x_i / (sum_j relu(w_j) + eps).
template <typename Scalar>
FeatureMap<Scalar> fuse_weighted(const std::vector<const FeatureMap<Scalar>*>& inputs, const Matrix<Scalar>& raw,
                                 double eps = 1e-4) {
  if (inputs.empty() || raw.rows() != static_cast<Index>(inputs.size()))
    throw ShapeError("fuse_weighted: one weight per input required");
  std::vector<Scalar> w(inputs.size());
  Scalar total(eps);
  for (size_t i = 0; i < inputs.size(); ++i) {
    w[i] = cvl::relu(raw(static_cast<Index>(i), 0));
    total += w[i];
  }
  FeatureMap<Scalar> out(inputs[0]->channels(), inputs[0]->height, inputs[0]->width);
  for (size_t i = 0; i < inputs.size(); ++i) {
    const auto& x = *inputs[i];
    if (x.height != out.height || x.width != out.width || x.channels() != out.channels())
      throw ShapeError("fuse_weighted: inputs differ in shape");
    const Scalar n = w[i] / total;
    out.data += x.data * n;
  }
  return out;
}

/// fusion -> swish -> depthwise 3x3 -> pointwise (+bias) -> batch norm.
template <typename Scalar>
FeatureMap<Scalar> bifpn_node(const std::vector<const FeatureMap<Scalar>*>& inputs, const BifpnNodeWeights<Scalar>& w) {
  FeatureMap<Scalar> h = swish(fuse_weighted(inputs, w.fusion));
  h = depthwise_conv2d(h, w.depthwise_w, Matrix<Scalar>(), 3, 1);
  return batch_norm(pointwise_conv(h, w.pointwise_w, w.pointwise_b), w.bn);
}

/// Bidirectional weighted fusion of backbone levels {4..32} into {4..64}.
template <typename Scalar>
FeaturePyramid<Scalar> bifpn_fuse(const FeaturePyramid<Scalar>& levels, const DetectorWeights<Scalar>& w) {
  for (int s : kBackboneStrides)
    if (!levels.contains(s)) throw ShapeError("bifpn_fuse: missing level " + std::to_string(s));
  if (levels.size() != 4) throw ShapeError("bifpn_fuse: expected exactly levels 4, 8, 16, 32");

  FeaturePyramid<Scalar> p;
  for (int s : kBackboneStrides) {
    const auto& lat = w.bifpn.lateral.at(s);
    p[s] = batch_norm(pointwise_conv(levels.at(s), lat.weight, lat.bias), lat.bn);
  }
  {
    const auto& lat = w.bifpn.lateral.at(64);
    p[64] = max_pool2x2(batch_norm(pointwise_conv(levels.at(32), lat.weight, lat.bias), lat.bn));
  }

  for (const auto& layer : w.bifpn.layers) {
    FeaturePyramid<Scalar> td;
    td[64] = p[64];
    for (int s : {32, 16, 8, 4}) {
      const auto up = upsample_nearest(td.at(2 * s), p.at(s).height, p.at(s).width);
      td[s] = bifpn_node<Scalar>({&p.at(s), &up}, layer.top_down.at(s));
    }
    FeaturePyramid<Scalar> out;
    out[4] = td.at(4);
    for (int s : {8, 16, 32}) {
      const auto down = max_pool2x2(out.at(s / 2));
      out[s] = bifpn_node<Scalar>({&p.at(s), &td.at(s), &down}, layer.bottom_up.at(s));
    }
    {
      const auto down = max_pool2x2(out.at(32));
      out[64] = bifpn_node<Scalar>({&p.at(64), &down}, layer.bottom_up.at(64));
    }
    p = std::move(out);
  }
  return p;
}

/// Raw RPN outputs for one level: objectness logits (A x HW) and deltas
/// (4A x HW), columns in row-major pixel order.
template <typename Scalar>
struct RpnLevelOutput {
  Matrix<Scalar> logits;
  Matrix<Scalar> deltas;
};

template <typename Scalar>
std::map<int, RpnLevelOutput<Scalar>> rpn_head(const FeaturePyramid<Scalar>& fused, const RpnWeights<Scalar>& w) {
  std::map<int, RpnLevelOutput<Scalar>> out;
  for (const auto& [s, map] : fused) {
    out[s] = {pointwise_conv(map, w.objectness_w, w.objectness_b).data,
              pointwise_conv(map, w.regression_w, w.regression_b).data};
  }
  return out;
}

struct Proposals {
  std::vector<Box> boxes;      // decoded and clipped, one per anchor
  std::vector<double> scores;  // sigmoid objectness
  std::vector<Box> anchors;
};

/// Decodes every anchor of the fused pyramid into a clipped proposal.
template <typename Scalar>
Proposals rpn_propose(const FeaturePyramid<Scalar>& fused, const DetectorWeights<Scalar>& w) {
  for (int s : kPyramidStrides)
    if (!fused.contains(s)) throw ShapeError("rpn_propose: missing level " + std::to_string(s));
  const auto& cfg = w.config;
  const auto raw = rpn_head(fused, w.rpn);
  const int A = cfg.anchors.per_location();
  const double size = cfg.input_size;

  Proposals p;
  std::vector<LevelGrid> grids;
  for (const auto& [s, map] : fused) grids.push_back({s, static_cast<long>(map.height), static_cast<long>(map.width)});
  p.anchors = generate_anchors(grids, cfg.anchors);
  p.boxes.reserve(p.anchors.size());
  p.scores.reserve(p.anchors.size());
  size_t k = 0;
  for (const auto& [s, out] : raw) {
    for (Index pix = 0; pix < out.logits.cols(); ++pix) {
      for (int a = 0; a < A; ++a, ++k) {
        const BoxDelta d{value_of(out.deltas(4 * a, pix)), value_of(out.deltas(4 * a + 1, pix)),
                         value_of(out.deltas(4 * a + 2, pix)), value_of(out.deltas(4 * a + 3, pix))};
        p.boxes.push_back(clip_box(decode_box(p.anchors[k], d), size, size));
        p.scores.push_back(value_of(cvl::sigmoid(out.logits(a, pix))));
      }
    }
  }
  return p;
}

/// Box head outputs, one row per region.
template <typename Scalar>
struct BoxHeadOutput {
  Matrix<Scalar> features;           // N x D, the region features
  Matrix<Scalar> class_logits;       // N x (classes + 1), column 0 is background
  Matrix<Scalar> attribute_logits;   // N x (attributes + 1), column 0 is "none"
};

/// `pooled` holds one flattened C x S x S tensor per row, index c * S*S + bin.
template <typename Scalar>
BoxHeadOutput<Scalar> box_head(const Matrix<Scalar>& pooled, const BoxHeadWeights<Scalar>& w) {
  if (pooled.cols() != w.fc1_w.cols()) throw ShapeError("box_head: pooled width does not match the config");
  BoxHeadOutput<Scalar> out;
  const Matrix<Scalar> h = relu(linear(pooled, w.fc1_w, w.fc1_b));
  out.features = relu(linear(h, w.fc2_w, w.fc2_b));
  out.class_logits = linear(out.features, w.classifier_w, w.classifier_b);
  out.attribute_logits = linear(out.features, w.attribute_w, w.attribute_b);
  return out;
}

/// Pools every box from its assigned pyramid level; rows as box_head expects.
template <typename Scalar>
Matrix<Scalar> pool_regions(const FeaturePyramid<Scalar>& fused, const std::vector<Box>& boxes,
                            const DetectorConfig& cfg) {
  const Index S = cfg.roi_output_size, bins = S * S;
  const Index C = fused.begin()->second.channels();
  Matrix<Scalar> rows(static_cast<Index>(boxes.size()), C * bins);
  const RoiAlignOptions opt{cfg.roi_output_size, cfg.roi_sampling_ratio, true};
  for (size_t i = 0; i < boxes.size(); ++i) {
    const int s = assign_fpn_level(boxes[i]);
    const Matrix<Scalar> pooled = roi_align(fused.at(s), boxes[i], s, opt);
    for (Index c = 0; c < C; ++c) rows.row(static_cast<Index>(i)).segment(c * bins, bins) = pooled.row(c);
  }
  return rows;
}

}  // namespace cvl::detector
