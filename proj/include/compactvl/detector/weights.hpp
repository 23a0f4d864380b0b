// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/random.hpp"
#include "compactvl/core/types.hpp"
#include "compactvl/detector/config.hpp"
#include "compactvl/detector/layers.hpp"

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace cvl::detector {

// Every weight struct exposes visit(prefix, f) calling f(name, tensor, is_parameter).
// Buffers (running statistics) are reported with is_parameter = false.

template <typename Scalar>
struct MBConvWeights {
  BlockShape shape;
  Matrix<Scalar> expand_w;  // mid x in; empty when expand_ratio == 1
  BatchNorm<Scalar> expand_bn;
  Matrix<Scalar> depthwise_w;  // mid x k*k
  BatchNorm<Scalar> depthwise_bn;
  Matrix<Scalar> se_reduce_w, se_reduce_b, se_expand_w, se_expand_b;
  Matrix<Scalar> project_w;  // out x mid
  BatchNorm<Scalar> project_bn;

  template <typename F>
  void visit(const std::string& p, F&& f) {
    if (shape.expand_ratio != 1) {
      f(p + ".expand.weight", expand_w, true);
      expand_bn.visit(p + ".expand_bn", f);
    }
    f(p + ".depthwise.weight", depthwise_w, true);
    depthwise_bn.visit(p + ".depthwise_bn", f);
    f(p + ".se_reduce.weight", se_reduce_w, true);
    f(p + ".se_reduce.bias", se_reduce_b, true);
    f(p + ".se_expand.weight", se_expand_w, true);
    f(p + ".se_expand.bias", se_expand_b, true);
    f(p + ".project.weight", project_w, true);
    project_bn.visit(p + ".project_bn", f);
  }
};

template <typename Scalar>
struct BackboneWeights {
  Matrix<Scalar> stem_w;  // stem x (3 * 9)
  BatchNorm<Scalar> stem_bn;
  std::vector<MBConvWeights<Scalar>> blocks;

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".stem.conv.weight", stem_w, true);
    stem_bn.visit(p + ".stem.bn", f);
    for (size_t i = 0; i < blocks.size(); ++i) blocks[i].visit(p + ".blocks." + std::to_string(i), f);
  }
};

template <typename Scalar>
struct LateralWeights {
  Matrix<Scalar> weight, bias;
  BatchNorm<Scalar> bn;

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".conv.weight", weight, true);
    f(p + ".conv.bias", bias, true);
    bn.visit(p + ".bn", f);
  }
};

template <typename Scalar>
struct BifpnNodeWeights {
  Matrix<Scalar> fusion;  // one raw weight per input edge, n x 1
  Matrix<Scalar> depthwise_w;
  Matrix<Scalar> pointwise_w, pointwise_b;
  BatchNorm<Scalar> bn;

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".fusion.weight", fusion, true);
    f(p + ".depthwise.weight", depthwise_w, true);
    f(p + ".pointwise.weight", pointwise_w, true);
    f(p + ".pointwise.bias", pointwise_b, true);
    bn.visit(p + ".bn", f);
  }
};

/// One BiFPN repeat: top-down nodes at strides 32, 16, 8, 4 and bottom-up
/// nodes at 8, 16, 32, 64.
template <typename Scalar>
struct BifpnLayerWeights {
  std::map<int, BifpnNodeWeights<Scalar>> top_down;
  std::map<int, BifpnNodeWeights<Scalar>> bottom_up;

  template <typename F>
  void visit(const std::string& p, F&& f) {
    for (int s : {32, 16, 8, 4}) top_down.at(s).visit(p + ".top_down." + std::to_string(s), f);
    for (int s : {8, 16, 32, 64}) bottom_up.at(s).visit(p + ".bottom_up." + std::to_string(s), f);
  }
};

template <typename Scalar>
struct BifpnWeights {
  std::map<int, LateralWeights<Scalar>> lateral;  // strides 4..64; 64 reads the stride-32 map
  std::vector<BifpnLayerWeights<Scalar>> layers;

  template <typename F>
  void visit(const std::string& p, F&& f) {
    for (int s : kPyramidStrides) lateral.at(s).visit(p + ".lateral." + std::to_string(s), f);
    for (size_t i = 0; i < layers.size(); ++i) layers[i].visit(p + ".layers." + std::to_string(i), f);
  }
};

/// The two 1x1 convolutions of the RPN, shared across pyramid levels.
template <typename Scalar>
struct RpnWeights {
  Matrix<Scalar> objectness_w, objectness_b;  // A x C
  Matrix<Scalar> regression_w, regression_b;  // 4A x C, rows (dx, dy, dw, dh) per anchor

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".objectness.weight", objectness_w, true);
    f(p + ".objectness.bias", objectness_b, true);
    f(p + ".regression.weight", regression_w, true);
    f(p + ".regression.bias", regression_b, true);
  }
};

template <typename Scalar>
struct BoxHeadWeights {
  Matrix<Scalar> fc1_w, fc1_b;  // D x (C * S * S)
  Matrix<Scalar> fc2_w, fc2_b;  // D x D
  Matrix<Scalar> classifier_w, classifier_b;            // (classes + 1) x D
  Matrix<Scalar> attribute_w, attribute_b;              // (attributes + 1) x D

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".fc1.weight", fc1_w, true);
    f(p + ".fc1.bias", fc1_b, true);
    f(p + ".fc2.weight", fc2_w, true);
    f(p + ".fc2.bias", fc2_b, true);
    f(p + ".classifier.weight", classifier_w, true);
    f(p + ".classifier.bias", classifier_b, true);
  }
  template <typename F>
  void visit_attribute(const std::string& p, F&& f) {
    f(p + ".classifier.weight", attribute_w, true);
    f(p + ".classifier.bias", attribute_b, true);
  }
};

template <typename Scalar>
struct DetectorWeights {
  DetectorConfig config;
  BackboneWeights<Scalar> backbone;
  BifpnWeights<Scalar> bifpn;
  RpnWeights<Scalar> rpn;
  BoxHeadWeights<Scalar> box_head;

  /// Correctly shaped weights: zero convolutions, identity batch norms,
  /// unit fusion weights.
  static DetectorWeights allocate(const DetectorConfig& config);

  template <typename F>
  void visit(F&& f) {
    backbone.visit("backbone", f);
    bifpn.visit("bifpn", f);
    rpn.visit("rpn", f);
    box_head.visit("box_head", f);
    box_head.visit_attribute("attribute_head", f);
  }

  /// Number of learnable scalars (buffers excluded).
  Count parameter_count() const {
    Count n = 0;
    const_cast<DetectorWeights*>(this)->visit([&](const std::string&, Matrix<Scalar>& m, bool param) {
      if (param) n += m.size();
    });
    return n;
  }
};

template <typename Scalar>
DetectorWeights<Scalar> DetectorWeights<Scalar>::allocate(const DetectorConfig& config) {
  config.validate();
  const auto Z = [](Index r, Index c) { return Matrix<Scalar>::Zero(r, c); };
  DetectorWeights w;
  w.config = config;

  const Index stem = config.scaled_stem_channels();
  w.backbone.stem_w = Z(stem, 3 * 9);
  w.backbone.stem_bn = BatchNorm<Scalar>::identity(stem);
  for (const auto& b : config.blocks()) {
    MBConvWeights<Scalar> m;
    m.shape = b;
    const Index mid = b.mid_channels();
    if (b.expand_ratio != 1) {
      m.expand_w = Z(mid, b.in_channels);
      m.expand_bn = BatchNorm<Scalar>::identity(mid);
    }
    m.depthwise_w = Z(mid, b.kernel * b.kernel);
    m.depthwise_bn = BatchNorm<Scalar>::identity(mid);
    m.se_reduce_w = Z(b.se_channels, mid);
    m.se_reduce_b = Z(b.se_channels, 1);
    m.se_expand_w = Z(mid, b.se_channels);
    m.se_expand_b = Z(mid, 1);
    m.project_w = Z(b.out_channels, mid);
    m.project_bn = BatchNorm<Scalar>::identity(b.out_channels);
    w.backbone.blocks.push_back(std::move(m));
  }

  const Index C = config.bifpn_channels;
  const auto levels = config.level_channels();
  for (int s : kPyramidStrides) {
    const Index in = levels.at(s == 64 ? 32 : s);
    w.bifpn.lateral[s] = {Z(C, in), Z(C, 1), BatchNorm<Scalar>::identity(C)};
  }
  const auto node = [&](Index inputs) {
    return BifpnNodeWeights<Scalar>{Matrix<Scalar>::Ones(inputs, 1), Z(C, 9), Z(C, C), Z(C, 1),
                                    BatchNorm<Scalar>::identity(C)};
  };
  for (int r = 0; r < config.bifpn_repeats; ++r) {
    BifpnLayerWeights<Scalar> layer;
    for (int s : {32, 16, 8, 4}) layer.top_down[s] = node(2);
    for (int s : {8, 16, 32}) layer.bottom_up[s] = node(3);
    layer.bottom_up[64] = node(2);
    w.bifpn.layers.push_back(std::move(layer));
  }

  const Index A = config.anchors.per_location();
  w.rpn = {Z(A, C), Z(A, 1), Z(4 * A, C), Z(4 * A, 1)};

  const Index D = config.feature_dim, S = config.roi_output_size;
  auto& h = w.box_head;
  h.fc1_w = Z(D, C * S * S);
  h.fc1_b = Z(D, 1);
  h.fc2_w = Z(D, D);
  h.fc2_b = Z(D, 1);
  h.classifier_w = Z(config.num_classes + 1, D);
  h.classifier_b = Z(config.num_classes + 1, 1);
  h.attribute_w = Z(config.num_attributes + 1, D);
  h.attribute_b = Z(config.num_attributes + 1, 1);
  return w;
}

/// Seeded initialization: convolution and linear weights drawn from a
/// truncated normal with variance 1 / fan_in, small output-layer weights,
/// zero biases, identity batch norms and unit fusion weights.
template <typename Scalar>
DetectorWeights<Scalar> init_detector_weights(const DetectorConfig& config, Rng& rng) {
  auto w = DetectorWeights<Scalar>::allocate(config);
  w.visit([&](const std::string& name, Matrix<Scalar>& m, bool param) {
    if (!param || !name.ends_with(".weight") || name.find(".fusion.") != std::string::npos) return;
    const bool output = name.starts_with("rpn.") || name.find(".classifier.") != std::string::npos;
    fill_truncated_normal(m, output ? 0.01 : 1.0 / std::sqrt(static_cast<double>(m.cols())), rng);
  });
  return w;
}

/// Elementwise scalar conversion, e.g. double weights to autodiff weights.
template <typename To, typename From>
DetectorWeights<To> cast_weights(const DetectorWeights<From>& src) {
  auto dst = DetectorWeights<To>::allocate(src.config);
  auto copy = src;
  std::vector<const Matrix<From>*> tensors;
  copy.visit([&](const std::string&, Matrix<From>& m, bool) { tensors.push_back(&m); });
  size_t i = 0;
  dst.visit([&](const std::string&, Matrix<To>& m, bool) { m = tensors[i++]->template cast<To>(); });
  return dst;
}

}  // namespace cvl::detector
