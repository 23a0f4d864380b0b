// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations shared by the unit tests and the
// acceptance runner. Nothing here asserts; callers compare the results.

#pragma once

#include "compactvl/detector/boxes.hpp"
#include "compactvl/detector/network.hpp"
#include "compactvl/detector/region_set.hpp"
#include "compactvl/transformer/input.hpp"
#include "compactvl/transformer/model.hpp"
#include "compactvl/transformer/tokenizer.hpp"

#include "fixtures.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace cvl::testing {

// ------------------------------------------------------------ boxes / NMS

inline detector::Box random_box(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  return {x1, y1, x2 + 0.5, y2 + 0.5};
}

/// A box survives iff no higher-priority survivor overlaps it by more than
/// the threshold; survivors beyond topk are dropped.
inline std::vector<int> reference_nms(const std::vector<detector::Box>& boxes, const std::vector<double>& scores,
                                      double thr, int topk) {
  const int n = static_cast<int>(boxes.size());
  auto before = [&](int a, int b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::vector<int> survivors;
  for (int round = 0; round < n; ++round) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (std::find(survivors.begin(), survivors.end(), i) != survivors.end()) continue;
      bool dominated = false;
      for (int j : survivors) dominated |= detector::iou(boxes[i], boxes[j]) > thr;
      if (!dominated && (best < 0 || before(i, best))) best = i;
    }
    if (best < 0) break;
    survivors.push_back(best);
  }
  if (static_cast<int>(survivors.size()) > topk) survivors.resize(topk);
  return survivors;
}

/// One random NMS problem of at most 10 boxes with coarse scores (forcing ties).
struct NmsTrial {
  std::vector<detector::Box> boxes;
  std::vector<double> scores;
  double threshold = 0.5;
  int topk = 10;
};

inline NmsTrial random_nms_trial(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 10), score_level(0, 6), topk(1, 10);
  std::uniform_real_distribution<double> thr(0.1, 0.9);
  NmsTrial t;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    t.boxes.push_back(random_box(rng, 30.0));
    t.scores.push_back(score_level(rng) / 6.0);
  }
  t.threshold = thr(rng);
  t.topk = topk(rng);
  return t;
}

// ---------------------------------------------------------------- RoIAlign

inline FeatureMap<double> random_map(std::mt19937_64& rng, Index c, Index h, Index w) {
  FeatureMap<double> m(c, h, w);
  std::normal_distribution<double> n(0, 1);
  for (Index i = 0; i < m.data.size(); ++i) m.data.data()[i] = n(rng);
  return m;
}

/// Dense interpolation: every cell contributes through the tent kernel.
inline double dense_sample(const FeatureMap<double>& m, Index c, double y, double x) {
  if (y < -1.0 || y > m.height || x < -1.0 || x > m.width) return 0.0;
  y = std::clamp(y, 0.0, m.height - 1.0);
  x = std::clamp(x, 0.0, m.width - 1.0);
  double v = 0.0;
  for (Index i = 0; i < m.height; ++i)
    for (Index j = 0; j < m.width; ++j)
      v += m.at(c, i, j) * std::max(0.0, 1.0 - std::abs(y - i)) * std::max(0.0, 1.0 - std::abs(x - j));
  return v;
}

/// Aligned RoIAlign (half-pixel offset) from dense samples; C x size^2.
inline Matrix<double> roi_align_oracle(const FeatureMap<double>& m, const detector::Box& box, int stride,
                                       int size, int ratio) {
  Matrix<double> out(m.channels(), size * size);
  const double bw = box.width() / stride / size, bh = box.height() / stride / size;
  for (Index c = 0; c < m.channels(); ++c)
    for (int by = 0; by < size; ++by)
      for (int bx = 0; bx < size; ++bx) {
        double v = 0.0;
        for (int iy = 0; iy < ratio; ++iy)
          for (int ix = 0; ix < ratio; ++ix)
            v += dense_sample(m, c, box.y1 / stride - 0.5 + (by + (iy + 0.5) / ratio) * bh,
                              box.x1 / stride - 0.5 + (bx + (ix + 0.5) / ratio) * bw);
        out(c, by * size + bx) = v / (ratio * ratio);
      }
  return out;
}

// -------------------------------------------------- detector gradients

using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;

/// Coordinates probed by a gradient check, in the double model and in its
/// forward-mode AD copy.
struct GradCase {
  std::vector<double*> primal;
  std::vector<AD*> dual;

  void add(Matrix<double>& primal_m, Matrix<AD>& dual_m, std::initializer_list<Index> flat) {
    for (Index i : flat) {
      primal.push_back(primal_m.data() + i);
      dual.push_back(dual_m.data() + i);
    }
  }
};

struct GradientComparison {
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
  double relative_error() const { return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12); }
};

/// Forward-mode derivatives against central differences, coordinate by coordinate.
inline GradientComparison compare_gradients(GradCase& g, const std::function<double()>& loss,
                                            const std::function<AD()>& loss_ad) {
  const Index n = static_cast<Index>(g.primal.size());
  for (Index i = 0; i < n; ++i) g.dual[i]->derivatives() = Eigen::VectorXd::Unit(n, i);
  GradientComparison r;
  r.analytic = loss_ad().derivatives();
  if (r.analytic.size() != n) r.analytic = Eigen::VectorXd::Zero(n);
  r.numeric.resize(n);
  for (Index i = 0; i < n; ++i) {
    double& x = *g.primal[i];
    const double saved = x, h = 1e-6 * std::max(1.0, std::abs(saved));
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    r.numeric(i) = (up - down) / (2 * h);
  }
  return r;
}

template <typename S>
S pyramid_loss(const detector::FeaturePyramid<S>& p) {
  S total(0);
  int k = 1;
  for (const auto& [s, map] : p) {
    total += map.data.cwiseProduct(map.data).sum() * S(1.0 / (k * map.data.size()));
    total += map.data.sum() * S(0.1 * k);
    ++k;
  }
  return total;
}

template <typename S>
S head_loss(const detector::BoxHeadOutput<S>& o, const std::map<int, detector::RpnLevelOutput<S>>& rpn) {
  S total = o.features.cwiseProduct(o.features).sum() * S(0.01) + o.class_logits.sum() * S(0.3) +
            o.attribute_logits.cwiseProduct(o.attribute_logits).sum() * S(0.05);
  for (const auto& [s, r] : rpn) total += r.logits.sum() * S(0.02 * s) + r.deltas.cwiseProduct(r.deltas).sum() * S(0.01);
  return total;
}

inline FeatureMap<double> random_image(Index size, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMap<double> img(3, size, size);
  fill_normal(img.data, 1.0, rng);
  return img;
}

inline detector::DetectorConfig small_toy_detector() {
  auto c = detector::toy_detector_config();
  c.input_size = 64;
  return c;
}

/// BiFPN fusion weights of the 64 px toy detector.
inline GradientComparison bifpn_fusion_gradients() {
  using namespace detector;
  Rng rng(31);
  auto w = init_detector_weights<double>(small_toy_detector(), rng);
  for (auto& layer : w.bifpn.layers)
    for (auto* nodes : {&layer.top_down, &layer.bottom_up})
      for (auto& [s, node] : *nodes) fill_uniform(node.fusion, 0.5, 1.5, rng);
  auto wa = cast_weights<AD>(w);
  const auto levels = forward_backbone(random_image(64, 32), w);
  FeaturePyramid<AD> levels_ad;
  for (const auto& [s, m] : levels) levels_ad[s] = m.cast<AD>();
  GradCase g;
  for (size_t r = 0; r < w.bifpn.layers.size(); ++r) {
    for (int s : {32, 4}) g.add(w.bifpn.layers[r].top_down.at(s).fusion, wa.bifpn.layers[r].top_down.at(s).fusion, {0, 1});
    for (int s : {16, 64}) g.add(w.bifpn.layers[r].bottom_up.at(s).fusion, wa.bifpn.layers[r].bottom_up.at(s).fusion, {0, 1});
  }
  return compare_gradients(
      g, [&] { return pyramid_loss(bifpn_fuse(levels, w)); }, [&] { return pyramid_loss(bifpn_fuse(levels_ad, wa)); });
}

/// RPN convolutions and box head linears of the 64 px toy detector.
inline GradientComparison rpn_and_box_head_gradients() {
  using namespace detector;
  Rng rng(51);
  const auto cfg = small_toy_detector();
  auto w = init_detector_weights<double>(cfg, rng);
  fill_normal(w.rpn.objectness_w, 0.3, rng);
  fill_normal(w.box_head.fc1_b, 0.5, rng);
  fill_normal(w.box_head.classifier_w, 0.3, rng);
  auto wa = cast_weights<AD>(w);
  const auto fused = bifpn_fuse(forward_backbone(random_image(64, 52), w), w);
  FeaturePyramid<AD> fused_ad;
  for (const auto& [s, m] : fused) fused_ad[s] = m.cast<AD>();
  const std::vector<Box> boxes{{2, 3, 30, 40}, {10, 10, 60, 50}, {0, 0, 64, 64}};
  const auto pooled = pool_regions(fused, boxes, cfg);
  const Matrix<AD> pooled_ad = pooled.cast<AD>();
  GradCase g;
  g.add(w.rpn.objectness_w, wa.rpn.objectness_w, {0, 4});
  g.add(w.rpn.regression_w, wa.rpn.regression_w, {1, 9});
  g.add(w.rpn.regression_b, wa.rpn.regression_b, {2});
  g.add(w.box_head.fc1_w, wa.box_head.fc1_w, {0, 77, 300});
  g.add(w.box_head.fc2_w, wa.box_head.fc2_w, {5, 40});
  g.add(w.box_head.classifier_w, wa.box_head.classifier_w, {3});
  g.add(w.box_head.attribute_w, wa.box_head.attribute_w, {1});
  g.add(w.box_head.fc2_b, wa.box_head.fc2_b, {7});
  return compare_gradients(
      g, [&] { return head_loss(box_head(pooled, w.box_head), rpn_head(fused, w.rpn)); },
      [&] { return head_loss(box_head(pooled_ad, wa.box_head), rpn_head(fused_ad, wa.rpn)); });
}

// ----------------------------------------------- transformer gradients

inline const transformer::Vocabulary& toy_vocab() {
  static const transformer::Vocabulary v({"a", "dog", "cat", "on", "the", "grass", "red", "car", "##s", "play", "##ing"});
  return v;
}

/// Loss touching every output head, so every parameter receives gradient.
struct ToyLoss {
  std::vector<int> mlm_positions;
  std::vector<int> mlm_labels;
  int itm_label = 1;
  Matrix<double> pooled_weights;

  double value(const transformer::TransformerOutput<double>& o) const {
    double loss = 0;
    for (size_t i = 0; i < mlm_positions.size(); ++i) {
      const auto row = o.mlm_logits.row(mlm_positions[i]);
      const double m = row.maxCoeff();
      loss += std::log((row.array() - m).exp().sum()) + m - row(mlm_labels[i]);
    }
    const auto itm = o.itm_logits.row(0);
    const double m = itm.maxCoeff();
    loss += std::log((itm.array() - m).exp().sum()) + m - itm(itm_label);
    loss += o.pooled.cwiseProduct(pooled_weights).sum();
    loss += 0.01 * o.hidden.squaredNorm();
    return loss;
  }

  transformer::OutputGrads<double> grads(const transformer::TransformerOutput<double>& o) const {
    transformer::OutputGrads<double> g;
    g.mlm_logits = Matrix<double>::Zero(o.mlm_logits.rows(), o.mlm_logits.cols());
    for (size_t i = 0; i < mlm_positions.size(); ++i) {
      const auto row = o.mlm_logits.row(mlm_positions[i]);
      Eigen::RowVectorXd p = (row.array() - row.maxCoeff()).exp();
      p /= p.sum();
      p(mlm_labels[i]) -= 1.0;
      g.mlm_logits.row(mlm_positions[i]) += p;
    }
    Eigen::RowVectorXd p = (o.itm_logits.row(0).array() - o.itm_logits.maxCoeff()).exp();
    p /= p.sum();
    p(itm_label) -= 1.0;
    g.itm_logits = p;
    g.pooled = pooled_weights;
    g.hidden = 0.02 * o.hidden;
    return g;
  }
};

struct TensorGradient {
  std::string name;
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
  double relative_error() const { return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-8); }
  /// Softmax is invariant to a per-row shift, so the key bias cannot change the loss.
  bool shift_invariant() const { return name.ends_with("attention.key.bias"); }
};

/// Analytic backward against central differences for every weight of a
/// 2-layer, hidden-8 transformer, optionally under fixed dropout masks.
inline std::vector<TensorGradient> transformer_gradients(bool with_dropout) {
  using namespace transformer;
  auto c = toy_transformer_config(16, 8);
  c.layers = 2;
  c.hidden = 8;
  c.intermediate = 12;
  c.heads = 2;
  c.max_positions = 16;
  c.init_std = 0.5;
  Rng rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random = [&](Index r, Index k) { return Matrix<double>::NullaryExpr(r, k, [&] { return u(rng); }).eval(); };
  auto w = init_transformer_weights<double>(c, rng);
  // Move norms and biases away from their defaults so their gradients are generic.
  w.visit([&](const std::string& name, Matrix<double>& m) {
    if (!name.ends_with(".weight")) m += 0.1 * random(m.rows(), m.cols());
  });
  const auto regions = random_regions(3, c.region_feature_dim, 20);
  const auto in = assemble_input(regions, {6, 7}, {8, 9, 10}, Task::kCaption, toy_vocab(), c);
  const ToyLoss loss{{1, 2, 5}, {3, 11, 14}, 0, random(1, c.hidden)};

  auto run = [&](ForwardCache<double>* cache) {
    Rng drop(77);
    const ForwardOptions opt{true, with_dropout, &drop};
    return forward(w, in, opt, cache);
  };
  ForwardCache<double> cache;
  const auto out = run(&cache);
  auto grads = TransformerWeights<double>::zeros(c);
  backward(w, in, cache, loss.grads(out), grads);

  std::vector<std::pair<std::string, Matrix<double>*>> params, gparams;
  w.visit([&](const std::string& n, Matrix<double>& m) { params.emplace_back(n, &m); });
  grads.visit([&](const std::string& n, Matrix<double>& m) { gparams.emplace_back(n, &m); });
  std::vector<TensorGradient> result;
  for (size_t t = 0; t < params.size(); ++t) {
    auto& m = *params[t].second;
    TensorGradient tg{params[t].first, Eigen::VectorXd(m.size()), Eigen::VectorXd(m.size())};
    for (Index i = 0; i < m.size(); ++i) {
      double& x = m.data()[i];
      const double saved = x, h = 1e-5;
      x = saved + h;
      const double up = loss.value(run(nullptr));
      x = saved - h;
      const double down = loss.value(run(nullptr));
      x = saved;
      tg.numeric(i) = (up - down) / (2 * h);
      tg.analytic(i) = gparams[t].second->data()[i];
    }
    result.push_back(std::move(tg));
  }
  return result;
}

// ------------------------------------------------------ caption unroll

/// Caption-task input for one decoding step, built position by position:
/// [CLS] prefix [MASK] [SEP] tags [SEP] regions, causal over the caption block.
inline transformer::FusionInput manual_caption_step(const transformer::Vocabulary& v, const std::vector<int>& prefix,
                                                    const std::vector<int>& tags, const detector::RegionSet& regions) {
  transformer::FusionInput in;
  in.task = transformer::Task::kCaption;
  in.layout = {static_cast<Index>(prefix.size()) + 1, static_cast<Index>(tags.size()), regions.size()};
  in.text_ids.push_back(v.cls_id());
  in.text_ids.insert(in.text_ids.end(), prefix.begin(), prefix.end());
  in.text_ids.push_back(v.mask_id());
  in.text_ids.push_back(v.sep_id());
  const Index caption_end = static_cast<Index>(in.text_ids.size());
  in.text_ids.insert(in.text_ids.end(), tags.begin(), tags.end());
  in.text_ids.push_back(v.sep_id());
  const Index text = static_cast<Index>(in.text_ids.size());
  const Index n = text + regions.size();
  for (Index i = 0; i < n; ++i)
    in.segment_ids.push_back(i < caption_end ? transformer::kSentenceSegment
                                             : i < text ? transformer::kTagSegment : transformer::kVisualSegment);
  const Index d = regions.feature_dim();
  in.region_inputs = MatrixXd::Zero(regions.size(), d + 6);
  for (Index r = 0; r < regions.size(); ++r) {
    const auto b = regions.boxes.row(r).cast<double>();
    const double W = regions.image_width, H = regions.image_height;
    in.region_inputs.row(r).head(d) = regions.features.row(r).cast<double>();
    in.region_inputs.row(r).tail(6) << b(0) / W, b(1) / H, b(2) / W, b(3) / H, (b(2) - b(0)) / W, (b(3) - b(1)) / H;
  }
  in.mask = transformer::AttentionMask::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const bool qi = i < caption_end, kj = j < caption_end;
      in.mask(i, j) = qi ? (!kj || j <= i) : !kj;
    }
  return in;
}

/// Greedy decoding by hand: argmax (lowest index on ties) at the [MASK]
/// position until [SEP] or `max_length` tokens.
template <typename S>
std::vector<int> manual_greedy_caption(const transformer::TransformerWeights<S>& w, const transformer::Vocabulary& v,
                                       const detector::RegionSet& regions, const std::vector<int>& tags,
                                       Index max_length) {
  std::vector<int> prefix;
  while (static_cast<Index>(prefix.size()) < max_length) {
    const auto in = manual_caption_step(v, prefix, tags, regions);
    const auto out = transformer::forward(w, in, transformer::ForwardOptions{true, false, nullptr});
    const auto row = out.mlm_logits.row(static_cast<Index>(prefix.size()) + 1);
    Index best = 0;
    for (Index k = 1; k < row.size(); ++k)
      if (row(k) > row(best)) best = k;
    if (best == v.sep_id()) break;
    prefix.push_back(static_cast<int>(best));
  }
  return prefix;
}

}  // namespace cvl::testing
