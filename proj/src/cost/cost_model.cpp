// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/cost/cost_model.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace cvl::cost {
namespace {

Count ceil_div(Count a, Count b) { return (a + b - 1) / b; }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

class LayerList {
 public:
  explicit LayerList(std::string component) : component_(std::move(component)) {}
  void component(std::string c) { component_ = std::move(c); }
  void add(std::string name, LayerSpec spec) {
    spec.validate();
    layers_.push_back({component_, std::move(name), std::move(spec)});
  }
  std::vector<NamedLayer> take() { return std::move(layers_); }

 private:
  std::string component_;
  std::vector<NamedLayer> layers_;
};

struct LevelShape {
  Count channels = 0;
  Count height = 0;
  Count width = 0;
};

std::vector<NamedLayer> expand_detector(const detector::DetectorConfig& c, const ImageInput& input) {
  c.validate();
  if (input.height <= 0 || input.width <= 0 || input.height % 64 != 0 || input.width % 64 != 0)
    throw ConfigError("detector input must be a positive multiple of 64 in both dimensions");
  const Count proposals = input.proposals.value_or(c.post_nms_topk);
  if (proposals <= 0) throw ConfigError("detector proposal count must be positive");

  LayerList L("backbone");
  const Count stem = c.scaled_stem_channels();
  Count h = ceil_div(input.height, 2), w = ceil_div(input.width, 2);
  L.add("stem.conv", LayerSpec::standard_conv(3, stem, 3, h, w, false));
  L.add("stem.bn", LayerSpec::norm(stem));

  std::map<int, LevelShape> levels;
  const auto blocks = c.blocks();
  for (size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    const Count mid = b.mid_channels();
    if (b.expand_ratio != 1) {
      L.add(p + "expand", LayerSpec::pointwise_conv(b.in_channels, mid, h, w, false));
      L.add(p + "expand_bn", LayerSpec::norm(mid));
    }
    const Count ho = ceil_div(h, b.stride), wo = ceil_div(w, b.stride);
    L.add(p + "depthwise", LayerSpec::depthwise_conv(mid, b.kernel, ho, wo, false));
    L.add(p + "depthwise_bn", LayerSpec::norm(mid));
    L.add(p + "se_reduce", LayerSpec::pointwise_conv(mid, b.se_channels, 1, 1, true));
    L.add(p + "se_expand", LayerSpec::pointwise_conv(b.se_channels, mid, 1, 1, true));
    L.add(p + "project", LayerSpec::pointwise_conv(mid, b.out_channels, ho, wo, false));
    L.add(p + "project_bn", LayerSpec::norm(b.out_channels));
    h = ho, w = wo;
    levels[b.output_stride] = {b.out_channels, h, w};
  }

  L.component("bifpn");
  const Count C = c.bifpn_channels;
  std::map<int, LevelShape> fused;
  for (int s : detector::kBackboneStrides) {
    const auto& lv = levels.at(s);
    const std::string p = "lateral." + std::to_string(s) + ".";
    L.add(p + "conv", LayerSpec::pointwise_conv(lv.channels, C, lv.height, lv.width, true));
    L.add(p + "bn", LayerSpec::norm(C));
    fused[s] = {C, lv.height, lv.width};
  }
  {
    const auto& lv = levels.at(32);
    L.add("lateral.64.conv", LayerSpec::pointwise_conv(lv.channels, C, lv.height, lv.width, true));
    L.add("lateral.64.bn", LayerSpec::norm(C));
    fused[64] = {C, ceil_div(lv.height, 2), ceil_div(lv.width, 2)};
  }
  auto node = [&](const std::string& p, int stride, Count inputs) {
    const auto& lv = fused.at(stride);
    L.add(p + "fusion", LayerSpec::weighted_fusion(inputs));
    L.add(p + "depthwise", LayerSpec::depthwise_conv(C, 3, lv.height, lv.width, false));
    L.add(p + "pointwise", LayerSpec::pointwise_conv(C, C, lv.height, lv.width, true));
    L.add(p + "bn", LayerSpec::norm(C));
  };
  for (int r = 0; r < c.bifpn_repeats; ++r) {
    const std::string p = "layers." + std::to_string(r) + ".";
    for (int s : {32, 16, 8, 4}) node(p + "top_down." + std::to_string(s) + ".", s, 2);
    for (int s : {8, 16, 32}) node(p + "bottom_up." + std::to_string(s) + ".", s, 3);
    node(p + "bottom_up.64.", 64, 2);
  }

  L.component("rpn");
  // One set of 1x1 weights shared by every level: expressed as a single map
  // holding all anchor positions.
  Count positions = 0;
  for (const auto& [s, lv] : fused) positions += lv.height * lv.width;
  const Count A = c.anchors.per_location();
  L.add("objectness", LayerSpec::pointwise_conv(C, A, positions, 1, true));
  L.add("regression", LayerSpec::pointwise_conv(C, 4 * A, positions, 1, true));
  L.add("nms", LayerSpec::nms(std::min<Count>(c.pre_nms_topk, positions * A)));

  L.component("box_head");
  const Count roi = c.roi_output_size;
  L.add("roi_align", LayerSpec::roi_align(C, roi, proposals));
  L.add("fc1", LayerSpec::linear(C * roi * roi, c.feature_dim, proposals));
  L.add("fc2", LayerSpec::linear(c.feature_dim, c.feature_dim, proposals));
  L.add("classifier", LayerSpec::linear(c.feature_dim, c.num_classes + 1, proposals));

  L.component("attribute_head");
  L.add("classifier", LayerSpec::linear(c.feature_dim, c.num_attributes + 1, proposals));
  return L.take();
}

std::vector<NamedLayer> expand_transformer(const transformer::TransformerConfig& c, const SequenceInput& in) {
  c.validate();
  if (in.regions <= 0 || in.text_tokens <= 0)
    throw ConfigError("transformer cost needs at least one region and one text token");
  if (in.text_tokens > c.max_positions) throw ConfigError("text tokens exceed the position budget");
  const Count d = c.hidden, V = c.vocab_size, n = in.regions + in.text_tokens;

  LayerList L("embedding");
  L.add("word", LayerSpec::embedding(V, d));
  L.add("position", LayerSpec::embedding(c.max_positions, d));
  L.add("segment", LayerSpec::embedding(c.segments, d));
  L.add("region_projection", LayerSpec::linear(c.region_input_dim(), d, in.regions));
  L.add("norm", LayerSpec::norm(d));

  L.component("encoder");
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    L.add(p + "attention", LayerSpec::attention_block(d, c.heads, n));
    L.add(p + "attention_norm", LayerSpec::norm(d));
    L.add(p + "ffn", LayerSpec::ffn_block(d, c.intermediate, n));
    L.add(p + "ffn_norm", LayerSpec::norm(d));
  }

  L.component("pooler");
  L.add("dense", LayerSpec::linear(d, d, 1));
  L.add("itm", LayerSpec::linear(d, 2, 1));

  L.component("decoder");
  L.add("transform", LayerSpec::linear(d, d, in.text_tokens));
  L.add("transform_norm", LayerSpec::norm(d));
  L.add("vocab", LayerSpec::linear(d, V, in.text_tokens));
  return L.take();
}

std::vector<NamedLayer> expand_faster_rcnn(const FasterRcnnC4Config& c, const ImageInput& in) {
  c.validate();
  if (in.height <= 0 || in.width <= 0) throw ConfigError("image input must be positive");
  const Count proposals = in.proposals.value_or(c.proposals);
  if (proposals <= 0) throw ConfigError("proposal count must be positive");

  LayerList L("backbone");
  Count h = ceil_div(in.height, 2), w = ceil_div(in.width, 2);
  L.add("conv1", LayerSpec::standard_conv(3, 64, 7, h, w, false));
  L.add("bn1", LayerSpec::norm(64));
  h = ceil_div(h, 2), w = ceil_div(w, 2);  // max pool

  // Bottleneck with the stride on the first 1x1 (Caffe layout). `tiles`
  // lays per-RoI maps side by side so one spec covers every RoI.
  auto bottleneck = [&](const std::string& p, Count cin, Count mid, Count cout, Count stride, bool shortcut,
                        Count& bh, Count& bw, Count tiles) {
    const Count ho = ceil_div(bh, stride), wo = ceil_div(bw, stride);
    L.add(p + "conv1", LayerSpec::pointwise_conv(cin, mid, ho, wo * tiles, false));
    L.add(p + "bn1", LayerSpec::norm(mid));
    L.add(p + "conv2", LayerSpec::standard_conv(mid, mid, 3, ho, wo * tiles, false));
    L.add(p + "bn2", LayerSpec::norm(mid));
    L.add(p + "conv3", LayerSpec::pointwise_conv(mid, cout, ho, wo * tiles, false));
    L.add(p + "bn3", LayerSpec::norm(cout));
    if (shortcut) {
      L.add(p + "shortcut", LayerSpec::pointwise_conv(cin, cout, ho, wo * tiles, false));
      L.add(p + "shortcut_bn", LayerSpec::norm(cout));
    }
    bh = ho, bw = wo;
  };

  Count cin = 64;
  const Count mids[] = {64, 128, 256};
  for (size_t s = 0; s < c.stage_blocks.size(); ++s) {
    const Count mid = mids[s], cout = mid * 4;
    for (int i = 0; i < c.stage_blocks[s]; ++i) {
      const Count stride = (i == 0 && s > 0) ? 2 : 1;
      bottleneck("res" + std::to_string(s + 2) + "." + std::to_string(i) + ".", cin, mid, cout, stride, i == 0, h, w, 1);
      cin = cout;
    }
  }

  L.component("rpn");
  const Count A = c.anchors_per_location;
  L.add("conv", LayerSpec::standard_conv(cin, c.rpn_channels, 3, h, w, true));
  L.add("objectness", LayerSpec::pointwise_conv(c.rpn_channels, 2 * A, h, w, true));
  L.add("regression", LayerSpec::pointwise_conv(c.rpn_channels, 4 * A, h, w, true));
  L.add("nms", LayerSpec::nms(h * w * A));

  L.component("box_head");
  L.add("roi_pool", LayerSpec::roi_align(cin, c.roi_pool_size, proposals));
  Count rh = c.roi_pool_size, rw = c.roi_pool_size;
  for (int i = 0; i < c.head_blocks; ++i)
    bottleneck("res5." + std::to_string(i) + ".", i == 0 ? cin : 2048, 512, 2048, i == 0 ? 2 : 1, i == 0, rh, rw,
               proposals);
  L.add("classifier", LayerSpec::linear(2048, c.num_classes + 1, proposals));
  const Count reg = c.class_specific_box_regression ? 4 * (c.num_classes + 1) : 4;
  L.add("box_regression", LayerSpec::linear(2048, reg, proposals));
  return L.take();
}

}  // namespace

void FasterRcnnC4Config::validate() const {
  if (stage_blocks.size() != 3) throw ConfigError("ResNet-C4 needs exactly three backbone stages (res2..res4)");
  for (int b : stage_blocks)
    if (b <= 0) throw ConfigError("ResNet stage block counts must be positive");
  if (head_blocks <= 0 || input_height <= 0 || input_width <= 0 || anchors_per_location <= 0 || rpn_channels <= 0 ||
      roi_pool_size <= 0 || proposals <= 0 || num_classes <= 0)
    throw ConfigError("ResNet-C4 config fields must be positive");
}

FasterRcnnC4Config r101_faster_rcnn() { return FasterRcnnC4Config{}; }

std::string arch_name(const ArchConfig& config) {
  return std::visit([](const auto& c) { return c.name; }, config);
}

InputSpec default_input(const ArchConfig& config) {
  return std::visit(Overloaded{
                        [](const detector::DetectorConfig& c) -> InputSpec {
                          return ImageInput{c.input_size, c.input_size, std::nullopt};
                        },
                        [](const transformer::TransformerConfig&) -> InputSpec { return SequenceInput{50, 35}; },
                        [](const FasterRcnnC4Config& c) -> InputSpec {
                          return ImageInput{c.input_height, c.input_width, std::nullopt};
                        },
                    },
                    config);
}

std::vector<NamedLayer> expand_layers(const ArchConfig& config, const InputSpec& input) {
  return std::visit(Overloaded{
                        [&](const detector::DetectorConfig& c) {
                          if (auto* img = std::get_if<ImageInput>(&input)) return expand_detector(c, *img);
                          throw ConfigError("detector configs take an image input");
                        },
                        [&](const transformer::TransformerConfig& c) {
                          if (auto* seq = std::get_if<SequenceInput>(&input)) return expand_transformer(c, *seq);
                          throw ConfigError("transformer configs take a (regions, text tokens) input");
                        },
                        [&](const FasterRcnnC4Config& c) {
                          if (auto* img = std::get_if<ImageInput>(&input)) return expand_faster_rcnn(c, *img);
                          throw ConfigError("detector configs take an image input");
                        },
                    },
                    config);
}

Count CostReport::total_params() const {
  return std::accumulate(components.begin(), components.end(), Count{0},
                         [](Count a, const ComponentCost& c) { return a + c.params; });
}

Count CostReport::total_flops() const {
  return std::accumulate(components.begin(), components.end(), Count{0},
                         [](Count a, const ComponentCost& c) { return a + c.flops; });
}

const ComponentCost* CostReport::find(std::string_view component) const {
  for (const auto& c : components)
    if (c.name == component) return &c;
  return nullptr;
}

void CostReport::add(const std::string& component, const LayerCost& cost) {
  auto it = std::find_if(components.begin(), components.end(), [&](const auto& c) { return c.name == component; });
  if (it == components.end()) {
    components.push_back({component, 0, 0});
    it = std::prev(components.end());
  }
  it->params += cost.params;
  it->flops += cost.flops;
}

CostReport count_arch(const ArchConfig& config, const InputSpec& input) {
  CostReport report;
  report.name = arch_name(config);
  for (const auto& layer : expand_layers(config, input)) report.add(layer.component, count_layer(layer.spec));
  return report;
}

const ComparisonRow& ComparisonTable::row(std::string_view name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw std::out_of_range("comparison table has no row '" + std::string(name) + "'");
}

ComparisonTable compare(std::span<const CostReport> reports, std::string_view baseline) {
  if (reports.size() < 2) throw std::invalid_argument("compare needs at least two reports");
  const CostReport* base = &reports.front();
  if (!baseline.empty()) {
    auto it = std::find_if(reports.begin(), reports.end(), [&](const auto& r) { return r.name == baseline; });
    if (it == reports.end()) throw std::invalid_argument("baseline '" + std::string(baseline) + "' is not among the reports");
    base = &*it;
  }
  const double bp = static_cast<double>(base->total_params());
  const double bf = static_cast<double>(base->total_flops());
  ComparisonTable table;
  table.baseline = base->name;
  for (const auto& r : reports) {
    ComparisonRow row;
    row.name = r.name;
    row.params = r.total_params();
    row.flops = r.total_flops();
    row.params_ratio = bp > 0 ? row.params / bp : 0.0;
    row.flops_ratio = bf > 0 ? row.flops / bf : 0.0;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace cvl::cost
