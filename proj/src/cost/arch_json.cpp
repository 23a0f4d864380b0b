// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/cost/arch_json.hpp"

#include <set>

namespace cvl::cost {

namespace detector = cvl::detector;
namespace transformer = cvl::transformer;
namespace {

using nlohmann::json;

/// Reads fields of one JSON object and rejects any key nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  template <typename T>
  void opt(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_detector(Fields& f, detector::DetectorConfig& c) {
  f.opt("name", c.name);
  f.opt("family", c.family);
  f.opt("input_size", c.input_size);
  f.opt("width_multiplier", c.width_multiplier);
  f.opt("depth_multiplier", c.depth_multiplier);
  f.opt("stem_channels", c.stem_channels);
  if (const json* stages = f.sub("base_stages")) {
    if (!stages->is_array()) throw ConfigError("detector.base_stages: expected an array");
    c.base_stages.clear();
    for (const auto& s : *stages) {
      Fields sf(s, "detector.base_stages[]");
      detector::MBConvStage st;
      sf.opt("expand_ratio", st.expand_ratio);
      sf.opt("kernel", st.kernel);
      sf.opt("stride", st.stride);
      sf.opt("out_channels", st.out_channels);
      sf.opt("repeats", st.repeats);
      sf.finish();
      c.base_stages.push_back(st);
    }
  }
  f.opt("se_ratio", c.se_ratio);
  f.opt("bifpn_channels", c.bifpn_channels);
  f.opt("bifpn_repeats", c.bifpn_repeats);
  if (const json* a = f.sub("anchors")) {
    Fields af(*a, "detector.anchors");
    af.opt("size_per_stride", c.anchors.size_per_stride);
    af.opt("scales", c.anchors.scales);
    af.opt("aspect_ratios", c.anchors.aspect_ratios);
    af.finish();
  }
  f.opt("rpn_layers", c.rpn_layers);
  f.opt("nms_iou_threshold", c.nms_iou_threshold);
  f.opt("score_floor", c.score_floor);
  f.opt("pre_nms_topk", c.pre_nms_topk);
  f.opt("post_nms_topk", c.post_nms_topk);
  f.opt("max_regions", c.max_regions);
  f.opt("min_box_size", c.min_box_size);
  f.opt("roi_output_size", c.roi_output_size);
  f.opt("roi_sampling_ratio", c.roi_sampling_ratio);
  f.opt("box_head_layers", c.box_head_layers);
  f.opt("feature_dim", c.feature_dim);
  f.opt("num_classes", c.num_classes);
  f.opt("num_attributes", c.num_attributes);
  f.opt("class_names", c.class_names);
}

void read_transformer(Fields& f, transformer::TransformerConfig& c) {
  f.opt("name", c.name);
  f.opt("layers", c.layers);
  f.opt("hidden", c.hidden);
  f.opt("intermediate", c.intermediate);
  f.opt("heads", c.heads);
  f.opt("vocab_size", c.vocab_size);
  f.opt("max_positions", c.max_positions);
  f.opt("segments", c.segments);
  f.opt("region_feature_dim", c.region_feature_dim);
  f.opt("box_encoding_dim", c.box_encoding_dim);
  f.opt("layer_norm_eps", c.layer_norm_eps);
  f.opt("dropout", c.dropout);
  f.opt("init_std", c.init_std);
}

void read_faster_rcnn(Fields& f, FasterRcnnC4Config& c) {
  f.opt("name", c.name);
  f.opt("stage_blocks", c.stage_blocks);
  f.opt("head_blocks", c.head_blocks);
  f.opt("input_height", c.input_height);
  f.opt("input_width", c.input_width);
  f.opt("anchors_per_location", c.anchors_per_location);
  f.opt("rpn_channels", c.rpn_channels);
  f.opt("roi_pool_size", c.roi_pool_size);
  f.opt("proposals", c.proposals);
  f.opt("num_classes", c.num_classes);
  f.opt("class_specific_box_regression", c.class_specific_box_regression);
}

}  // namespace

json detector_to_json(const detector::DetectorConfig& c) {
  json stages = json::array();
  for (const auto& s : c.base_stages)
    stages.push_back({{"expand_ratio", s.expand_ratio},
                      {"kernel", s.kernel},
                      {"stride", s.stride},
                      {"out_channels", s.out_channels},
                      {"repeats", s.repeats}});
  return {{"kind", "detector"},
          {"name", c.name},
          {"family", c.family},
          {"input_size", c.input_size},
          {"width_multiplier", c.width_multiplier},
          {"depth_multiplier", c.depth_multiplier},
          {"stem_channels", c.stem_channels},
          {"base_stages", stages},
          {"se_ratio", c.se_ratio},
          {"bifpn_channels", c.bifpn_channels},
          {"bifpn_repeats", c.bifpn_repeats},
          {"anchors",
           {{"size_per_stride", c.anchors.size_per_stride},
            {"scales", c.anchors.scales},
            {"aspect_ratios", c.anchors.aspect_ratios}}},
          {"rpn_layers", c.rpn_layers},
          {"nms_iou_threshold", c.nms_iou_threshold},
          {"score_floor", c.score_floor},
          {"pre_nms_topk", c.pre_nms_topk},
          {"post_nms_topk", c.post_nms_topk},
          {"max_regions", c.max_regions},
          {"min_box_size", c.min_box_size},
          {"roi_output_size", c.roi_output_size},
          {"roi_sampling_ratio", c.roi_sampling_ratio},
          {"box_head_layers", c.box_head_layers},
          {"feature_dim", c.feature_dim},
          {"num_classes", c.num_classes},
          {"num_attributes", c.num_attributes},
          {"class_names", c.class_names}};
}

json transformer_to_json(const transformer::TransformerConfig& c) {
  return {{"kind", "transformer"},
          {"name", c.name},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"intermediate", c.intermediate},
          {"heads", c.heads},
          {"vocab_size", c.vocab_size},
          {"max_positions", c.max_positions},
          {"segments", c.segments},
          {"region_feature_dim", c.region_feature_dim},
          {"box_encoding_dim", c.box_encoding_dim},
          {"layer_norm_eps", c.layer_norm_eps},
          {"dropout", c.dropout},
          {"init_std", c.init_std}};
}

json arch_to_json(const ArchConfig& config) {
  if (const auto* d = std::get_if<detector::DetectorConfig>(&config)) return detector_to_json(*d);
  if (const auto* t = std::get_if<transformer::TransformerConfig>(&config)) return transformer_to_json(*t);
  const auto& r = std::get<FasterRcnnC4Config>(config);
  return {{"kind", "faster-rcnn-c4"},
          {"name", r.name},
          {"stage_blocks", r.stage_blocks},
          {"head_blocks", r.head_blocks},
          {"input_height", r.input_height},
          {"input_width", r.input_width},
          {"anchors_per_location", r.anchors_per_location},
          {"rpn_channels", r.rpn_channels},
          {"roi_pool_size", r.roi_pool_size},
          {"proposals", r.proposals},
          {"num_classes", r.num_classes},
          {"class_specific_box_regression", r.class_specific_box_regression}};
}

ArchConfig arch_preset(const std::string& name) {
  if (name == "tee-toy") return detector::toy_detector_config();
  if (name.size() == 5 && name.starts_with("tee-") && name[4] >= '0' && name[4] <= '3')
    return detector::tee_preset(name[4] - '0');
  if (name == "r101-f") return r101_faster_rcnn();
  if (name == "transformer-toy") return transformer::toy_transformer_config();
  if (transformer::is_transformer_preset(name)) return transformer::transformer_preset(name);
  throw ConfigError("unknown architecture preset '" + name + "'");
}

ArchConfig arch_from_json(const json& j) {
  if (j.is_string()) return arch_preset(j.get<std::string>());
  Fields f(j, "arch");
  std::string kind, preset;
  f.opt("kind", kind);
  f.opt("preset", preset);

  ArchConfig config;
  if (!preset.empty()) {
    config = arch_preset(preset);
    const char* expected = std::holds_alternative<detector::DetectorConfig>(config)         ? "detector"
                           : std::holds_alternative<transformer::TransformerConfig>(config) ? "transformer"
                                                                                            : "faster-rcnn-c4";
    if (!kind.empty() && kind != expected)
      throw ConfigError("preset '" + preset + "' is a " + expected + ", not a " + kind);
  } else if (kind == "detector") {
    config = detector::DetectorConfig{};
  } else if (kind == "transformer") {
    config = transformer::TransformerConfig{};
  } else if (kind == "faster-rcnn-c4") {
    config = FasterRcnnC4Config{};
  } else {
    throw ConfigError("arch: 'kind' must be detector, transformer or faster-rcnn-c4");
  }

  std::visit(
      [&](auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, detector::DetectorConfig>) read_detector(f, c);
        else if constexpr (std::is_same_v<T, transformer::TransformerConfig>) read_transformer(f, c);
        else read_faster_rcnn(f, c);
        f.finish();
        c.validate();
      },
      config);
  return config;
}

detector::DetectorConfig detector_from_json(const json& j) {
  auto config = arch_from_json(j);
  if (auto* d = std::get_if<detector::DetectorConfig>(&config)) return *d;
  throw ConfigError("expected a detector config");
}

transformer::TransformerConfig transformer_from_json(const json& j) {
  auto config = arch_from_json(j);
  if (auto* t = std::get_if<transformer::TransformerConfig>(&config)) return *t;
  throw ConfigError("expected a transformer config");
}

}  // namespace cvl::cost
