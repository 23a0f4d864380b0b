// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/cost/arch_json.hpp"
#include "compactvl/cost/cost_model.hpp"
#include "compactvl/cost/layer_spec.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

namespace cvl::cost {
namespace {

TEST(CountLayer, LinearWithBias) {
  const auto c = count_layer(LayerSpec::linear(1024, 1024, 1, true));
  EXPECT_EQ(c.params, 1'049'600);
  EXPECT_EQ(c.flops, 1'048'576);
}

TEST(CountLayer, PointwiseConvOnSinglePixel) {
  EXPECT_EQ(count_layer(LayerSpec::pointwise_conv(64, 64, 1, 1, true)).params, 4'160);
}

TEST(CountLayer, ConvolutionClosedForms) {
  const auto std_conv = count_layer(LayerSpec::standard_conv(3, 32, 3, 10, 12, false));
  EXPECT_EQ(std_conv.params, 3 * 32 * 9);
  EXPECT_EQ(std_conv.flops, 10 * 12 * 3 * 32 * 9);
  const auto dw = count_layer(LayerSpec::depthwise_conv(16, 5, 7, 7, true));
  EXPECT_EQ(dw.params, 16 * 25 + 16);
  EXPECT_EQ(dw.flops, 49 * 16 * 25);
  EXPECT_EQ(count_layer(LayerSpec::norm(48)).params, 96);
  EXPECT_EQ(count_layer(LayerSpec::norm(48)).flops, 0);
  EXPECT_EQ(count_layer(LayerSpec::embedding(30522, 384)).params, 30522 * 384);
  EXPECT_EQ(count_layer(LayerSpec::embedding(30522, 384)).flops, 0);
  EXPECT_EQ(count_layer(LayerSpec::weighted_fusion(3)).params, 3);
  EXPECT_EQ(count_layer(LayerSpec::roi_align(64, 4, 300)).flops, 0);
  EXPECT_EQ(count_layer(LayerSpec::nms(1000)).params, 0);
}

// Walks every multiply of a multi-head attention block the way a naive
// implementation would and counts them one at a time.
Count enumerate_attention_macs(Count d, Count heads, Count n) {
  Count macs = 0;
  const Count hd = d / heads;
  for (int proj = 0; proj < 4; ++proj)  // Q, K, V and output projections
    for (Count t = 0; t < n; ++t)
      for (Count o = 0; o < d; ++o)
        for (Count i = 0; i < d; ++i) ++macs;
  for (Count h = 0; h < heads; ++h) {
    for (Count q = 0; q < n; ++q)  // scores = Q K^T
      for (Count k = 0; k < n; ++k)
        for (Count e = 0; e < hd; ++e) ++macs;
    for (Count q = 0; q < n; ++q)  // context = P V
      for (Count e = 0; e < hd; ++e)
        for (Count k = 0; k < n; ++k) ++macs;
  }
  return macs;
}

TEST(CountLayer, AttentionBlockMatchesEnumeration) {
  const Count enumerated = enumerate_attention_macs(384, 12, 85);
  EXPECT_EQ(enumerated, 55'683'840);
  const auto c = count_layer(LayerSpec::attention_block(384, 12, 85));
  EXPECT_EQ(c.flops, enumerated);
  EXPECT_EQ(c.params, 4 * (384 * 384 + 384));
}

TEST(CountLayer, FfnBlock) {
  const auto c = count_layer(LayerSpec::ffn_block(384, 1536, 85));
  EXPECT_EQ(c.params, 2 * 384 * 1536 + 1536 + 384);
  EXPECT_EQ(c.flops, 2 * 85 * 384 * 1536);
}

TEST(LayerSpecValidation, RejectsMissingExtraAndNonPositiveFields) {
  LayerSpec missing = LayerSpec::linear(4, 4, 1);
  missing.out.reset();
  EXPECT_THROW(count_layer(missing), ConfigError);
  LayerSpec extra = LayerSpec::linear(4, 4, 1);
  extra.heads = 2;
  EXPECT_THROW(count_layer(extra), ConfigError);
  LayerSpec zero = LayerSpec::linear(4, 4, 1);
  zero.in = 0;
  EXPECT_THROW(count_layer(zero), ConfigError);
  EXPECT_THROW(count_layer(LayerSpec::attention_block(10, 3, 5)), ConfigError);
  EXPECT_THROW(parse_layer_kind("dilated-conv"), ConfigError);
  EXPECT_EQ(parse_layer_kind("attention-block"), LayerKind::kAttentionBlock);
}

TEST(CountArch, TransformerPresets) {
  const auto minilm = count_arch(transformer::transformer_preset("minilm"), SequenceInput{50, 35});
  EXPECT_NEAR(minilm.total_params() / 1e6, 45.7, 0.05 * 45.7);
  EXPECT_NEAR(minilm.total_flops() / 1e9, 2.3, 0.05 * 2.3);
  const auto base = count_arch(transformer::transformer_preset("bert-base"), SequenceInput{50, 35});
  EXPECT_NEAR(base.total_params() / 1e6, 134.3, 0.05 * 134.3);
  EXPECT_NEAR(base.total_flops() / 1e9, 8.2, 0.05 * 8.2);
  for (const char* c : {"embedding", "encoder", "decoder"}) EXPECT_NE(minilm.find(c), nullptr) << c;
}

TEST(CountArch, TeeZeroComponents) {
  const auto r = count_arch(detector::tee_preset(0));
  EXPECT_NEAR(r.total_flops() / 1e9, 4.4, 0.10 * 4.4);
  const auto* box = r.find("box_head");
  const auto* rpn = r.find("rpn");
  ASSERT_NE(box, nullptr);
  ASSERT_NE(rpn, nullptr);
  EXPECT_NEAR(box->params / 1e6, 3.7, 0.1);
  EXPECT_NEAR(box->flops / 1e9, 1.1, 0.05);
  EXPECT_LT(rpn->params, 10'000);
  EXPECT_NEAR(rpn->flops / 1e9, 0.03, 0.01);
}

TEST(CountArch, RejectsIncompatibleInput) {
  EXPECT_THROW(count_arch(transformer::transformer_preset("minilm"), ImageInput{64, 64, std::nullopt}), ConfigError);
  EXPECT_THROW(count_arch(detector::tee_preset(0), SequenceInput{}), ConfigError);
  EXPECT_THROW(count_arch(detector::tee_preset(0), ImageInput{100, 100, std::nullopt}), ConfigError);
}

std::vector<ArchConfig> sample_architectures() {
  return {detector::tee_preset(0), detector::tee_preset(2), detector::toy_detector_config(), r101_faster_rcnn(),
          transformer::transformer_preset("minilm"), transformer::transformer_preset("tinybert-4"),
          transformer::toy_transformer_config()};
}

TEST(CostProperties, TotalsAreSumOfExpandedLayers) {
  for (const auto& config : sample_architectures()) {
    const auto input = default_input(config);
    Count params = 0, flops = 0;
    for (const auto& layer : expand_layers(config, input)) {
      const auto c = count_layer(layer.spec);
      params += c.params;
      flops += c.flops;
    }
    const auto report = count_arch(config, input);
    EXPECT_EQ(report.total_params(), params) << arch_name(config);
    EXPECT_EQ(report.total_flops(), flops) << arch_name(config);
    Count component_params = 0;
    for (const auto& c : report.components) {
      EXPECT_GE(c.params, 0);
      EXPECT_GE(c.flops, 0);
      component_params += c.params;
    }
    EXPECT_EQ(component_params, report.total_params());
  }
}

TEST(CostProperties, MonotoneInEveryShapeField) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Count> small(1, 40);
  const std::vector<LayerSpec> bases = {
      LayerSpec::standard_conv(3, 8, 3, 9, 9, true), LayerSpec::depthwise_conv(8, 3, 5, 6, false),
      LayerSpec::pointwise_conv(8, 16, 4, 4, true),  LayerSpec::linear(12, 20, 7),
      LayerSpec::embedding(100, 16),                 LayerSpec::attention_block(24, 4, 10),
      LayerSpec::ffn_block(24, 96, 10),              LayerSpec::norm(32),
      LayerSpec::roi_align(8, 4, 10),                LayerSpec::nms(50),
      LayerSpec::weighted_fusion(2)};
  for (int trial = 0; trial < 200; ++trial) {
    for (const auto& base : bases) {
      std::optional<Count> LayerSpec::* const fields[] = {&LayerSpec::in,     &LayerSpec::out,    &LayerSpec::kernel,
                                                          &LayerSpec::height, &LayerSpec::width,  &LayerSpec::tokens,
                                                          &LayerSpec::hidden, &LayerSpec::intermediate, &LayerSpec::count};
      for (auto field : fields) {
        if (!(base.*field)) continue;
        LayerSpec bigger = base;
        Count step = small(rng);
        if (base.heads && field == &LayerSpec::hidden) step *= *base.heads;  // keep heads | hidden
        *(bigger.*field) += step;
        const auto a = count_layer(base), b = count_layer(bigger);
        EXPECT_GE(b.params, a.params) << to_string(base.kind);
        EXPECT_GE(b.flops, a.flops) << to_string(base.kind);
      }
    }
  }
}

TEST(CostProperties, DoublingSequenceIncreasesFlopsOnly) {
  for (const auto& name : transformer::transformer_preset_names()) {
    const auto config = transformer::transformer_preset(name);
    const auto a = count_arch(config, SequenceInput{50, 35});
    const auto b = count_arch(config, SequenceInput{100, 70});
    EXPECT_GT(b.total_flops(), a.total_flops()) << name;
    EXPECT_EQ(b.total_params(), a.total_params()) << name;
  }
}

TEST(Compare, SelfComparisonIsUnity) {
  const auto r = count_arch(detector::tee_preset(0));
  auto copy = r;
  copy.name = "tee-0-copy";
  const std::vector<CostReport> reports{r, copy};
  const auto table = compare(reports);
  for (const auto& row : table.rows) {
    EXPECT_DOUBLE_EQ(row.params_ratio, 1.0);
    EXPECT_DOUBLE_EQ(row.flops_ratio, 1.0);
  }
}

TEST(Compare, MiniLmAgainstBertBase) {
  const std::vector<CostReport> reports{count_arch(transformer::transformer_preset("minilm")),
                                        count_arch(transformer::transformer_preset("bert-base"))};
  const auto table = compare(reports, "bert-base");
  EXPECT_NEAR(table.row("minilm").params_ratio, 0.340, 0.02);
  EXPECT_NEAR(table.row("minilm").flops_ratio, 0.280, 0.02);
}

TEST(Compare, RejectsTooFewReportsAndUnknownBaseline) {
  const std::vector<CostReport> one{count_arch(transformer::transformer_preset("minilm"))};
  EXPECT_THROW(compare(one), std::invalid_argument);
  const std::vector<CostReport> none;
  EXPECT_THROW(compare(none), std::invalid_argument);
  const std::vector<CostReport> two{one[0], one[0]};
  EXPECT_THROW(compare(two, "nope"), std::invalid_argument);
}

TEST(ArchJson, RoundTripsAndRejectsUnknownKeys) {
  for (const auto& config : sample_architectures()) {
    const auto j = arch_to_json(config);
    const auto back = arch_from_json(j);
    EXPECT_EQ(arch_to_json(back), j);
  }
  EXPECT_THROW(arch_from_json(nlohmann::json{{"preset", "minilm"}, {"hiden", 10}}), ConfigError);
  EXPECT_THROW(arch_from_json(nlohmann::json{{"kind", "detector"}, {"anchors", {{"scale", {1.0}}}}}), ConfigError);
  const auto tweaked = transformer_from_json(nlohmann::json{{"preset", "minilm"}, {"layers", 6}});
  EXPECT_EQ(tweaked.layers, 6);
  EXPECT_EQ(tweaked.hidden, 384);
  EXPECT_THROW(arch_from_json(nlohmann::json{{"preset", "tee-0"}, {"kind", "transformer"}}), ConfigError);
}

}  // namespace
}  // namespace cvl::cost
