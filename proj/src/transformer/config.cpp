// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/transformer/config.hpp"

#include "compactvl/core/types.hpp"

#include <algorithm>

namespace cvl::transformer {

void TransformerConfig::validate() const {
  auto fail = [this](const std::string& what) { throw ConfigError("transformer config '" + name + "': " + what); };
  if (layers <= 0 || hidden <= 0 || intermediate <= 0 || heads <= 0) fail("layers, hidden, intermediate and heads must be positive");
  if (hidden % heads != 0) fail("hidden size must be divisible by the head count");
  if (vocab_size <= 0 || max_positions <= 0) fail("vocabulary and position budgets must be positive");
  if (segments < 3) fail("layout needs three segments (sentence, visual, tags)");
  if (region_feature_dim <= 0 || box_encoding_dim <= 0) fail("region input dimensions must be positive");
  if (box_encoding_dim != 6) fail("box encodings have exactly 6 values");
  if (layer_norm_eps <= 0) fail("layer norm epsilon must be positive");
  if (dropout < 0 || dropout >= 1) fail("dropout must be in [0, 1)");
  if (init_std <= 0) fail("init std must be positive");
}

namespace {

struct Preset {
  const char* name;
  int layers, hidden, intermediate, heads;
};

constexpr Preset kPresets[] = {
    {"bert-base", 12, 768, 3072, 12}, {"bert-8", 8, 768, 3072, 12}, {"tinybert-6", 6, 768, 3072, 12},
    {"bert-4", 4, 768, 3072, 12},     {"minilm", 12, 384, 1536, 12}, {"tinybert-4", 4, 312, 1200, 12},
};

}  // namespace

const std::vector<std::string>& transformer_preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& p : kPresets) n.emplace_back(p.name);
    return n;
  }();
  return names;
}

bool is_transformer_preset(std::string_view name) {
  return std::any_of(std::begin(kPresets), std::end(kPresets), [&](const Preset& p) { return name == p.name; });
}

TransformerConfig transformer_preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      TransformerConfig c;
      c.name = p.name;
      c.layers = p.layers;
      c.hidden = p.hidden;
      c.intermediate = p.intermediate;
      c.heads = p.heads;
      return c;
    }
  }
  std::string known;
  for (const auto& n : transformer_preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown transformer preset '" + std::string(name) + "' (known: " + known + ")");
}

TransformerConfig toy_transformer_config(int vocab_size, int region_feature_dim) {
  TransformerConfig c;
  c.name = "toy";
  c.layers = 2;
  c.hidden = 32;
  c.intermediate = 64;
  c.heads = 4;
  c.vocab_size = vocab_size;
  c.max_positions = 64;
  c.region_feature_dim = region_feature_dim;
  return c;
}

}  // namespace cvl::transformer
