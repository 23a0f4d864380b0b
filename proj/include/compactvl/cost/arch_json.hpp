// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/cost/cost_model.hpp"

#include "json.hpp"

namespace cvl::cost {

/// Architecture configs as JSON objects with a "kind" of "detector",
/// "transformer" or "faster-rcnn-c4" and an optional "preset" name whose
/// values the remaining keys override. Unknown keys are rejected.
nlohmann::json arch_to_json(const ArchConfig& config);
ArchConfig arch_from_json(const nlohmann::json& j);

nlohmann::json detector_to_json(const detector::DetectorConfig& c);
detector::DetectorConfig detector_from_json(const nlohmann::json& j);
nlohmann::json transformer_to_json(const transformer::TransformerConfig& c);
transformer::TransformerConfig transformer_from_json(const nlohmann::json& j);

/// Resolves a bare preset name ("tee-0", "minilm", "r101-f", "tee-toy", ...).
ArchConfig arch_preset(const std::string& name);

}  // namespace cvl::cost
