// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/cost/cost_model.hpp"
#include "compactvl/harness/experiment.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace cvl::harness {

/// Preset name or architecture JSON path.
cost::ArchConfig resolve_arch(const std::string& ref);
detector::DetectorConfig resolve_detector(const std::string& ref);
transformer::TransformerConfig resolve_transformer(const std::string& ref);

/// Wall time of one stage, one sample per repetition.
struct StageTiming {
  std::string name;
  std::vector<double> samples_ms;
  Count macs = 0;  // live multiply-accumulates in one repetition

  double mean_ms() const;
  double std_ms() const;  // sample standard deviation
};

struct ModelCost {
  std::string name;
  Count params = 0;
  Count flops = 0;
};

struct BenchmarkResult {
  std::string config_hash;
  std::uint64_t seed = 0;
  int repetitions = 0;
  int threads = 1;
  std::string task;
  int images = 0;
  std::vector<StageTiming> stages;  // feature_extraction, fusion_forward, task_head
  ModelCost detector;               // cost model at the detector's native input
  ModelCost transformer;            // cost model at 50 regions + 35 tokens
  nlohmann::json fingerprint;

  const StageTiming& stage(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Runs feature extraction, fusion forward and the task head on every input
/// with seeded random weights, `repetitions` times, serially. Throws
/// ConfigError for fewer than 3 repetitions.
BenchmarkResult run_benchmark(const ExperimentConfig& config);

/// Bundled schema for benchmark JSON.
nlohmann::json benchmark_schema();

/// Checks `instance` against a JSON Schema subset: type, required,
/// properties, additionalProperties, items, minItems, minimum, enum and
/// local "#/..." references.
/// Returns one message per violation.
std::vector<std::string> validate_schema(const nlohmann::json& instance, const nlohmann::json& schema);

}  // namespace cvl::harness
