// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/transformer/input.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cvl::harness {

/// One run of the pipeline. Architectures are preset names or paths to
/// architecture JSON files.
///
/// Config files are JSON objects with the keys below; unknown keys are
/// rejected and `seed` is mandatory. Relative paths resolve against the
/// config file's directory.
struct ExperimentConfig {
  std::string detector = "tee-toy";
  std::string transformer = "transformer-toy";
  transformer::Task task = transformer::Task::kCaption;
  std::vector<std::filesystem::path> inputs;  // PPM images; empty uses a synthetic image
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_dir;           // empty uses the output root
  int repetitions = 3;
  int threads = 1;
  int caption_max_length = 20;

  void validate() const;
  nlohmann::json to_json() const;
  /// Hash of the canonical JSON form.
  std::string hash() const;

  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Compiler, library versions, OS, CPU count and declared thread count.
nlohmann::json environment_fingerprint(int threads);

/// $COMPACTVL_OUTPUT_ROOT, else ./runs.
std::filesystem::path output_root();

/// Creates `<root>/<kind>-<hash>` holding config.json and run.json (config
/// hash, seed, fingerprint) and returns it.
std::filesystem::path prepare_run_dir(const std::string& kind, const nlohmann::json& config, std::uint64_t seed,
                                      int threads, const std::filesystem::path& root = output_root());

}  // namespace cvl::harness
