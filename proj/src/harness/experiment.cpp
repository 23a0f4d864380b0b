// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/harness/experiment.hpp"

#include "compactvl/core/hash.hpp"
#include "compactvl/core/types.hpp"

#include <Eigen/Core>
#include <sys/utsname.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#ifndef COMPACTVL_VERSION
#define COMPACTVL_VERSION "0.0.0"
#endif
#ifndef COMPACTVL_BUILD_TYPE
#define COMPACTVL_BUILD_TYPE "unknown"
#endif

namespace cvl::harness {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (!seed) throw ConfigError("experiment config: seed is mandatory");
  if (detector.empty() || transformer.empty()) throw ConfigError("experiment config: detector and transformer are required");
  if (repetitions < 3) throw ConfigError("experiment config: at least 3 repetitions are required");
  if (threads < 1) throw ConfigError("experiment config: threads must be positive");
  if (caption_max_length < 1) throw ConfigError("experiment config: caption_max_length must be positive");
  for (const auto& p : inputs)
    if (!p.is_absolute()) throw ConfigError("experiment config: input path '" + p.string() + "' is not resolved");
}

json ExperimentConfig::to_json() const {
  json in = json::array();
  for (const auto& p : inputs) in.push_back(p.string());
  return {{"detector", detector},
          {"transformer", transformer},
          {"task", std::string(transformer::to_string(task))},
          {"inputs", in},
          {"seed", seed ? json(*seed) : json()},
          {"output_dir", output_dir.string()},
          {"repetitions", repetitions},
          {"threads", threads},
          {"caption_max_length", caption_max_length}};
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

namespace {

std::string resolve_arch(const std::string& value, const std::filesystem::path& base) {
  const std::filesystem::path p(value);
  if (p.extension() == ".json") return std::filesystem::weakly_canonical(p.is_absolute() ? p : base / p).string();
  return value;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::set<std::string> known{"detector", "transformer", "task",    "inputs",
                                           "seed",     "output_dir",  "repetitions", "threads",
                                           "caption_max_length"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("experiment config: unknown key '" + k + "'");
  const auto base = base_dir.empty() ? std::filesystem::current_path() : std::filesystem::absolute(base_dir);
  ExperimentConfig c;
  try {
    if (j.contains("detector")) c.detector = resolve_arch(j.at("detector").get<std::string>(), base);
    if (j.contains("transformer")) c.transformer = resolve_arch(j.at("transformer").get<std::string>(), base);
    if (j.contains("task")) c.task = transformer::parse_task(j.at("task").get<std::string>());
    if (j.contains("inputs"))
      for (const auto& p : j.at("inputs")) {
        const std::filesystem::path path(p.get<std::string>());
        c.inputs.push_back(std::filesystem::weakly_canonical(path.is_absolute() ? path : base / path));
      }
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir") && !j.at("output_dir").get<std::string>().empty()) {
      const std::filesystem::path out(j.at("output_dir").get<std::string>());
      c.output_dir = std::filesystem::weakly_canonical(out.is_absolute() ? out : base / out);
    }
    if (j.contains("repetitions")) c.repetitions = j.at("repetitions").get<int>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("caption_max_length")) c.caption_max_length = j.at("caption_max_length").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, std::filesystem::absolute(path).parent_path());
}

json environment_fingerprint(int threads) {
  json f;
  f["compactvl_version"] = COMPACTVL_VERSION;
  f["build_type"] = COMPACTVL_BUILD_TYPE;
#if defined(__clang__)
  f["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  f["compiler"] = std::string("gcc ") + __VERSION__;
#else
  f["compiler"] = "unknown";
#endif
  f["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  f["eigen_simd"] = Eigen::SimdInstructionSetsInUse();
  utsname u{};
  if (uname(&u) == 0) {
    f["os"] = std::string(u.sysname) + " " + u.release;
    f["machine"] = u.machine;
  }
  f["hardware_threads"] = std::thread::hardware_concurrency();
  f["threads"] = threads;
  return f;
}

std::filesystem::path output_root() {
  if (const char* env = std::getenv("COMPACTVL_OUTPUT_ROOT"); env && *env) return env;
  return std::filesystem::current_path() / "runs";
}

std::filesystem::path prepare_run_dir(const std::string& kind, const json& config, std::uint64_t seed, int threads,
                                      const std::filesystem::path& root) {
  const std::string hash = hex64(fnv1a64(config.dump()));
  const auto dir = root / (kind + "-" + hash);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "config.json") << config.dump(2) << "\n";
  std::ofstream(dir / "run.json") << json{{"kind", kind},
                                          {"config_hash", hash},
                                          {"seed", seed},
                                          {"fingerprint", environment_fingerprint(threads)}}
                                         .dump(2)
                                  << "\n";
  return dir;
}

}  // namespace cvl::harness
