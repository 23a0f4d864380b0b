// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/core/types.hpp"
#include "compactvl/cost/arch_json.hpp"
#include "compactvl/detector/image.hpp"
#include "compactvl/harness/benchmark.hpp"
#include "compactvl/harness/reference.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <regex>

namespace cvl::harness {
namespace {

using nlohmann::json;

const ReferenceValues& refs() {
  static const ReferenceValues r = ReferenceValues::load_default();
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("compactvl_harness_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig toy_experiment(transformer::Task task = transformer::Task::kVqa) {
  ExperimentConfig c;
  c.detector = "tee-toy";
  c.transformer = "transformer-toy";
  c.task = task;
  c.seed = 7;
  c.repetitions = 3;
  return c;
}

const CellResult& cell(const TableReport& r, const std::string& row, const std::string& column) {
  for (const auto& c : r.cells)
    if (c.row == row && c.column == column) return c;
  throw std::out_of_range(row + "/" + column);
}

TEST(Reference, FileIsVersionedAndEveryCellIsCited) {
  EXPECT_GE(refs().version(), 1);
  for (const auto& target : reproduction_targets()) {
    const auto& t = refs().table(target);
    for (const auto& row : t.at("rows"))
      for (const auto& c : row.at("cells")) {
        const auto citation = c.at("citation").get<std::string>();
        EXPECT_TRUE(citation.starts_with("Table ")) << target << ": " << citation;
      }
  }
}

TEST(Reproduce, EveryTargetPasses) {
  for (const auto& target : reproduction_targets()) {
    const auto report = reproduce(target, refs());
    EXPECT_TRUE(report.passed()) << to_markdown(report);
    EXPECT_EQ(report.failures(), 0);
  }
}

TEST(Reproduce, UnknownTargetListsValidOnes) {
  try {
    reproduce("table5", refs());
    FAIL() << "expected UnknownTarget";
  } catch (const UnknownTarget& e) {
    const std::string what = e.what();
    for (const auto& target : reproduction_targets()) EXPECT_NE(what.find(target), std::string::npos) << what;
  }
}

TEST(Reproduce, TableOneRowFormat) {
  const auto md = to_markdown(reproduce("table1", refs()));
  const std::regex row(R"(\| TEE-0 \| 7\.5M ref / [0-9.]+M computed .*\| 4\.4B ref / [0-9.]+B computed .*\|)");
  EXPECT_TRUE(std::regex_search(md, row)) << md;
}

TEST(Reproduce, TableOneTeeZeroWithinTenPercent) {
  const auto r = reproduce("table1", refs());
  const auto& params = cell(r, "TEE-0", "Params(M)");
  const auto& flops = cell(r, "TEE-0", "FLOPS(B)");
  ASSERT_TRUE(params.relative_delta() && flops.relative_delta());
  EXPECT_LE(std::abs(*params.relative_delta()), 0.10);
  EXPECT_LE(std::abs(*flops.relative_delta()), 0.10);
  EXPECT_TRUE(params.passed && flops.passed);
}

TEST(Reproduce, TableTwoHasSixPresetRows) {
  const auto r = reproduce("table2", refs());
  std::set<std::string> rows;
  for (const auto& c : r.cells)
    if (c.kind == "value") rows.insert(c.row);
  EXPECT_EQ(rows.size(), 6u);
  for (const auto& c : r.cells)
    if (c.kind == "value" && c.column.starts_with("Params")) {
      EXPECT_DOUBLE_EQ(*c.tolerance, 0.03);
    }
}

TEST(Reproduce, TableEightParamsStrictlyIncrease) {
  const auto r = reproduce("table8", refs());
  std::vector<double> params;
  for (const std::string arch : {"TEE-0", "TEE-1", "TEE-2", "TEE-3"}) params.push_back(*cell(r, arch, "Params(M)").computed);
  for (size_t i = 1; i < params.size(); ++i) EXPECT_LT(params[i - 1], params[i]);
  bool ordering_checked = false;
  for (const auto& c : r.cells) ordering_checked |= c.kind == "increasing" && c.passed;
  EXPECT_TRUE(ordering_checked);
}

TEST(Reproduce, ToleranceViolationFails) {
  auto data = refs().data();
  for (auto& row : data["tables"]["table2"]["rows"])
    if (row["arch"] == "minilm")
      for (auto& c : row["cells"])
        if (c["metric"] == "params") c["value"] = c["value"].get<double>() * 1.2;
  const auto report = reproduce("table2", ReferenceValues(data));
  EXPECT_FALSE(report.passed());
  EXPECT_GE(report.failures(), 1);
}

TEST(Reproduce, DoesNotTouchTheReferenceFile) {
  const auto path = ReferenceValues::default_path();
  const auto before = std::filesystem::last_write_time(path);
  for (const auto& target : reproduction_targets()) reproduce(target, refs());
  EXPECT_EQ(std::filesystem::last_write_time(path), before);
}

TEST(CostTables, WritesMarkdownAndJson) {
  const auto dir = scratch("tables");
  const auto tables = run_cost_tables(refs(), dir);
  EXPECT_TRUE(tables.passed());
  EXPECT_EQ(tables.reports.size(), 5u);
  ASSERT_TRUE(std::filesystem::exists(dir / "cost_tables.md"));
  std::ifstream in(dir / "cost_tables.json");
  const auto j = json::parse(in);
  EXPECT_EQ(j.at("reference_version"), refs().version());
  EXPECT_EQ(j.at("tables").size(), 5u);
}

TEST(Experiment, SeedIsMandatory) {
  EXPECT_THROW(ExperimentConfig::from_json({{"detector", "tee-toy"}}), ConfigError);
  auto c = toy_experiment();
  c.seed.reset();
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Experiment, RejectsUnknownKeysAndResolvesPaths) {
  EXPECT_THROW(ExperimentConfig::from_json({{"seed", 1}, {"detecter", "tee-0"}}), ConfigError);
  const auto dir = scratch("config");
  std::ofstream(dir / "exp.json") << R"({"seed": 3, "inputs": ["img.ppm"], "output_dir": "out", "task": "caption"})";
  const auto c = ExperimentConfig::load(dir / "exp.json");
  ASSERT_EQ(c.inputs.size(), 1u);
  EXPECT_TRUE(c.inputs[0].is_absolute());
  EXPECT_EQ(c.inputs[0].filename(), "img.ppm");
  EXPECT_TRUE(c.output_dir.is_absolute());
  EXPECT_EQ(c.task, transformer::Task::kCaption);
}

TEST(Experiment, HashTracksContent) {
  auto a = toy_experiment();
  auto b = toy_experiment();
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 8;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(ExperimentConfig::from_json(a.to_json()).hash(), a.hash());
}

TEST(Experiment, RunDirectoryRecordsHashSeedAndFingerprint) {
  const auto root = scratch("runs");
  const auto c = toy_experiment();
  const auto dir = prepare_run_dir("benchmark", c.to_json(), *c.seed, c.threads, root);
  std::ifstream in(dir / "run.json");
  const auto run = json::parse(in);
  EXPECT_EQ(run.at("config_hash"), c.hash());
  EXPECT_EQ(run.at("seed"), 7);
  EXPECT_EQ(run.at("fingerprint").at("threads"), 1);
  EXPECT_TRUE(run.at("fingerprint").contains("compiler"));
  std::ifstream cin(dir / "config.json");
  EXPECT_EQ(ExperimentConfig::from_json(json::parse(cin)).hash(), c.hash());
}

TEST(Experiment, OutputRootFollowsEnvironment) {
  ::setenv("COMPACTVL_OUTPUT_ROOT", "/tmp/compactvl_root_probe", 1);
  EXPECT_EQ(output_root(), std::filesystem::path("/tmp/compactvl_root_probe"));
  ::unsetenv("COMPACTVL_OUTPUT_ROOT");
  EXPECT_EQ(output_root().filename(), "runs");
}

TEST(Benchmark, RejectsFewerThanThreeRepetitions) {
  auto c = toy_experiment();
  c.repetitions = 2;
  EXPECT_THROW(run_benchmark(c), ConfigError);
}

TEST(Benchmark, CostFieldsAreDeterministicAndMatchTheCostModel) {
  const auto a = run_benchmark(toy_experiment());
  const auto b = run_benchmark(toy_experiment());
  const auto ja = a.to_json(), jb = b.to_json();
  EXPECT_EQ(ja.at("cost"), jb.at("cost"));
  EXPECT_EQ(ja.at("config_hash"), jb.at("config_hash"));
  for (size_t i = 0; i < a.stages.size(); ++i) EXPECT_EQ(a.stages[i].macs, b.stages[i].macs);
  const auto det = cost::count_arch(cost::arch_preset("tee-toy"));
  EXPECT_EQ(a.detector.params, det.total_params());
  EXPECT_EQ(a.detector.flops, det.total_flops());
}

TEST(Benchmark, ReportsMeanAndStdForEveryStage) {
  const auto r = run_benchmark(toy_experiment(transformer::Task::kCaption));
  ASSERT_EQ(r.stages.size(), 3u);
  const std::vector<std::string> names{"feature_extraction", "fusion_forward", "task_head"};
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.stages[i].name, names[i]);
    EXPECT_EQ(r.stages[i].samples_ms.size(), 3u);
    EXPECT_GE(r.stages[i].std_ms(), 0.0);
    EXPECT_GT(r.stages[i].macs, 0);
  }
}

TEST(Benchmark, OutputValidatesAgainstSchema) {
  const auto schema = benchmark_schema();
  for (auto task : {transformer::Task::kCaption, transformer::Task::kVqa, transformer::Task::kNlvr2,
                    transformer::Task::kRetrieval, transformer::Task::kPretrainItm}) {
    const auto errors = validate_schema(run_benchmark(toy_experiment(task)).to_json(), schema);
    EXPECT_TRUE(errors.empty()) << errors.front();
  }
}

TEST(Benchmark, SchemaCatchesViolations) {
  const auto schema = benchmark_schema();
  auto j = run_benchmark(toy_experiment()).to_json();
  j["repetitions"] = 2;
  j["stages"][0].erase("std_ms");
  j["extra"] = true;
  const auto errors = validate_schema(j, schema);
  EXPECT_EQ(errors.size(), 3u);
}

TEST(Benchmark, UsesProvidedImages) {
  const auto dir = scratch("images");
  detector::write_ppm(detector::synthetic_image(96, 64, 1), dir / "a.ppm");
  detector::write_ppm(detector::synthetic_image(64, 96, 2), dir / "b.ppm");
  auto c = toy_experiment();
  c.inputs = {dir / "a.ppm", dir / "b.ppm"};
  EXPECT_EQ(run_benchmark(c).images, 2);
}

TEST(Benchmark, StageStatistics) {
  StageTiming t{"x", {1.0, 2.0, 3.0}, 0};
  EXPECT_DOUBLE_EQ(t.mean_ms(), 2.0);
  EXPECT_DOUBLE_EQ(t.std_ms(), 1.0);
}

TEST(Benchmark, LargerDetectorTakesLongerToExtract) {
  auto small = toy_experiment();
  small.detector = "tee-0";
  auto large = small;
  large.detector = "tee-3";
  const auto a = run_benchmark(small);
  const auto b = run_benchmark(large);
  EXPECT_GE(b.stage("feature_extraction").mean_ms(), a.stage("feature_extraction").mean_ms());
  EXPECT_GT(b.stage("feature_extraction").macs, a.stage("feature_extraction").macs);
}

}  // namespace
}  // namespace cvl::harness
