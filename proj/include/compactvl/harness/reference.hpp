// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cvl::harness {

/// The versioned reference file: published cost numbers with per-cell
/// citation strings and tolerances.
class ReferenceValues {
 public:
  explicit ReferenceValues(nlohmann::json data);
  static ReferenceValues load(const std::filesystem::path& path);
  /// $COMPACTVL_DATA_DIR/reference_values.json, else the copy in the source tree.
  static std::filesystem::path default_path();
  static ReferenceValues load_default() { return load(default_path()); }

  int version() const { return data_.at("version").get<int>(); }
  const nlohmann::json& table(std::string_view id) const;
  const nlohmann::json& data() const { return data_; }

 private:
  nlohmann::json data_;
};

/// Directory holding the reference file and the result schema.
std::filesystem::path data_dir();

class UnknownTarget : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// "table1", "table2", "table3", "table4", "table8".
const std::vector<std::string>& reproduction_targets();

/// One compared quantity: a table cell or a structural check.
struct CellResult {
  std::string row;
  std::string column;
  std::string kind;  // value, ratio, dominates, comparable, rank, increasing
  std::optional<double> reference;
  std::optional<double> computed;
  std::string unit;
  std::optional<double> tolerance;
  bool gated = true;
  bool passed = true;
  std::string detail;
  std::string citation;

  std::optional<double> relative_delta() const;
};

struct TableReport {
  std::string id;
  std::string title;
  std::vector<CellResult> cells;

  bool passed() const;
  int failures() const;
};

/// Recomputes every cell of `target` with the cost model. Throws
/// UnknownTarget, naming the valid targets, for anything else.
TableReport reproduce(std::string_view target, const ReferenceValues& refs);

nlohmann::json to_json(const TableReport& report);
/// Markdown table with "<ref> ref / <computed> computed" cells, followed by the checks.
std::string to_markdown(const TableReport& report);

struct CostTables {
  std::vector<TableReport> reports;
  std::vector<std::filesystem::path> files;
  bool passed() const;
};

/// All five tables as cost_tables.md and cost_tables.json under `out_dir`.
CostTables run_cost_tables(const ReferenceValues& refs, const std::filesystem::path& out_dir);

}  // namespace cvl::harness
