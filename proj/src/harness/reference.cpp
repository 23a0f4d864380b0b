// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/harness/reference.hpp"

#include "compactvl/cost/arch_json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#ifndef COMPACTVL_SOURCE_DATA_DIR
#define COMPACTVL_SOURCE_DATA_DIR "data"
#endif

namespace cvl::harness {

using nlohmann::json;

ReferenceValues::ReferenceValues(json data) : data_(std::move(data)) {
  if (!data_.contains("version") || !data_.contains("tables")) throw ConfigError("reference file needs version and tables");
}

ReferenceValues ReferenceValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reference file " + path.string());
  return ReferenceValues(json::parse(in));
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("COMPACTVL_DATA_DIR"); env && *env) return env;
  return COMPACTVL_SOURCE_DATA_DIR;
}

std::filesystem::path ReferenceValues::default_path() { return data_dir() / "reference_values.json"; }

const json& ReferenceValues::table(std::string_view id) const {
  const auto& tables = data_.at("tables");
  const auto it = tables.find(std::string(id));
  if (it == tables.end()) throw UnknownTarget("reference file has no table '" + std::string(id) + "'");
  return *it;
}

const std::vector<std::string>& reproduction_targets() {
  static const std::vector<std::string> targets{"table1", "table2", "table3", "table4", "table8"};
  return targets;
}

std::optional<double> CellResult::relative_delta() const {
  if (!reference || !computed || *reference == 0) return std::nullopt;
  return *computed / *reference - 1.0;
}

bool TableReport::passed() const { return failures() == 0; }

int TableReport::failures() const {
  int n = 0;
  for (const auto& c : cells) n += c.gated && !c.passed;
  return n;
}

bool CostTables::passed() const {
  for (const auto& r : reports)
    if (!r.passed()) return false;
  return true;
}

namespace {

class CostCache {
 public:
  const cost::CostReport& get(const std::string& arch) {
    auto it = cache_.find(arch);
    if (it == cache_.end()) {
      const auto config = cost::arch_preset(arch);
      it = cache_.emplace(arch, cost::count_arch(config, cost::default_input(config))).first;
    }
    return it->second;
  }

  double metric(const std::string& arch, const std::string& metric, const json& components) {
    const auto& r = get(arch);
    const bool params = metric == "params";
    if (!params && metric != "flops") throw ConfigError("unknown metric '" + metric + "'");
    if (components.is_null()) return static_cast<double>(params ? r.total_params() : r.total_flops());
    double sum = 0;
    for (const auto& c : components) {
      const auto* comp = r.find(c.get<std::string>());
      if (!comp) throw ConfigError(arch + " has no component '" + c.get<std::string>() + "'");
      sum += static_cast<double>(params ? comp->params : comp->flops);
    }
    return sum;
  }

 private:
  std::map<std::string, cost::CostReport> cache_;
};

json get_or_null(const json& j, const char* key) { return j.contains(key) ? j.at(key) : json(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::setprecision(precision) << std::defaultfloat << v;
  return s.str();
}

std::string percent(double v) {
  std::ostringstream s;
  s << std::showpos << std::fixed << std::setprecision(1) << 100.0 * v << "%";
  return s.str();
}

}  // namespace

TableReport reproduce(std::string_view target, const ReferenceValues& refs) {
  const auto& valid = reproduction_targets();
  if (std::find(valid.begin(), valid.end(), target) == valid.end()) {
    std::string list;
    for (const auto& t : valid) list += (list.empty() ? "" : ", ") + t;
    throw UnknownTarget("unknown reproduction target '" + std::string(target) + "'; valid targets: " + list);
  }
  const auto& t = refs.table(target);
  const auto& units = refs.data().at("units");
  CostCache costs;
  TableReport report;
  report.id = std::string(target);
  report.title = t.value("title", "");

  for (const auto& row : t.at("rows")) {
    const std::string label = row.at("label").get<std::string>();
    for (const auto& cell : row.at("cells")) {
      CellResult c;
      c.row = label;
      c.column = cell.at("column").get<std::string>();
      c.kind = "value";
      c.unit = cell.at("unit").get<std::string>();
      c.reference = cell.at("value").get<double>();
      c.citation = cell.at("citation").get<std::string>();
      c.gated = cell.value("gate", true) && !row.at("arch").is_null();
      if (cell.contains("tolerance")) c.tolerance = cell.at("tolerance").get<double>();
      if (row.at("arch").is_null()) {
        c.detail = "not modelled; reference only";
      } else {
        const double scale = units.at(c.unit).get<double>();
        c.computed = costs.metric(row.at("arch").get<std::string>(), cell.at("metric").get<std::string>(),
                                  get_or_null(cell, "components")) / scale;
        const double delta = *c.relative_delta();
        if (c.tolerance) {
          c.passed = std::abs(delta) <= *c.tolerance;
          c.detail = percent(delta) + " vs tolerance ±" + fmt(100 * *c.tolerance) + "%";
        } else {
          c.detail = percent(delta) + " (reported, not gated)";
        }
        if (!c.gated && c.tolerance) c.detail += " (not gated)";
      }
      report.cells.push_back(std::move(c));
    }
  }

  for (const auto& chk : get_or_null(t, "checks")) {
    CellResult c;
    c.kind = chk.at("check").get<std::string>();
    c.row = chk.at("label").get<std::string>();
    c.column = "check";
    c.citation = chk.at("citation").get<std::string>();
    const std::string metric = chk.at("metric").get<std::string>();
    if (c.kind == "ratio") {
      const double num = costs.metric(chk.at("numerator").get<std::string>(), metric, json());
      const double den = costs.metric(chk.at("denominator").get<std::string>(), metric, json());
      c.computed = num / den;
      c.reference = chk.at("value").get<double>();
      const double lo = chk.value("min", -INFINITY), hi = chk.value("max", INFINITY);
      c.passed = *c.computed >= lo && *c.computed <= hi;
      c.detail = "ratio " + percent(*c.computed).substr(1) + " in [" + (std::isfinite(lo) ? fmt(100 * lo) + "%" : "-inf") +
                 ", " + fmt(100 * hi) + "%]";
    } else if (c.kind == "dominates") {
      const std::string arch = chk.at("arch").get<std::string>();
      const double big = costs.metric(arch, metric, chk.at("larger"));
      const double small = costs.metric(arch, metric, chk.at("smaller"));
      const double factor = chk.at("factor").get<double>();
      c.computed = big / small;
      c.passed = big > factor * small;
      c.detail = "larger/smaller = " + fmt(big / small) + ", required > " + fmt(factor);
    } else if (c.kind == "comparable") {
      const std::string arch = chk.at("arch").get<std::string>();
      const double a = costs.metric(arch, metric, chk.at("first"));
      const double b = costs.metric(arch, metric, chk.at("second"));
      const double factor = chk.at("factor").get<double>();
      c.computed = a / b;
      c.passed = a / b <= factor && b / a <= factor;
      c.detail = "first/second = " + fmt(a / b) + ", required within x" + fmt(factor);
    } else if (c.kind == "rank") {
      const std::string arch = chk.at("arch").get<std::string>();
      std::vector<double> v;
      for (const auto& group : chk.at("order")) v.push_back(costs.metric(arch, metric, group));
      c.passed = true;
      std::string chain;
      for (size_t i = 0; i < v.size(); ++i) {
        if (i > 0 && !(v[i - 1] > v[i])) c.passed = false;
        chain += (i ? " > " : "") + fmt(v[i] / 1e6, 4) + "M";
      }
      c.detail = (metric == "flops" ? "FLOPs " : "params ") + chain;
    } else if (c.kind == "increasing") {
      std::vector<double> v;
      for (const auto& a : chk.at("archs")) v.push_back(costs.metric(a.get<std::string>(), metric, json()));
      c.passed = true;
      std::string chain;
      for (size_t i = 0; i < v.size(); ++i) {
        if (i > 0 && !(v[i] > v[i - 1])) c.passed = false;
        chain += (i ? " < " : "") + fmt(v[i] / 1e6, 4) + "M";
      }
      c.detail = chain;
    } else {
      throw ConfigError("unknown check kind '" + c.kind + "'");
    }
    report.cells.push_back(std::move(c));
  }
  return report;
}

json to_json(const TableReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    json j{{"row", c.row},         {"column", c.column}, {"kind", c.kind},         {"gated", c.gated},
           {"passed", c.passed},   {"detail", c.detail}, {"citation", c.citation}, {"unit", c.unit}};
    j["reference"] = c.reference ? json(*c.reference) : json();
    j["computed"] = c.computed ? json(*c.computed) : json();
    j["tolerance"] = c.tolerance ? json(*c.tolerance) : json();
    j["relative_delta"] = c.relative_delta() ? json(*c.relative_delta()) : json();
    cells.push_back(std::move(j));
  }
  return {{"table", report.id}, {"title", report.title}, {"passed", report.passed()},
          {"failures", report.failures()}, {"cells", cells}};
}

std::string to_markdown(const TableReport& report) {
  std::ostringstream out;
  out << "## " << report.id << ": " << report.title << "\n\n";
  std::vector<std::string> columns, rows;
  std::map<std::pair<std::string, std::string>, const CellResult*> grid;
  for (const auto& c : report.cells) {
    if (c.kind != "value") continue;
    if (std::find(columns.begin(), columns.end(), c.column) == columns.end()) columns.push_back(c.column);
    if (std::find(rows.begin(), rows.end(), c.row) == rows.end()) rows.push_back(c.row);
    grid[{c.row, c.column}] = &c;
  }
  out << "| Model |";
  for (const auto& col : columns) out << " " << col << " |";
  out << "\n|---|";
  for (size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << "\n";
  for (const auto& row : rows) {
    out << "| " << row << " |";
    for (const auto& col : columns) {
      const auto it = grid.find({row, col});
      if (it == grid.end()) {
        out << " |";
        continue;
      }
      const auto& c = *it->second;
      out << " " << fmt(*c.reference, 4) << c.unit << " ref / ";
      if (c.computed) {
        out << fmt(*c.computed, 4) << c.unit << " computed (" << percent(*c.relative_delta()) << ")";
        out << (c.gated ? (c.passed ? " PASS" : " FAIL") : "");
      } else {
        out << "n/a";
      }
      out << " |";
    }
    out << "\n";
  }
  bool header = false;
  for (const auto& c : report.cells) {
    if (c.kind == "value") continue;
    if (!header) out << "\nChecks:\n\n";
    header = true;
    out << "- " << (c.passed ? "PASS" : "FAIL") << " " << c.row << ": " << c.detail << " (" << c.citation << ")\n";
  }
  out << "\n";
  return out.str();
}

CostTables run_cost_tables(const ReferenceValues& refs, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  CostTables result;
  std::string md = "# Cost tables\n\nFLOPs count one multiply-accumulate as one FLOP.\n\n";
  json all = json::array();
  for (const auto& t : reproduction_targets()) {
    result.reports.push_back(reproduce(t, refs));
    md += to_markdown(result.reports.back());
    all.push_back(to_json(result.reports.back()));
  }
  const auto md_path = out_dir / "cost_tables.md";
  const auto json_path = out_dir / "cost_tables.json";
  std::ofstream(md_path) << md;
  std::ofstream(json_path) << json{{"reference_version", refs.version()}, {"tables", all}}.dump(2) << "\n";
  result.files = {md_path, json_path};
  return result;
}

}  // namespace cvl::harness
