// Copyright 2026 The timfg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serialization: policies as JSON, plot-ready CSV tables, and provenance
// metadata for every artifact.
//
// FeedbackPolicy JSON: {"d": d, "nu_grid_k": K, "rows": [x][i][weights]}
// with the grid NuGrid::simplex(d, K). TimePolicy JSON:
// {"head": [t][x][weights], "tail": [x][weights]}.

#ifndef TIMFG_IO_HPP_
#define TIMFG_IO_HPP_

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "timfg/errors.hpp"
#include "timfg/measures.hpp"
#include "timfg/model.hpp"
#include "timfg/policy.hpp"

#ifndef TIMFG_VERSION
#define TIMFG_VERSION "0.1.0"
#endif

namespace timfg::io {

using nlohmann::json;

inline json to_json(const RelaxedAction& a) { return a.weights(); }

inline RelaxedAction action_from_json(const json& j, int m) {
  if (!j.is_array() || static_cast<int>(j.size()) != m)
    throw InputError("relaxed action: expected an array of " + std::to_string(m) + " weights");
  return RelaxedAction(j.get<std::vector<double>>());
}

inline json to_json(const PolicyRow& row) {
  json out = json::array();
  for (const auto& a : row) out.push_back(to_json(a));
  return out;
}

inline PolicyRow row_from_json(const json& j, int d, int m) {
  if (!j.is_array() || static_cast<int>(j.size()) != d) throw InputError("policy row: expected one action per state");
  PolicyRow row;
  for (const auto& a : j) row.push_back(action_from_json(a, m));
  return row;
}

inline json to_json(const FeedbackPolicy& pi) {
  if (pi.grid().lattice_k() == 0) throw UnsupportedError("policy JSON needs a simplex-lattice nu grid");
  json rows = json::array();
  for (int x = 0; x < pi.dim(); ++x) {
    json col = json::array();
    for (int i = 0; i < pi.grid().size(); ++i) col.push_back(to_json(pi.at(x, i)));
    rows.push_back(std::move(col));
  }
  return {{"d", pi.dim()}, {"nu_grid_k", pi.grid().lattice_k()}, {"rows", std::move(rows)}};
}

inline FeedbackPolicy feedback_policy_from_json(const json& j, const ModelSpec& model) {
  if (!j.is_object() || !j.contains("nu_grid_k") || !j.contains("rows"))
    throw InputError("policy JSON: need fields 'nu_grid_k' and 'rows'");
  const int d = j.value("d", model.d);
  if (d != model.d) throw InputError("policy JSON: field 'd' does not match the model");
  const auto grid = NuGrid::simplex(d, j.at("nu_grid_k").get<int>());
  const auto& rows = j.at("rows");
  if (!rows.is_array() || static_cast<int>(rows.size()) != d) throw InputError("policy JSON: 'rows' needs one entry per state");
  std::vector<std::vector<RelaxedAction>> table(static_cast<std::size_t>(d));
  for (int x = 0; x < d; ++x) {
    if (!rows[x].is_array() || static_cast<int>(rows[x].size()) != grid.size())
      throw InputError("policy JSON: 'rows' needs " + std::to_string(grid.size()) + " grid entries per state");
    for (const auto& a : rows[x]) table[x].push_back(action_from_json(a, model.grid.size()));
  }
  return FeedbackPolicy(grid, std::move(table));
}

inline json to_json(const TimePolicy& pi) {
  json head = json::array();
  for (const auto& row : pi.head) head.push_back(to_json(row));
  return {{"head", std::move(head)}, {"tail", to_json(pi.tail)}};
}

inline TimePolicy time_policy_from_json(const json& j, const ModelSpec& model) {
  if (!j.is_object() || !j.contains("head") || !j.contains("tail")) throw InputError("time policy JSON: need fields 'head' and 'tail'");
  TimePolicy pi;
  for (const auto& row : j.at("head")) pi.head.push_back(row_from_json(row, model.d, model.grid.size()));
  pi.tail = row_from_json(j.at("tail"), model.d, model.grid.size());
  return pi;
}

inline json to_json(const SimplexPoint& nu) { return nu.weights(); }

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

/// Shortest decimal text that reads back as the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// CSV with a fixed header; rows appear in insertion order.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  class Row {
   public:
    Row& operator<<(double v) { cells_.push_back(format_double(v)); return *this; }
    Row& operator<<(int v) { cells_.push_back(std::to_string(v)); return *this; }
    Row& operator<<(std::int64_t v) { cells_.push_back(std::to_string(v)); return *this; }
    Row& operator<<(std::uint64_t v) { cells_.push_back(std::to_string(v)); return *this; }
    Row& operator<<(const std::string& v) { cells_.push_back(v); return *this; }
    Row& operator<<(const char* v) { cells_.push_back(v); return *this; }

   private:
    friend class CsvTable;
    std::vector<std::string> cells_;
  };

  Row& row() {
    rows_.emplace_back();
    return rows_.back();
  }

  std::string str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(columns_);
    for (const auto& r : rows_) {
      if (r.cells_.size() != columns_.size()) throw InputError("CSV row width does not match the header");
      line(r.cells_);
    }
    return out;
  }

  void write(const std::filesystem::path& path) const { write_text_file(path, str()); }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<Row> rows_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of a configuration object with the output location removed. Object
/// keys are sorted by the JSON library, so field order does not matter.
inline std::string config_hash(json config) {
  if (config.is_object()) config.erase("output_dir");
  return hex64(fnv1a64(config.dump()));
}

inline json provenance(const json& config, const ModelSpec& model, std::optional<std::uint64_t> seed = std::nullopt) {
  json p = {{"tool", "timfg"},
            {"version", TIMFG_VERSION},
            {"json_library", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"config_hash", config_hash(config)},
            {"model", model_fingerprint(model)},
            {"config", config}};
  if (seed) p["seed"] = *seed;
  return p;
}

}  // namespace timfg::io

#endif  // TIMFG_IO_HPP_
