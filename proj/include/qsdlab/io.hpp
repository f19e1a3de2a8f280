#pragma once

// Result files: atomic writes, CSV with provenance header, JSON summaries.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"

#ifndef QSDLAB_VERSION
#define QSDLAB_VERSION "0.0.0"
#endif

namespace qsdlab {

inline constexpr const char* kVersion = QSDLAB_VERSION;

// %.17g round-trips every double.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Short form for file names: 8 -> "8", 0.5 -> "0.5".
inline std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Writes to a sibling temp file and renames it over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

// Plot metadata: which columns emit_plot_data reads and their units.
struct PlotSpec {
  std::string x, y, se, series;  // column names; series may be empty
  std::string x_unit, y_unit;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::optional<PlotSpec> plot;

  void add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw UsageError("CsvTable: row width mismatch");
    rows.push_back(std::move(row));
  }
  void add_numbers(const std::vector<double>& row) {
    std::vector<std::string> r;
    r.reserve(row.size());
    for (double v : row) r.push_back(fmt_double(v));
    add(std::move(r));
  }
};

inline std::string render_csv(const CsvTable& t, const std::string& config_hash) {
  std::ostringstream os;
  os << "# qsdlab " << kVersion << " config " << config_hash << "\n";
  if (t.plot)
    os << "# plot x=" << t.plot->x << " y=" << t.plot->y << " se=" << t.plot->se << " series=" << t.plot->series
       << " x_unit=" << t.plot->x_unit << " y_unit=" << t.plot->y_unit << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
  return os.str();
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t, const std::string& config_hash) {
  atomic_write(path, render_csv(t, config_hash));
}

inline void write_json(const std::filesystem::path& path, nlohmann::ordered_json j, const std::string& config_hash) {
  nlohmann::ordered_json out;
  out["qsdlab_version"] = kVersion;
  out["config_hash"] = config_hash;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
  atomic_write(path, out.dump(2) + "\n");
}

// Reads a CSV written by write_csv, keeping the plot metadata.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# plot ", 0) == 0) {
      PlotSpec p;
      for (const auto& kv : split(line.substr(7), ' ')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "x") p.x = v;
        else if (k == "y") p.y = v;
        else if (k == "se") p.se = v;
        else if (k == "series") p.series = v;
        else if (k == "x_unit") p.x_unit = v;
        else if (k == "y_unit") p.y_unit = v;
      }
      t.plot = p;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (t.columns.empty())
      t.columns = split(line, ',');
    else
      t.add(split(line, ','));
  }
  return t;
}

}  // namespace qsdlab
