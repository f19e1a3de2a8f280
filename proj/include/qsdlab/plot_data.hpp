#pragma once

// Tidy (x, y, se, series) reshaping of result CSVs. No plotting.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "io.hpp"

namespace qsdlab {

// Concatenates the plot columns of every input into one long table. Inputs
// must agree on x and y units.
inline CsvTable emit_plot_data(const std::vector<std::filesystem::path>& files) {
  if (files.empty()) throw UsageError("plot: no input files");
  CsvTable out;
  out.columns = {"x", "y", "se", "series"};
  std::string x_unit, y_unit;
  for (const auto& f : files) {
    const CsvTable t = read_csv(f);
    if (!t.plot) throw ValidationError("plot: " + f.string() + " carries no plot metadata");
    const PlotSpec& p = *t.plot;
    if (x_unit.empty()) {
      x_unit = p.x_unit;
      y_unit = p.y_unit;
    } else if (p.x_unit != x_unit || p.y_unit != y_unit) {
      throw ValidationError("plot: mixed units (" + x_unit + "/" + y_unit + " vs " + p.x_unit + "/" + p.y_unit + " in " +
                            f.string() + ")");
    }
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < t.columns.size(); ++i) col[t.columns[i]] = i;
    auto index = [&](const std::string& name) -> std::ptrdiff_t {
      if (name.empty()) return -1;
      const auto it = col.find(name);
      if (it == col.end()) throw ValidationError("plot: column '" + name + "' missing in " + f.string());
      return static_cast<std::ptrdiff_t>(it->second);
    };
    const auto ix = index(p.x), iy = index(p.y), ise = index(p.se), is = index(p.series);
    if (ix < 0 || iy < 0) throw ValidationError("plot: x and y columns are required in " + f.string());
    const std::string stem = f.stem().string();
    for (const auto& r : t.rows) {
      const auto at = [&](std::ptrdiff_t i) { return r[static_cast<std::size_t>(i)]; };
      out.add({at(ix), at(iy), ise >= 0 ? at(ise) : "", is >= 0 ? stem + ":" + at(is) : stem});
    }
  }
  out.plot = PlotSpec{"x", "y", "se", "series", x_unit, y_unit};
  return out;
}

}  // namespace qsdlab
