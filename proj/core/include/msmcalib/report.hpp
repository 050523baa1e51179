#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msmcalib/geometry.hpp"

namespace msm::report {

/// Polyline chart with one or more series, written as a standalone SVG document.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool points = false;  ///< markers instead of a line
};

std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series, bool flip_y = false);

/// Reads whatever outputs exist in a run directory and writes report.md plus SVG plots next to them.
/// Returns the markdown text. Throws Validation when scan.json or scene.json is missing.
std::string write_report(const std::filesystem::path& run_dir);

}  // namespace msm::report
