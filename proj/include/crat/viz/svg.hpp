#pragma once

#include <string>
#include <vector>

#include "crat/core/array2.hpp"
#include "crat/data/scene.hpp"

namespace crat::viz {

/// Colours of the scene plots: past blue, ground truth green, most probable
/// mode orange, other modes red, surrounding vehicles purple.
struct Palette {
  std::string history = "#1f5fbf";
  std::string ground_truth = "#2ca02c";
  std::string best_mode = "#ff7f0e";
  std::string other_modes = "#d62728";
  std::string others = "#7b3fa0";
};

/// One scene in its target-local frame with optional predicted modes
/// (each T_f × 2, mode 0 first).
std::string scene_svg(const data::Scene& local, const std::vector<Array2>& modes, const std::string& title = "",
                      const Palette& palette = {});

struct BarSeries {
  std::string label;
  std::string color;
  std::vector<double> values;  // one per group
};

/// Grouped bar chart with a zero line; values may be negative.
std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<std::string>& groups, const std::vector<BarSeries>& series);

}  // namespace crat::viz
