#pragma once

#include <string>
#include <vector>

#include "oisub/matrix.hpp"

namespace oisub {

/// Minimal dependency-free SVG plots. Output is deterministic: no timestamps
/// or generator metadata, so files hash stably.
struct Series {
    std::string label;
    std::vector<double> x, y;
};

void write_line_svg(const std::string& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<Series>& series);

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series);

/// One bar per row of proportions (rows must sum to ~1).
void write_stacked_bar_svg(const std::string& path, const std::string& title,
                           const std::vector<std::string>& bar_labels,
                           const std::vector<std::string>& segment_labels,
                           const Matrix& proportions);

void write_heatmap_svg(const std::string& path, const std::string& title,
                       const Matrix& values);

}  // namespace oisub
