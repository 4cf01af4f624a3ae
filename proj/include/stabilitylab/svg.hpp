#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace stabilitylab {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool scatter = false;  // markers only; otherwise a polyline
};

struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool logx = false;
    bool logy = false;
    int width = 840;
    int height = 560;
};

/// Writes a self-contained SVG line/scatter chart. Log axes drop
/// non-positive values of the affected coordinate.
void emit_svg_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec,
                   const std::filesystem::path& path);

} // namespace stabilitylab
