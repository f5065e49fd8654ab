#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace stegozoo::svg {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (x, y), drawn in order
};

struct PlotSpec {
    std::string title;
    std::string x_label = "X (attacked LSBs)";
    std::string y_label = "F1";
    double y_min = 0.0;
    double y_max = 1.0;
    int width = 720;
    int height = 480;
};

// Static line chart with axes, ticks and a legend. Output is fully
// determined by the inputs (no timestamps, no randomness), so identical
// runs produce identical files.
std::string render_line_chart(const PlotSpec& spec, const std::vector<Series>& series);
void write_line_chart(const std::filesystem::path& path, const PlotSpec& spec,
                      const std::vector<Series>& series);

}  // namespace stegozoo::svg
