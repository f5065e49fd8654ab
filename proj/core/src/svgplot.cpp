#include "stegozoo/svgplot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "stegozoo/csv.hpp"
#include "stegozoo/errors.hpp"

namespace stegozoo::svg {

namespace {

constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 140.0;  // legend space
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 48.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

// Fixed two-decimal coordinates keep the output byte-stable and compact.
std::string num(double v) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string render_line_chart(const PlotSpec& spec, const std::vector<Series>& series) {
    if (spec.y_max <= spec.y_min) throw ConfigError("plot: y_max must exceed y_min");
    double x_min = 0.0, x_max = 1.0;
    bool have_x = false;
    for (const Series& s : series) {
        for (const auto& [px, py] : s.points) {
            (void)py;
            if (!have_x) {
                x_min = x_max = px;
                have_x = true;
            } else {
                x_min = std::min(x_min, px);
                x_max = std::max(x_max, px);
            }
        }
    }
    if (!have_x) throw ConfigError("plot: no data points");
    if (x_max == x_min) x_max = x_min + 1.0;

    const double w = spec.width;
    const double h = spec.height;
    const double px0 = kMarginLeft;
    const double px1 = w - kMarginRight;
    const double py0 = h - kMarginBottom;  // y axis grows upward on screen
    const double py1 = kMarginTop;
    auto sx = [&](double x) { return px0 + (x - x_min) / (x_max - x_min) * (px1 - px0); };
    auto sy = [&](double y) {
        return py0 + (y - spec.y_min) / (spec.y_max - spec.y_min) * (py1 - py0);
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
        << spec.height << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
    out << "<rect width=\"" << spec.width << "\" height=\"" << spec.height
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << num(w / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">"
        << escape(spec.title) << "</text>\n";

    // axes
    out << "<g stroke=\"black\" stroke-width=\"1\">\n";
    out << "<line x1=\"" << num(px0) << "\" y1=\"" << num(py0) << "\" x2=\"" << num(px1)
        << "\" y2=\"" << num(py0) << "\"/>\n";
    out << "<line x1=\"" << num(px0) << "\" y1=\"" << num(py0) << "\" x2=\"" << num(px0)
        << "\" y2=\"" << num(py1) << "\"/>\n";
    out << "</g>\n";

    // y ticks: quarters of the range
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = spec.y_min + (spec.y_max - spec.y_min) * k / 4.0;
        const double yy = sy(yv);
        out << "<line x1=\"" << num(px0 - 4) << "\" y1=\"" << num(yy) << "\" x2=\"" << num(px0)
            << "\" y2=\"" << num(yy) << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << num(px0) << "\" y1=\"" << num(yy) << "\" x2=\"" << num(px1)
            << "\" y2=\"" << num(yy) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << num(px0 - 8) << "\" y=\"" << num(yy + 4)
            << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    // x ticks: integer positions, thinned when crowded
    const int xi_min = static_cast<int>(std::ceil(x_min));
    const int xi_max = static_cast<int>(std::floor(x_max));
    const int span = std::max(1, xi_max - xi_min);
    const int step = span > 12 ? 2 : 1;
    for (int xv = xi_min; xv <= xi_max; xv += step) {
        const double xx = sx(xv);
        out << "<line x1=\"" << num(xx) << "\" y1=\"" << num(py0) << "\" x2=\"" << num(xx)
            << "\" y2=\"" << num(py0 + 4) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(xx) << "\" y=\"" << num(py0 + 18)
            << "\" text-anchor=\"middle\">" << xv << "</text>\n";
    }
    out << "<text x=\"" << num((px0 + px1) / 2) << "\" y=\"" << num(h - 10)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(spec.x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << num((py0 + py1) / 2) << "\" text-anchor=\"middle\" "
           "font-size=\"13\" transform=\"rotate(-90 16 "
        << num((py0 + py1) / 2) << ")\">" << escape(spec.y_label) << "</text>\n";
    out << "</g>\n";

    // series
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t p = 0; p < series[i].points.size(); ++p) {
            if (p) out << ' ';
            out << num(sx(series[i].points[p].first)) << ','
                << num(sy(series[i].points[p].second));
        }
        out << "\"/>\n";
        for (const auto& [px, py] : series[i].points) {
            out << "<circle cx=\"" << num(sx(px)) << "\" cy=\"" << num(sy(py))
                << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        }
    }

    // legend
    out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
        const double ly = kMarginTop + 16.0 * static_cast<double>(i);
        out << "<rect x=\"" << num(px1 + 12) << "\" y=\"" << num(ly) << "\" width=\"12\" "
            << "height=\"12\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << num(px1 + 30) << "\" y=\"" << num(ly + 10) << "\">"
            << escape(series[i].name) << "</text>\n";
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

void write_line_chart(const std::filesystem::path& path, const PlotSpec& spec,
                      const std::vector<Series>& series) {
    csv::write_text_file(path, render_line_chart(spec, series));
}

}  // namespace stegozoo::svg
