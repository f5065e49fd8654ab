#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "stegozoo/csv.hpp"
#include "stegozoo/errors.hpp"
#include "stegozoo/svgplot.hpp"
#include "support/oracles.hpp"

using namespace stegozoo;
namespace fs = std::filesystem;

namespace {

std::vector<svg::Series> demo_series() {
    return {
        {"loss/mean_eps", {{1, 0.2}, {8, 0.5}, {23, 0.9}}},
        {"weights/hgb", {{1, 0.4}, {8, 0.8}, {23, 1.0}}},
    };
}

}  // namespace

TEST_CASE("line chart renders deterministically with the expected furniture") {
    svg::PlotSpec spec;
    spec.title = "detection quality";
    const std::string a = svg::render_line_chart(spec, demo_series());
    const std::string b = svg::render_line_chart(spec, demo_series());
    CHECK(a == b);
    CHECK(a.rfind("<svg", 0) == 0);
    CHECK(a.find("</svg>") != std::string::npos);
    CHECK(a.find("detection quality") != std::string::npos);
    CHECK(a.find("loss/mean_eps") != std::string::npos);
    CHECK(a.find("weights/hgb") != std::string::npos);
    CHECK(a.find("X (attacked LSBs)") != std::string::npos);
    CHECK(a.find("polyline") != std::string::npos);
    // Two series, two polylines.
    std::size_t count = 0;
    for (std::size_t at = a.find("<polyline"); at != std::string::npos;
         at = a.find("<polyline", at + 1)) {
        ++count;
    }
    CHECK(count == 2);
}

TEST_CASE("series names are xml escaped") {
    // Names land in text nodes, so &, < and > must be escaped there.
    std::vector<svg::Series> series = {{"a<b & c>", {{1, 0.5}, {2, 0.6}}}};
    const std::string out = svg::render_line_chart({}, series);
    CHECK(out.find("a&lt;b &amp; c&gt;") != std::string::npos);
    CHECK(out.find("a<b") == std::string::npos);
}

TEST_CASE("degenerate plots are rejected") {
    CHECK_THROWS_AS(svg::render_line_chart({}, {}), ConfigError);
    std::vector<svg::Series> empty_series = {{"s", {}}};
    CHECK_THROWS_AS(svg::render_line_chart({}, empty_series), ConfigError);
    svg::PlotSpec bad;
    bad.y_min = 1.0;
    bad.y_max = 1.0;
    CHECK_THROWS_AS(svg::render_line_chart(bad, demo_series()), ConfigError);
}

TEST_CASE("write_line_chart writes exactly the rendered string") {
    const oracle::TempDir tmp("svg");
    const fs::path path = tmp.path() / "plots" / "chart.svg";
    svg::PlotSpec spec;
    spec.title = "files";
    svg::write_line_chart(path, spec, demo_series());
    CHECK(csv::read_text_file(path) == svg::render_line_chart(spec, demo_series()));
}
