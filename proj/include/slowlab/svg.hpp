#pragma once

#include <string>
#include <vector>

namespace slowlab {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_x = false;
    bool log_y = false;
    bool scatter = false;  // markers instead of a polyline
};

/// Deterministic static plot; throws on empty input or non-positive data on a
/// log axis.
void emit_svg(const std::vector<Series>& series, const PlotSpec& spec, const std::string& path);

}  // namespace slowlab
