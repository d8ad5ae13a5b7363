#include "slowlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace slowlab {

namespace {

constexpr double kWidth = 800.0, kHeight = 560.0;
constexpr double kLeft = 70.0, kRight = 780.0, kTop = 50.0, kBottom = 500.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

double transform(double v, bool log_scale) { return log_scale ? std::log10(v) : v; }

}  // namespace

void emit_svg(const std::vector<Series>& series, const PlotSpec& spec, const std::string& path) {
    if (series.empty())
        throw std::invalid_argument("emit_svg: no series");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        if (s.x.empty() || s.x.size() != s.y.size())
            throw std::invalid_argument("emit_svg: empty or ragged series '" + s.name + "'");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((spec.log_x && s.x[i] <= 0.0) || (spec.log_y && s.y[i] <= 0.0))
                throw std::invalid_argument("emit_svg: non-positive value on log axis");
            xmin = std::min(xmin, transform(s.x[i], spec.log_x));
            xmax = std::max(xmax, transform(s.x[i], spec.log_x));
            ymin = std::min(ymin, transform(s.y[i], spec.log_y));
            ymax = std::max(ymax, transform(s.y[i], spec.log_y));
        }
    }
    if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
    if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
    const auto px = [&](double v) {
        return kLeft + (transform(v, spec.log_x) - xmin) / (xmax - xmin) * (kRight - kLeft);
    };
    const auto py = [&](double v) {
        return kBottom - (transform(v, spec.log_y) - ymin) / (ymax - ymin) * (kBottom - kTop);
    };

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << num(kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" "
           "font-size=\"18\" font-family=\"sans-serif\">" << spec.title << "</text>\n";

    // axes and ticks
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kBottom) << "\" x2=\"" << num(kRight)
        << "\" y2=\"" << num(kBottom) << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft)
        << "\" y2=\"" << num(kBottom) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 5.0;
        const double fy = ymin + (ymax - ymin) * i / 5.0;
        const double vx = spec.log_x ? std::pow(10.0, fx) : fx;
        const double vy = spec.log_y ? std::pow(10.0, fy) : fy;
        const double gx = kLeft + (kRight - kLeft) * i / 5.0;
        const double gy = kBottom - (kBottom - kTop) * i / 5.0;
        out << "<line x1=\"" << num(gx) << "\" y1=\"" << num(kBottom) << "\" x2=\"" << num(gx)
            << "\" y2=\"" << num(kBottom + 6) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << num(gx) << "\" y=\"" << num(kBottom + 22)
            << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << label(vx)
            << "</text>\n"
            << "<line x1=\"" << num(kLeft - 6) << "\" y1=\"" << num(gy) << "\" x2=\"" << num(kLeft)
            << "\" y2=\"" << num(gy) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << num(kLeft - 10) << "\" y=\"" << num(gy + 4)
            << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">" << label(vy)
            << "</text>\n";
    }
    out << "<text x=\"" << num((kLeft + kRight) / 2) << "\" y=\"" << num(kHeight - 12)
        << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\">" << spec.xlabel
        << "</text>\n"
        << "<text x=\"18\" y=\"" << num((kTop + kBottom) / 2)
        << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 18 " << num((kTop + kBottom) / 2) << ")\">" << spec.ylabel
        << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 8];
        if (spec.scatter) {
            for (std::size_t i = 0; i < s.x.size(); ++i)
                out << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
                    << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        } else {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                out << (i ? " " : "") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
            out << "\"/>\n";
        }
        const double ly = kTop + 18.0 * static_cast<double>(si);
        out << "<rect x=\"" << num(kRight - 150) << "\" y=\"" << num(ly) << "\" width=\"12\" "
            "height=\"12\" fill=\"" << color << "\"/>\n"
            << "<text x=\"" << num(kRight - 132) << "\" y=\"" << num(ly + 10)
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.name << "</text>\n";
    }
    out << "</svg>\n";
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

}  // namespace slowlab
