#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dipole/io.hpp"

// Minimal static SVG output: line charts and heatmaps.
namespace dipole::plot {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct Axes {
    std::string title, x_label, y_label;
    bool log2_x = false;
};

namespace detail {

inline constexpr int width = 640, height = 440, left = 70, right = 150, top = 40, bottom = 60;

inline const char* color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return palette[i % 10];
}

inline std::string num(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

inline void save(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body << "</svg>\n";
    if (!out) throw IoError("failed writing " + path.string());
}

inline void frame(std::ostringstream& s, const Axes& ax, double x0, double x1, double y0, double y1) {
    const int pw = width - left - right, ph = height - top - bottom;
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = left + pw * i / 4.0, fy = top + ph * (1.0 - i / 4.0);
        s << "<text x=\"" << fx << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
          << num(x0 + (x1 - x0) * i / 4.0) << "</text>\n";
        s << "<text x=\"" << left - 6 << "\" y=\"" << fy + 4 << "\" text-anchor=\"end\">" << num(y0 + (y1 - y0) * i / 4.0)
          << "</text>\n";
    }
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << top - 14 << "\" text-anchor=\"middle\" font-size=\"14\">" << ax.title
      << "</text>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 16 << "\" text-anchor=\"middle\">"
      << (ax.log2_x ? "log2 " : "") << ax.x_label << "</text>\n";
    s << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + ph / 2
      << ")\">" << ax.y_label << "</text>\n";
}

}  // namespace detail

inline void line_chart(const std::filesystem::path& path, const std::vector<Series>& series, const Axes& ax) {
    using namespace detail;
    auto tx = [&](double x) { return ax.log2_x ? std::log2(x) : x; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    const int pw = width - left - right, ph = height - top - bottom;
    std::ostringstream s;
    frame(s, ax, x0, x1, y0, y1);
    for (std::size_t k = 0; k < series.size(); ++k) {
        s << "<polyline fill=\"none\" stroke=\"" << color(k) << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            if (!std::isfinite(series[k].y[i])) continue;
            s << left + pw * (tx(series[k].x[i]) - x0) / (x1 - x0) << ','
              << top + ph * (1.0 - (series[k].y[i] - y0) / (y1 - y0)) << ' ';
        }
        s << "\"/>\n";
        const int ly = top + 14 + 16 * static_cast<int>(k);
        s << "<line x1=\"" << width - right + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << width - right + 30 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color(k) << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << width - right + 34 << "\" y=\"" << ly << "\">" << series[k].label << "</text>\n";
    }
    save(path, s.str());
}

// values[i * ys.size() + j] at (xs[i], ys[j]); blue (low) to red (high).
inline void heatmap(const std::filesystem::path& path, const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::vector<double>& values, const Axes& ax) {
    using namespace detail;
    double v0 = std::numeric_limits<double>::infinity(), v1 = -v0;
    for (double v : values)
        if (std::isfinite(v)) v0 = std::min(v0, v), v1 = std::max(v1, v);
    if (!(v1 > v0)) v1 = v0 + 1.0;
    const int pw = width - left - right, ph = height - top - bottom;
    const double cw = static_cast<double>(pw) / xs.size(), ch = static_cast<double>(ph) / ys.size();
    std::ostringstream s;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) {
            const double v = values[i * ys.size() + j];
            const double u = std::isfinite(v) ? (v - v0) / (v1 - v0) : 0.0;
            const int r = static_cast<int>(255 * u), b = static_cast<int>(255 * (1 - u));
            s << "<rect x=\"" << left + cw * i << "\" y=\"" << top + ph - ch * (j + 1) << "\" width=\"" << cw + 0.5
              << "\" height=\"" << ch + 0.5 << "\" fill=\"rgb(" << r << ",40," << b << ")\"/>\n";
        }
    frame(s, ax, xs.front(), xs.back(), ys.front(), ys.back());
    s << "<text x=\"" << width - right + 10 << "\" y=\"" << top + 14 << "\">max " << num(v1) << "</text>\n";
    s << "<text x=\"" << width - right + 10 << "\" y=\"" << top + 30 << "\">min " << num(v0) << "</text>\n";
    save(path, s.str());
}

}  // namespace dipole::plot
