#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "spectral_ep.hpp"

namespace extliou {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Panel {
    double x0, y0, w, h;   // placement in the document
    std::string xlabel, ylabel;
};

inline void range_of(const std::vector<Series>& s, double& lo, double& hi, bool use_x)
{
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const auto& ser : s)
        for (double v : use_x ? ser.x : ser.y)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    if (!std::isfinite(lo)) {
        lo = 0;
        hi = 1;
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
        lo -= 0.5;
        hi += 0.5;
    }
}

inline void draw_panel(std::ostringstream& os, const Panel& p, const std::vector<Series>& s)
{
    double xl, xh, yl, yh;
    range_of(s, xl, xh, true);
    range_of(s, yl, yh, false);
    const double pad = 0.05 * (yh - yl);
    yl -= pad;
    yh += pad;
    auto X = [&](double x) { return p.x0 + (x - xl) / (xh - xl) * p.w; };
    auto Y = [&](double y) { return p.y0 + p.h - (y - yl) / (yh - yl) * p.h; };
    os << "<rect x=\"" << p.x0 << "\" y=\"" << p.y0 << "\" width=\"" << p.w << "\" height=\"" << p.h
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xl + (xh - xl) * k / 4, yv = yl + (yh - yl) * k / 4;
        os << "<text x=\"" << X(xv) << "\" y=\"" << p.y0 + p.h + 16
           << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
        os << "<text x=\"" << p.x0 - 6 << "\" y=\"" << Y(yv) + 4
           << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
    }
    os << "<text x=\"" << p.x0 + p.w / 2 << "\" y=\"" << p.y0 + p.h + 34
       << "\" font-size=\"13\" text-anchor=\"middle\">" << p.xlabel << "</text>\n";
    os << "<text x=\"" << p.x0 - 52 << "\" y=\"" << p.y0 + p.h / 2 << "\" font-size=\"13\" "
       << "text-anchor=\"middle\" transform=\"rotate(-90 " << p.x0 - 52 << ' ' << p.y0 + p.h / 2
       << ")\">" << p.ylabel << "</text>\n";
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::string pts;
        auto flush = [&] {
            if (!pts.empty())
                os << "<polyline fill=\"none\" stroke=\"" << colors[i % 8]
                   << "\" stroke-width=\"1.2\" points=\"" << pts << "\"/>\n";
            pts.clear();
        };
        for (std::size_t k = 0; k < s[i].x.size(); ++k) {
            if (!std::isfinite(s[i].x[k]) || !std::isfinite(s[i].y[k])) {
                flush();
                continue;
            }
            pts += fmt(X(s[i].x[k])) + "," + fmt(Y(s[i].y[k])) + " ";
        }
        flush();
    }
}

} // namespace detail

/// Two stacked panels, real and imaginary parts, one polyline per track.
inline std::string render_svg(const SweepTable& t, const std::string& xlabel = "",
                              const std::string& unit = "")
{
    if (t.grid.empty() || t.tracks.empty() || t.tracks.front().empty())
        throw ParameterError("render_svg: empty sweep");
    const std::size_t ntr = t.tracks.front().size();
    std::vector<Series> re(ntr), im(ntr);
    for (std::size_t j = 0; j < ntr; ++j) {
        re[j].x = im[j].x = t.grid;
        for (std::size_t k = 0; k < t.grid.size(); ++k) {
            re[j].y.push_back(t.tracks[k][j].real());
            im[j].y.push_back(t.tracks[k][j].imag());
        }
    }
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
          "viewBox=\"0 0 640 640\">\n<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
    const std::string xl = xlabel.empty() ? t.parameter : xlabel;
    detail::draw_panel(os, {80, 20, 530, 240, xl, "Re λ" + unit}, re);
    detail::draw_panel(os, {80, 340, 530, 240, xl, "Im λ" + unit}, im);
    os << "</svg>\n";
    return os.str();
}

inline std::string render_svg(const std::vector<Series>& series, const std::string& xlabel,
                              const std::string& ylabel)
{
    bool any = false;
    for (const auto& s : series)
        any = any || !s.x.empty();
    if (!any)
        throw ParameterError("render_svg: empty data");
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" "
          "viewBox=\"0 0 640 360\">\n<rect width=\"640\" height=\"360\" fill=\"white\"/>\n";
    detail::draw_panel(os, {80, 20, 530, 280, xlabel, ylabel}, series);
    os << "</svg>\n";
    return os.str();
}

} // namespace extliou
