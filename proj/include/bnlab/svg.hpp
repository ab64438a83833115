/*
 * Copyright (C) 2026 The bnlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BNLAB_SVG_HPP
#define BNLAB_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace bnlab::svg {

struct Line {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
    std::string color = "#1f77b4";
    bool dashed = false;
    double width = 1.5;
};

/// Histogram bars given by bin edges (size bins+1) and heights.
struct Bars {
    std::string label;
    std::vector<double> edges;
    std::vector<double> heights;
    std::string color = "#9ecae1";
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Line> lines;
    std::vector<Bars> bars;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string &s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Axis {
    double lo, hi;
    bool log;
    double map(double v, double from, double to) const {
        const double a = log ? std::log10(lo) : lo;
        const double b = log ? std::log10(hi) : hi;
        const double x = log ? std::log10(v) : v;
        return from + (x - a) / (b - a) * (to - from);
    }
};

inline Axis make_axis(double lo, double hi, bool log) {
    if (!(lo < hi)) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        lo -= pad;
        hi += pad;
    }
    if (log) {
        lo = std::pow(10.0, std::floor(std::log10(lo)));
        hi = std::pow(10.0, std::ceil(std::log10(hi)));
    }
    return {lo, hi, log};
}

inline std::vector<double> ticks(const Axis &ax) {
    std::vector<double> t;
    if (ax.log) {
        for (double v = ax.lo; v <= ax.hi * 1.0001; v *= 10.0)
            t.push_back(v);
    } else {
        const double span = ax.hi - ax.lo;
        const double raw = span / 5.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (raw <= m * mag) {
                step = m * mag;
                break;
            }
        for (double v = std::ceil(ax.lo / step) * step; v <= ax.hi + 1e-9 * span; v += step)
            t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    }
    return t;
}

} // namespace detail

/// Static SVG 1.1 document, no scripting. Non-positive values are skipped on
/// log axes.
inline std::string render(const Chart &chart, int width = 720, int height = 440) {
    const double left = 70, right = 170, top = 40, bottom = 55;
    const double x0 = left, x1 = width - right, y0 = height - bottom, y1 = top;

    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    auto take = [&](double x, double y) {
        if (!std::isfinite(x) || !std::isfinite(y))
            return;
        if (chart.log_x && x <= 0.0)
            return;
        if (chart.log_y && y <= 0.0)
            return;
        xlo = std::min(xlo, x);
        xhi = std::max(xhi, x);
        ylo = std::min(ylo, y);
        yhi = std::max(yhi, y);
    };
    for (const auto &l : chart.lines)
        for (std::size_t i = 0; i < l.xs.size() && i < l.ys.size(); ++i)
            take(l.xs[i], l.ys[i]);
    for (const auto &b : chart.bars) {
        for (std::size_t i = 0; i + 1 < b.edges.size() && i < b.heights.size(); ++i) {
            take(b.edges[i], b.heights[i]);
            take(b.edges[i + 1], 0.0);
        }
    }
    if (!std::isfinite(xlo)) {
        xlo = 0.0;
        xhi = 1.0;
        ylo = chart.log_y ? 0.1 : 0.0;
        yhi = 1.0;
    }
    const auto ax = detail::make_axis(xlo, xhi, chart.log_x);
    const auto ay = detail::make_axis(ylo, yhi, chart.log_y);

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">"
      << detail::escape(chart.title) << "</text>\n";

    for (double t : detail::ticks(ax)) {
        const double px = ax.map(t, x0, x1);
        o << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\"" << y1
          << "\" stroke=\"#eeeeee\"/>\n"
          << "<text x=\"" << px << "\" y=\"" << y0 + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fmt(t)
          << "</text>\n";
    }
    for (double t : detail::ticks(ay)) {
        const double py = ay.map(t, y0, y1);
        o << "<line x1=\"" << x0 << "\" y1=\"" << py << "\" x2=\"" << x1 << "\" y2=\"" << py
          << "\" stroke=\"#eeeeee\"/>\n"
          << "<text x=\"" << x0 - 6 << "\" y=\"" << py + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fmt(t)
          << "</text>\n";
    }
    o << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
      << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << detail::escape(chart.x_label) << "</text>\n"
      << "<text transform=\"translate(16," << (y0 + y1) / 2
      << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << detail::escape(chart.y_label) << "</text>\n";

    for (const auto &b : chart.bars) {
        for (std::size_t i = 0; i + 1 < b.edges.size() && i < b.heights.size(); ++i) {
            if (chart.log_y && b.heights[i] <= 0.0)
                continue;
            const double px0 = ax.map(b.edges[i], x0, x1);
            const double px1 = ax.map(b.edges[i + 1], x0, x1);
            const double py = ay.map(b.heights[i], y0, y1);
            const double base = chart.log_y ? y0 : ay.map(0.0, y0, y1);
            o << "<rect x=\"" << px0 << "\" y=\"" << std::min(py, base) << "\" width=\""
              << std::max(px1 - px0, 0.0) << "\" height=\"" << std::abs(base - py) << "\" fill=\""
              << b.color << "\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
        }
    }
    for (const auto &l : chart.lines) {
        o << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"" << l.width << '"';
        if (l.dashed)
            o << " stroke-dasharray=\"6,4\"";
        o << " points=\"";
        for (std::size_t i = 0; i < l.xs.size() && i < l.ys.size(); ++i) {
            if (!std::isfinite(l.xs[i]) || !std::isfinite(l.ys[i]))
                continue;
            if ((chart.log_x && l.xs[i] <= 0.0) || (chart.log_y && l.ys[i] <= 0.0))
                continue;
            o << ax.map(l.xs[i], x0, x1) << ',' << ay.map(l.ys[i], y0, y1) << ' ';
        }
        o << "\"/>\n";
    }

    double ly = y1 + 10;
    auto legend = [&](const std::string &label, const std::string &color, bool dashed) {
        if (label.empty())
            return;
        o << "<line x1=\"" << x1 + 12 << "\" y1=\"" << ly << "\" x2=\"" << x1 + 36 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"6,4\"" : "")
          << "/>\n<text x=\"" << x1 + 42 << "\" y=\"" << ly + 4
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << detail::escape(label) << "</text>\n";
        ly += 18;
    };
    for (const auto &b : chart.bars)
        legend(b.label, b.color, false);
    for (const auto &l : chart.lines)
        legend(l.label, l.color, l.dashed);
    o << "</svg>\n";
    return o.str();
}

} // namespace bnlab::svg

#endif // BNLAB_SVG_HPP
