// svg.hpp - minimal |Gamma| heatmap writer (rectangles on a viridis-like ramp).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "kerrspec/csv.hpp"
#include "kerrspec/spectrum.hpp"

namespace kerrspec::svg {

/// Linear interpolation on an 8-stop viridis ramp, t in [0, 1].
inline std::string color(double t) {
    static constexpr std::array<std::array<int, 3>, 8> stops{{{68, 1, 84},
                                                             {70, 50, 127},
                                                             {54, 92, 141},
                                                             {39, 127, 142},
                                                             {31, 161, 135},
                                                             {74, 194, 109},
                                                             {159, 218, 58},
                                                             {253, 231, 37}}};
    if (!std::isfinite(t)) return "#ff00ff";
    t = std::clamp(t, 0.0, 1.0) * 7.0;
    const int i = std::min(6, static_cast<int>(t));
    const double u = t - i;
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(stops[i][c] + u * (stops[i + 1][c] - stops[i][c])));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

/// Detuning on the vertical axis (increasing upward), power on the horizontal axis.
/// Color spans |Gamma| from 0 to 1; failed points are magenta.
inline std::string heatmap(const SpectrumGrid& g, const std::string& title) {
    const int cell_w = std::max(2, 600 / static_cast<int>(std::max<std::size_t>(1, g.n_pow())));
    const int cell_h = std::max(2, 400 / static_cast<int>(std::max<std::size_t>(1, g.n_det())));
    const int left = 80, top = 30, bottom = 50, right = 20;
    const int w = cell_w * static_cast<int>(g.n_pow());
    const int h = cell_h * static_cast<int>(g.n_det());
    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" font-family=\"sans-serif\" font-size=\"12\">\n",
                  left + w + right, top + h + bottom);
    s += buf;
    s += "<title>" + title + "</title>\n";
    for (std::size_t ip = 0; ip < g.n_pow(); ++ip)
        for (std::size_t id = 0; id < g.n_det(); ++id) {
            const int x = left + static_cast<int>(ip) * cell_w;
            const int y = top + h - (static_cast<int>(id) + 1) * cell_h;
            std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"/>\n", x, y,
                          cell_w, cell_h, color(std::abs(g.at(id, ip))).c_str());
            s += buf;
        }
    auto label = [&](int x, int y, const std::string& text, const char* anchor) {
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"%s\">", x, y, anchor);
        s += buf + text + "</text>\n";
    };
    label(left + w / 2, 18, title, "middle");
    if (!g.detunings.empty()) {
        label(left - 6, top + h, csv::format_number(to_mhz(g.detunings.front())), "end");
        label(left - 6, top + 12, csv::format_number(to_mhz(g.detunings.back())), "end");
        label(left - 6, top + h / 2, "MHz", "end");
    }
    if (!g.powers.empty()) {
        label(left, top + h + 16, csv::format_number(g.powers.front()), "start");
        label(left + w, top + h + 16, csv::format_number(g.powers.back()), "end");
        label(left + w / 2, top + h + 36, "power (dBm)", "middle");
    }
    s += "</svg>\n";
    return s;
}

} // namespace kerrspec::svg
