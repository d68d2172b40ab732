#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "utir/bench.hpp"
#include "utir/errors.hpp"
#include "utir/image_io.hpp"

namespace utir {

// Minimal deterministic chart renderer for the report images (grouped bars,
// sweep curves). No external plotting dependency; labels use a built-in 5x7
// bitmap font.

namespace plotdet {

struct Color {
    unsigned char r, g, b;
};

inline Color method_color(Method m) {
    switch (m) {
        case Method::AS: return {120, 120, 120};
        case Method::CnnOnly: return {230, 150, 40};
        case Method::Utirnet: return {40, 90, 200};
        case Method::GS: return {50, 160, 70};
        case Method::GsCff: return {150, 60, 170};
    }
    return {0, 0, 0};
}

// glyph rows, 5 bits each, MSB = left column
inline const std::array<unsigned char, 7>* glyph(char ch) {
    static const struct {
        char c;
        std::array<unsigned char, 7> rows;
    } table[] = {
        {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
        {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
        {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
        {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
        {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
        {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
        {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
        {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
        {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
        {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
        {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
        {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
        {'D', {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
        {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
        {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
        {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
        {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
        {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
        {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
        {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
        {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
        {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
        {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
        {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
        {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
        {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
        {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
        {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
        {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0a}},
        {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x11, 0x0a, 0x04, 0x04, 0x04}},
        {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
        {',', {0x00, 0x00, 0x00, 0x00, 0x06, 0x04, 0x08}},
        {'-', {0x00, 0x00, 0x00, 0x0e, 0x00, 0x00, 0x00}},
        {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
        {'%', {0x19, 0x1a, 0x02, 0x04, 0x08, 0x0b, 0x13}},
        {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
        {'=', {0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00}},
        {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
        {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
        {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
    };
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    for (const auto& e : table)
        if (e.c == up) return &e.rows;
    return nullptr;
}

struct Canvas {
    int w, h;
    std::vector<unsigned char> px;

    Canvas(int width, int height) : w(width), h(height), px(static_cast<size_t>(width) * height * 3, 255) {}

    void set(int x, int y, Color c) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        unsigned char* p = px.data() + (static_cast<size_t>(y) * w + x) * 3;
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }

    void fill_rect(int x0, int y0, int x1, int y1, Color c) {
        for (int y = std::max(0, y0); y <= std::min(h - 1, y1); ++y)
            for (int x = std::max(0, x0); x <= std::min(w - 1, x1); ++x) set(x, y, c);
    }

    void line(int x0, int y0, int x1, int y1, Color c) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        for (;;) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void text(int x, int y, const std::string& s, Color c, int scale = 1) {
        int cx = x;
        for (char ch : s) {
            if (const auto* rows = glyph(ch)) {
                for (int ry = 0; ry < 7; ++ry)
                    for (int rx = 0; rx < 5; ++rx)
                        if ((*rows)[ry] & (1 << (4 - rx)))
                            fill_rect(cx + rx * scale, y + ry * scale, cx + rx * scale + scale - 1,
                                      y + ry * scale + scale - 1, c);
            }
            cx += 6 * scale;
        }
    }

    int text_width(const std::string& s, int scale = 1) const {
        return static_cast<int>(s.size()) * 6 * scale;
    }

    void save(const std::string& path) const { write_png_rgb8(path, w, h, px); }
};

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

}  // namespace plotdet

/// Grouped bar chart of an evaluation report: one group per
/// (dataset, split, kind) row set, one bar per method, whiskers at +-std.
inline void plot_eval_report(const EvalReport& report, const std::string& path) {
    if (report.rows.empty()) throw DataError("plot: empty report");
    using plotdet::Canvas;
    using plotdet::Color;

    std::vector<std::string> groups;
    std::vector<Method> methods;
    double ymax = 0.0;
    for (const auto& r : report.rows) {
        const std::string g = r.dataset + "/" + r.split + "/" + to_string(r.kind);
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
        ymax = std::max(ymax, r.mean_rmse + r.std_rmse);
    }
    if (!(ymax > 0.0)) ymax = 1.0;
    ymax *= 1.12;

    const int W = std::max(640, 120 + static_cast<int>(groups.size() * (methods.size() + 1)) * 22);
    const int H = 460;
    const int left = 76, right = W - 150, top = 30, bottom = H - 90;
    Canvas cv(W, H);
    const Color black{0, 0, 0}, grid{220, 220, 220};

    for (int t = 0; t <= 5; ++t) {
        const double v = ymax * t / 5.0;
        const int y = bottom - static_cast<int>((bottom - top) * t / 5.0);
        cv.line(left, y, right, y, t == 0 ? black : grid);
        cv.text(8, y - 3, plotdet::fmt_tick(v), black);
    }
    cv.line(left, top, left, bottom, black);
    cv.text(8, 8, "MEAN RMSE", black);

    const int ngroup = static_cast<int>(groups.size());
    const double group_w = static_cast<double>(right - left) / ngroup;
    const int bar_w = std::max(4, static_cast<int>(group_w / (methods.size() + 1)));

    for (const auto& r : report.rows) {
        const std::string g = r.dataset + "/" + r.split + "/" + to_string(r.kind);
        const int gi = static_cast<int>(std::find(groups.begin(), groups.end(), g) - groups.begin());
        const int mi =
            static_cast<int>(std::find(methods.begin(), methods.end(), r.method) - methods.begin());
        const int x0 = left + static_cast<int>(gi * group_w) + 4 + mi * bar_w;
        const int yv = bottom - static_cast<int>((bottom - top) * (r.mean_rmse / ymax));
        cv.fill_rect(x0, yv, x0 + bar_w - 2, bottom - 1, plotdet::method_color(r.method));
        const int xw = x0 + bar_w / 2 - 1;
        const int ylo = bottom - static_cast<int>((bottom - top) *
                                                  (std::max(0.0, r.mean_rmse - r.std_rmse) / ymax));
        const int yhi =
            bottom - static_cast<int>((bottom - top) * ((r.mean_rmse + r.std_rmse) / ymax));
        cv.line(xw, yhi, xw, ylo, black);
        cv.line(xw - 2, yhi, xw + 2, yhi, black);
        cv.line(xw - 2, ylo, xw + 2, ylo, black);
    }

    for (int gi = 0; gi < ngroup; ++gi) {
        // stacked two-line group labels to keep them readable
        const std::string& g = groups[gi];
        const auto cut = g.find('/');
        const std::string l1 = g.substr(0, cut);
        std::string l2 = cut == std::string::npos ? "" : g.substr(cut + 1);
        const int x = left + static_cast<int>(gi * group_w) + 2;
        cv.text(x, bottom + 8, l1.substr(0, 12), black);
        cv.text(x, bottom + 20, l2.substr(0, 12), black);
    }

    int ly = top;
    for (Method m : methods) {
        cv.fill_rect(right + 10, ly, right + 22, ly + 8, plotdet::method_color(m));
        cv.text(right + 28, ly + 1, to_string(m), black);
        ly += 16;
    }
    cv.save(path);
}

struct ZSweepCurve {
    std::string label;
    std::vector<ZSweepPoint> points;
};

/// Relative-RMSE curves vs z (one per network), minimum marked per curve.
inline void plot_z_sweep(const std::vector<ZSweepCurve>& curves, const std::string& path) {
    if (curves.empty() || curves.front().points.empty()) throw DataError("plot: empty sweep");
    using plotdet::Canvas;
    using plotdet::Color;

    double zmin = 1e300, zmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            zmin = std::min(zmin, p.z);
            zmax = std::max(zmax, p.z);
            ymin = std::min(ymin, p.relative_pct);
            ymax = std::max(ymax, p.relative_pct);
        }
    const double ypad = std::max(1.0, 0.08 * (ymax - ymin));
    ymin -= ypad;
    ymax += ypad;

    const int W = 720, H = 440;
    const int left = 76, right = W - 40, top = 30, bottom = H - 60;
    Canvas cv(W, H);
    const Color black{0, 0, 0}, grid{220, 220, 220};
    const Color palette[] = {{40, 90, 200}, {200, 60, 60}, {50, 160, 70}, {150, 60, 170}};

    auto px = [&](double z) {
        return left + static_cast<int>((right - left) * (z - zmin) / (zmax - zmin));
    };
    auto py = [&](double v) {
        return bottom - static_cast<int>((bottom - top) * (v - ymin) / (ymax - ymin));
    };

    for (int t = 0; t <= 5; ++t) {
        const double v = ymin + (ymax - ymin) * t / 5.0;
        cv.line(left, py(v), right, py(v), t == 0 ? black : grid);
        cv.text(8, py(v) - 3, plotdet::fmt_tick(v), black);
    }
    for (int t = 0; t <= 6; ++t) {
        const double z = zmin + (zmax - zmin) * t / 6.0;
        cv.line(px(z), bottom, px(z), bottom + 4, black);
        cv.text(px(z) - 18, bottom + 8, plotdet::fmt_tick(z * 1e3), black);
    }
    cv.line(left, top, left, bottom, black);
    cv.text(8, 8, "UTIRNET/AS RMSE (%)", black);
    cv.text(right - 60, bottom + 24, "Z (MM)", black);

    int ci = 0, ly = top;
    for (const auto& c : curves) {
        const Color col = palette[ci % 4];
        for (size_t i = 1; i < c.points.size(); ++i)
            cv.line(px(c.points[i - 1].z), py(c.points[i - 1].relative_pct), px(c.points[i].z),
                    py(c.points[i].relative_pct), col);
        size_t best = 0;
        for (size_t i = 1; i < c.points.size(); ++i)
            if (c.points[i].relative_pct < c.points[best].relative_pct) best = i;
        const int bx = px(c.points[best].z), by = py(c.points[best].relative_pct);
        cv.fill_rect(bx - 3, by - 3, bx + 3, by + 3, col);
        cv.line(bx - 5, by, bx + 5, by, black);
        cv.line(bx, by - 5, bx, by + 5, black);
        cv.fill_rect(right - 150, ly, right - 138, ly + 8, col);
        cv.text(right - 132, ly + 1, c.label.substr(0, 20), black);
        ly += 16;
        ++ci;
    }
    cv.save(path);
}

}  // namespace utir
