#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "utir/errors.hpp"
#include "utir/parallel.hpp"
#include "utir/raster.hpp"

namespace utir {

struct TileRect {
    int x = 0, y = 0, w = 0, h = 0;
};

/// Grid of fixed-size, overlapping tiles with alpha-blend weights.
///
/// Tiles are always exactly tile_size square; edge tiles are shifted inward
/// rather than shrunk. Images smaller than a tile on some axis are handled by
/// replicate-padding that axis (centered) before filtering and cropping after;
/// the layout then describes the padded grid.
struct TileLayout {
    int image_width = 0, image_height = 0;   // caller's dimensions
    int padded_width = 0, padded_height = 0; // >= tile_size on both axes
    int tile_size = 512;
    double overlap_fraction = 0.10;
    std::vector<int> xstarts, ystarts;
    std::vector<TileRect> tiles;  // row-major: ystarts x xstarts

    bool needs_padding() const {
        return padded_width != image_width || padded_height != image_height;
    }
    int tile_index(int ix, int iy) const { return iy * static_cast<int>(xstarts.size()) + ix; }

    // Blend weight of tile (ix, iy) at padded-grid pixel (x, y); 0 outside the
    // tile. Separable product of the per-axis ramps; at every pixel the weights
    // over covering tiles sum to 1.
    double weight_at(int ix, int iy, int x, int y) const {
        return axis_weight(xstarts, ix, x) * axis_weight(ystarts, iy, y);
    }

    double axis_weight(const std::vector<int>& starts, int i, int p) const {
        const int s = starts[i];
        if (p < s || p >= s + tile_size) return 0.0;
        double raw = axis_raw(starts, i, p);
        double total = 0.0;
        for (int j = 0; j < static_cast<int>(starts.size()); ++j)
            if (p >= starts[j] && p < starts[j] + tile_size) total += axis_raw(starts, j, p);
        return raw / total;
    }

    double axis_raw(const std::vector<int>& starts, int i, int p) const {
        const int n = static_cast<int>(starts.size());
        const int local = p - starts[i];
        double w = 1.0;
        if (i > 0) {
            const int left_band = starts[i - 1] + tile_size - starts[i];
            if (local < left_band) w = std::min(w, static_cast<double>(local + 1) / (left_band + 1));
        }
        if (i < n - 1) {
            const int right_band = starts[i] + tile_size - starts[i + 1];
            const int from_right = tile_size - 1 - local;
            if (from_right < right_band)
                w = std::min(w, static_cast<double>(from_right + 1) / (right_band + 1));
        }
        return w;
    }
};

namespace detail_tile {

// Tile starts along one axis: n = ceil((len - ov) / (tile - ov)) tiles, evenly
// spaced by round(linspace(0, len - tile, n)), n bumped if rounding ever drops
// an adjacent overlap below ov.
inline std::vector<int> axis_starts(int len, int tile, int ov) {
    if (len <= tile) return {0};
    auto make = [&](int n) {
        std::vector<int> s(n);
        for (int i = 0; i < n; ++i)
            s[i] = static_cast<int>(std::lround(static_cast<double>(i) * (len - tile) / (n - 1)));
        return s;
    };
    int n = std::max(2, static_cast<int>(std::ceil(static_cast<double>(len - ov) / (tile - ov))));
    for (;;) {
        std::vector<int> s = make(n);
        bool ok = true;
        for (size_t i = 1; i < s.size(); ++i)
            if (s[i - 1] + tile - s[i] < ov) ok = false;
        if (ok) return s;
        ++n;
    }
}

}  // namespace detail_tile

inline TileLayout plan_tiles(int width, int height, int tile_size, double overlap_fraction) {
    if (width <= 0 || height <= 0) throw ShapeError("plan_tiles: image dimensions must be positive");
    if (tile_size <= 0) throw ParamError("plan_tiles: tile size must be positive");
    if (!(overlap_fraction >= 0.0) || overlap_fraction >= 0.5)
        throw ParamError("plan_tiles: overlap fraction must be in [0, 0.5)");

    TileLayout layout;
    layout.image_width = width;
    layout.image_height = height;
    layout.tile_size = tile_size;
    layout.overlap_fraction = overlap_fraction;
    layout.padded_width = std::max(width, tile_size);
    layout.padded_height = std::max(height, tile_size);

    const int ov = static_cast<int>(std::lround(overlap_fraction * tile_size));
    layout.xstarts = detail_tile::axis_starts(layout.padded_width, tile_size, ov);
    layout.ystarts = detail_tile::axis_starts(layout.padded_height, tile_size, ov);
    for (int sy : layout.ystarts)
        for (int sx : layout.xstarts)
            layout.tiles.push_back({sx, sy, tile_size, tile_size});
    return layout;
}

namespace detail_tile {

struct AxisCover {
    // Per pixel: covering start indices [first, first+count) and the
    // normalized ramp weight of each (count <= 3 for overlap < 0.5).
    std::vector<int> first;
    std::vector<int> count;
    std::vector<std::array<double, 3>> w;
};

inline AxisCover axis_cover(const TileLayout& layout, const std::vector<int>& starts, int len) {
    AxisCover c;
    c.first.resize(len);
    c.count.resize(len);
    c.w.resize(len);
    for (int p = 0; p < len; ++p) {
        int f = -1, n = 0;
        double raw[3] = {0, 0, 0};
        for (int i = 0; i < static_cast<int>(starts.size()); ++i) {
            if (p < starts[i] || p >= starts[i] + layout.tile_size) continue;
            if (f < 0) f = i;
            if (n < 3) raw[n] = layout.axis_raw(starts, i, p);
            ++n;
        }
        if (f < 0 || n == 0 || n > 3) throw ContractError("tile coverage out of range");
        double total = 0.0;
        for (int j = 0; j < n; ++j) total += raw[j];
        c.first[p] = f;
        c.count[p] = n;
        for (int j = 0; j < n; ++j) c.w[p][j] = raw[j] / total;
    }
    return c;
}

// lerp-chain blend: exact when all samples are equal, matches the weight sum
// otherwise (up to rounding).
template <typename Fetch>
double blend(const Fetch& fetch, const double* w, int n) {
    double v = fetch(0);
    if (n == 1) return v;
    double acc = w[0];
    for (int j = 1; j < n; ++j) {
        const double t = w[j] / (acc + w[j]);
        const double u = fetch(j);
        v = v + t * (u - v);
        acc += w[j];
    }
    return v;
}

}  // namespace detail_tile

/// Apply `filter` to every tile and re-stitch with alpha blending. The filter
/// must return a raster of unchanged dimensions.
inline Raster process_tiled(const Raster& input, const TileLayout& layout,
                            const std::function<Raster(const Raster&)>& filter) {
    if (input.width != layout.image_width || input.height != layout.image_height)
        throw ShapeError("process_tiled: raster does not match layout");

    // Build the padded working image when the input is smaller than one tile.
    const int pw = layout.padded_width, ph = layout.padded_height;
    const int offx = (pw - input.width) / 2;
    const int offy = (ph - input.height) / 2;
    Raster work(pw, ph, input.pitch);
    if (layout.needs_padding()) {
        for (int y = 0; y < ph; ++y) {
            const int sy = std::clamp(y - offy, 0, input.height - 1);
            for (int x = 0; x < pw; ++x)
                work.at(x, y) = input.at(std::clamp(x - offx, 0, input.width - 1), sy);
        }
    } else {
        work = input;
    }

    const int T = layout.tile_size;
    std::vector<Raster> filtered(layout.tiles.size());
    parallel_for(0, static_cast<int>(layout.tiles.size()), [&](int t) {
        const TileRect& r = layout.tiles[t];
        Raster tile(T, T, input.pitch);
        for (int y = 0; y < T; ++y)
            for (int x = 0; x < T; ++x) tile.at(x, y) = work.at(r.x + x, r.y + y);
        Raster out = filter(tile);
        if (out.width != T || out.height != T)
            throw ContractError("process_tiled: filter changed tile dimensions");
        filtered[t] = std::move(out);
    });

    const auto cx = detail_tile::axis_cover(layout, layout.xstarts, pw);
    const auto cy = detail_tile::axis_cover(layout, layout.ystarts, ph);
    const int nx = static_cast<int>(layout.xstarts.size());

    Raster stitched(pw, ph, input.pitch);
    parallel_for(0, ph, [&](int y) {
        for (int x = 0; x < pw; ++x) {
            const int fy = cy.first[y], ny = cy.count[y];
            const int fx = cx.first[x], nxc = cx.count[x];
            auto fetch_row = [&](int jy) {
                const int iy = fy + jy;
                auto fetch_col = [&](int jx) {
                    const int ix = fx + jx;
                    const Raster& f = filtered[iy * nx + ix];
                    return f.at(x - layout.xstarts[ix], y - layout.ystarts[iy]);
                };
                return detail_tile::blend(fetch_col, cx.w[x].data(), nxc);
            };
            stitched.at(x, y) = detail_tile::blend(fetch_row, cy.w[y].data(), ny);
        }
    });

    if (!layout.needs_padding()) return stitched;
    Raster out(input.width, input.height, input.pitch);
    for (int y = 0; y < input.height; ++y)
        for (int x = 0; x < input.width; ++x) out.at(x, y) = stitched.at(x + offx, y + offy);
    return out;
}

}  // namespace utir
