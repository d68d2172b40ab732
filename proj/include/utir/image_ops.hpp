#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "utir/errors.hpp"
#include "utir/parallel.hpp"
#include "utir/raster.hpp"

namespace utir {

/// Separable Gaussian blur with replicate borders. Kernel radius ceil(3*sigma).
inline Raster gaussian_blur(const Raster& in, double sigma) {
    if (!(sigma > 0.0)) return in;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& w : k) w /= sum;

    Raster tmp(in.width, in.height, in.pitch);
    parallel_for(0, in.height, [&](int y) {
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int sx = std::clamp(x + i, 0, in.width - 1);
                acc += k[i + radius] * in.at(sx, y);
            }
            tmp.at(x, y) = acc;
        }
    });
    Raster out(in.width, in.height, in.pitch);
    parallel_for(0, in.height, [&](int y) {
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int sy = std::clamp(y + i, 0, in.height - 1);
                acc += k[i + radius] * tmp.at(x, sy);
            }
            out.at(x, y) = acc;
        }
    });
    return out;
}

/// High-pass: subtract the Gaussian low-pass estimate.
inline Raster highpass_gaussian(const Raster& in, double sigma) {
    Raster low = gaussian_blur(in, sigma);
    Raster out(in.width, in.height, in.pitch);
    for (size_t i = 0; i < in.v.size(); ++i) out.v[i] = in.v[i] - low.v[i];
    return out;
}

/// Bilinear resize with a Gaussian antialias prefilter on downscaling.
inline Raster resize_bilinear(const Raster& in, int w, int h) {
    if (w <= 0 || h <= 0) throw ShapeError("resize target must be positive");
    if (w == in.width && h == in.height) return in;
    const double sx = static_cast<double>(in.width) / w;
    const double sy = static_cast<double>(in.height) / h;
    Raster src = in;
    const double s = std::max(sx, sy);
    if (s > 1.0) {
        // Matches the usual prefilter choice: stddev grows with the shrink factor.
        const double sigma = 0.5 * std::sqrt(s * s - 1.0);
        if (sigma > 0.1) src = gaussian_blur(in, sigma);
    }
    Raster out(w, h, in.pitch * sx);  // pitch follows the horizontal rescale
    for (int y = 0; y < h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, in.height - 1);
        const int y1 = std::min(y0 + 1, in.height - 1);
        const double ty = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, in.width - 1);
            const int x1 = std::min(x0 + 1, in.width - 1);
            const double tx = std::clamp(fx - x0, 0.0, 1.0);
            const double a = src.at(x0, y0) + tx * (src.at(x1, y0) - src.at(x0, y0));
            const double b = src.at(x0, y1) + tx * (src.at(x1, y1) - src.at(x0, y1));
            out.at(x, y) = a + ty * (b - a);
        }
    }
    return out;
}

/// Min-max normalization into [lo, hi]. A constant input cannot be normalized;
/// it maps to the interval midpoint and reports the degeneracy to the caller.
inline bool normalize_minmax(Raster& r, double lo, double hi) {
    auto [mn, mx] = min_max(r);
    if (mx == mn) {
        const double mid = 0.5 * (lo + hi);
        std::fill(r.v.begin(), r.v.end(), mid);
        return false;
    }
    const double scale = (hi - lo) / (mx - mn);
    for (double& x : r.v) x = lo + (x - mn) * scale;
    return true;
}

enum class DenoiserKind { identity, nlm };

/// Patch-averaging denoiser in the non-local-means spirit: 3x3 patches compared
/// over a 7x7 search window, Gaussian weighting on patch distance.
inline Raster denoise_nlm(const Raster& in, double strength = 0.08) {
    const int pr = 1;   // patch radius
    const int wr = 3;   // search radius
    const double h2 = strength * strength * (2 * pr + 1) * (2 * pr + 1);
    Raster out(in.width, in.height, in.pitch);
    auto sample = [&](int x, int y) {
        return in.at(std::clamp(x, 0, in.width - 1), std::clamp(y, 0, in.height - 1));
    };
    parallel_for(0, in.height, [&](int y) {
        for (int x = 0; x < in.width; ++x) {
            double wsum = 0.0, acc = 0.0;
            for (int dy = -wr; dy <= wr; ++dy) {
                for (int dx = -wr; dx <= wr; ++dx) {
                    double d2 = 0.0;
                    for (int py = -pr; py <= pr; ++py)
                        for (int px = -pr; px <= pr; ++px) {
                            const double d = sample(x + px, y + py) - sample(x + dx + px, y + dy + py);
                            d2 += d * d;
                        }
                    const double w = std::exp(-d2 / h2);
                    wsum += w;
                    acc += w * sample(x + dx, y + dy);
                }
            }
            out.at(x, y) = acc / wsum;
        }
    });
    return out;
}

using Denoiser = std::function<Raster(const Raster&)>;

inline Denoiser make_denoiser(DenoiserKind kind) {
    switch (kind) {
        case DenoiserKind::identity:
            return [](const Raster& r) { return r; };
        case DenoiserKind::nlm:
        default:
            return [](const Raster& r) { return denoise_nlm(r); };
    }
}

}  // namespace utir
