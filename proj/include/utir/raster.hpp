#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "utir/errors.hpp"

namespace utir {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

using cdouble = std::complex<double>;

/// Real-valued 2-D grid, row-major, with a physical sampling pitch [m/px].
struct Raster {
    int width = 0;
    int height = 0;
    double pitch = 1.0;
    std::vector<double> v;

    Raster() = default;
    Raster(int w, int h, double pitch_ = 1.0, double fill = 0.0)
        : width(w), height(h), pitch(pitch_), v(static_cast<size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw ShapeError("raster dimensions must be positive");
        if (!(pitch_ > 0.0)) throw ParamError("raster pitch must be positive");
    }

    size_t size() const { return v.size(); }
    double& at(int x, int y) { return v[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return v[static_cast<size_t>(y) * width + x]; }
    bool same_shape(const Raster& o) const { return width == o.width && height == o.height; }
};

/// Complex optical field on the same grid conventions as Raster.
struct ComplexField {
    int width = 0;
    int height = 0;
    double pitch = 1.0;
    std::vector<cdouble> v;

    ComplexField() = default;
    ComplexField(int w, int h, double pitch_ = 1.0, cdouble fill = {0.0, 0.0})
        : width(w), height(h), pitch(pitch_), v(static_cast<size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw ShapeError("field dimensions must be positive");
        if (!(pitch_ > 0.0)) throw ParamError("field pitch must be positive");
    }

    size_t size() const { return v.size(); }
    cdouble& at(int x, int y) { return v[static_cast<size_t>(y) * width + x]; }
    cdouble at(int x, int y) const { return v[static_cast<size_t>(y) * width + x]; }
    bool same_shape(const ComplexField& o) const { return width == o.width && height == o.height; }
};

/// Optical system description. pixel_size is the camera pixel pitch; the field
/// is sampled at pixel_size / magnification (the effective pixel size).
struct SystemParams {
    double wavelength = 405e-9;
    double pixel_size = 2.4e-6;
    double z_distance = 2.6e-3;
    double magnification = 1.0;

    double effective_pitch() const { return pixel_size / magnification; }

    void validate() const {
        if (!(wavelength > 0.0)) throw ParamError("wavelength must be positive");
        if (!(pixel_size > 0.0)) throw ParamError("pixel size must be positive");
        if (!(z_distance > 0.0)) throw ParamError("z distance must be positive");
        if (!(magnification > 0.0)) throw ParamError("magnification must be positive");
    }
};

/// Wrap an angle into (-pi, pi], preserving x mod 2pi.
inline double wrap_phase(double x) {
    double y = std::remainder(x, kTwoPi);  // lands in [-pi, pi]
    if (y <= -kPi) y += kTwoPi;
    return y;
}

/// Amplitude/phase decomposition. Phase of an exactly-zero sample is 0.
inline std::pair<Raster, Raster> split(const ComplexField& f) {
    Raster amp(f.width, f.height, f.pitch);
    Raster ph(f.width, f.height, f.pitch);
    for (size_t i = 0; i < f.v.size(); ++i) {
        const cdouble z = f.v[i];
        amp.v[i] = std::abs(z);
        ph.v[i] = (z.real() == 0.0 && z.imag() == 0.0) ? 0.0 : std::arg(z);
    }
    return {std::move(amp), std::move(ph)};
}

inline ComplexField combine(const Raster& amplitude, const Raster& phase) {
    if (!amplitude.same_shape(phase))
        throw ShapeError("combine: amplitude and phase dimensions differ");
    if (amplitude.pitch != phase.pitch)
        throw ShapeError("combine: amplitude and phase pitch differ");
    ComplexField f(amplitude.width, amplitude.height, amplitude.pitch);
    for (size_t i = 0; i < f.v.size(); ++i)
        f.v[i] = std::polar(amplitude.v[i], phase.v[i]);
    return f;
}

inline double rmse(const Raster& a, const Raster& b) {
    if (!a.same_shape(b)) throw ShapeError("rmse: dimensions differ");
    double acc = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v[i] - b.v[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.v.size()));
}

// Root-mean-square magnitude, handy for relative error reporting.
inline double rms(const Raster& a) {
    double acc = 0.0;
    for (double x : a.v) acc += x * x;
    return std::sqrt(acc / static_cast<double>(a.v.size()));
}

inline double rms(const ComplexField& f) {
    double acc = 0.0;
    for (const cdouble& z : f.v) acc += std::norm(z);
    return std::sqrt(acc / static_cast<double>(f.v.size()));
}

inline double rel_rmse(const ComplexField& a, const ComplexField& b) {
    if (!a.same_shape(b)) throw ShapeError("rel_rmse: dimensions differ");
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        num += std::norm(a.v[i] - b.v[i]);
        den += std::norm(b.v[i]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num / a.v.size());
}

inline double mean(const Raster& a) {
    double acc = 0.0;
    for (double x : a.v) acc += x;
    return acc / static_cast<double>(a.v.size());
}

// Median as the midpoint convention: average of the two middle elements for
// even counts.
inline double median_of(std::vector<double> values) {
    if (values.empty()) throw DataError("median of empty range");
    const size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double m = values[mid];
    if (values.size() % 2 == 0) {
        std::nth_element(values.begin(), values.begin() + mid - 1, values.begin() + mid);
        m = 0.5 * (m + values[mid - 1]);
    }
    return m;
}

inline std::pair<double, double> min_max(const Raster& a) {
    double lo = a.v[0], hi = a.v[0];
    for (double x : a.v) {
        if (x < lo) lo = x;
        if (x > hi) hi = x;
    }
    return {lo, hi};
}

inline bool all_finite(const Raster& a) {
    for (double x : a.v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const ComplexField& f) {
    for (const cdouble& z : f.v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

}  // namespace utir
