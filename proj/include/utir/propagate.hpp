#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "utir/errors.hpp"
#include "utir/fft.hpp"
#include "utir/raster.hpp"

namespace utir {

/// Angular-spectrum transfer function machinery for one grid geometry.
///
/// The z-independent part, kz(fx, fy) = 2*pi*sqrt(1/lambda^2 - fx^2 - fy^2),
/// is cached; H(f; z) = exp(i*z*kz) on the propagating band and 0 on the
/// evanescent band (hard cutoff, so |H| <= 1 and H(z)*H(-z) == 1 where light
/// propagates). Frequencies are fx = k/(N*pitch) with k in the signed Nyquist
/// range. Immutable after construction; safe to share across workers.
class PropagationPlan {
public:
    PropagationPlan(int width, int height, double wavelength, double pitch)
        : width_(width), height_(height), wavelength_(wavelength), pitch_(pitch),
          kz_(static_cast<size_t>(width) * height, 0.0),
          propagating_(static_cast<size_t>(width) * height, 0) {
        if (width <= 0 || height <= 0) throw ShapeError("propagation plan needs positive dimensions");
        if (!(wavelength > 0.0)) throw ParamError("wavelength must be positive");
        if (!(pitch > 0.0)) throw ParamError("pitch must be positive");
        const double inv_l2 = 1.0 / (wavelength * wavelength);
        const double dfx = 1.0 / (width * pitch);
        const double dfy = 1.0 / (height * pitch);
        for (int y = 0; y < height; ++y) {
            const double fy = fft::freq_index(y, height) * dfy;
            for (int x = 0; x < width; ++x) {
                const double fx = fft::freq_index(x, width) * dfx;
                const double arg = inv_l2 - fx * fx - fy * fy;
                const size_t i = static_cast<size_t>(y) * width + x;
                if (arg >= 0.0) {
                    kz_[i] = kTwoPi * std::sqrt(arg);
                    propagating_[i] = 1;
                }
            }
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    double wavelength() const { return wavelength_; }
    double pitch() const { return pitch_; }

    cdouble transfer_at(int x, int y, double z) const {
        const size_t i = static_cast<size_t>(y) * width_ + x;
        if (!propagating_[i]) return {0.0, 0.0};
        return std::polar(1.0, z * kz_[i]);
    }

    /// Propagate by signed distance z (meters). Same grid in, same grid out.
    ComplexField propagate(const ComplexField& field, double z) const {
        if (field.width != width_ || field.height != height_)
            throw ShapeError("propagate: field does not match plan grid");
        if (!all_finite(field)) throw DataError("propagate: non-finite samples in input");
        ComplexField spec = fft::fft2(field);
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                const size_t i = static_cast<size_t>(y) * width_ + x;
                spec.v[i] = propagating_[i] ? spec.v[i] * std::polar(1.0, z * kz_[i])
                                            : cdouble{0.0, 0.0};
            }
        }
        return fft::ifft2(spec);
    }

private:
    int width_, height_;
    double wavelength_, pitch_;
    std::vector<double> kz_;
    std::vector<uint8_t> propagating_;
};

/// One-shot angular-spectrum propagation at the field's own pitch.
inline ComplexField angular_spectrum(const ComplexField& field, double z, double wavelength) {
    PropagationPlan plan(field.width, field.height, wavelength, field.pitch);
    return plan.propagate(field, z);
}

namespace detail {

template <typename Grid>
Grid pad_replicate_impl(const Grid& in, int margin) {
    if (margin < 0) throw ParamError("pad margin must be >= 0");
    if (margin == 0) return in;
    Grid out(in.width + 2 * margin, in.height + 2 * margin, in.pitch);
    for (int y = 0; y < out.height; ++y) {
        const int sy = std::min(std::max(y - margin, 0), in.height - 1);
        for (int x = 0; x < out.width; ++x) {
            const int sx = std::min(std::max(x - margin, 0), in.width - 1);
            out.at(x, y) = in.at(sx, sy);
        }
    }
    return out;
}

template <typename Grid>
Grid crop_center_impl(const Grid& in, int w, int h) {
    if (w <= 0 || h <= 0) throw ShapeError("crop size must be positive");
    if (w > in.width || h > in.height) throw ShapeError("crop larger than source");
    const int x0 = (in.width - w) / 2;
    const int y0 = (in.height - h) / 2;
    Grid out(w, h, in.pitch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = in.at(x0 + x, y0 + y);
    return out;
}

}  // namespace detail

inline Raster pad_replicate(const Raster& r, int margin) { return detail::pad_replicate_impl(r, margin); }
inline ComplexField pad_replicate(const ComplexField& f, int margin) { return detail::pad_replicate_impl(f, margin); }
inline Raster crop_center(const Raster& r, int w, int h) { return detail::crop_center_impl(r, w, h); }
inline ComplexField crop_center(const ComplexField& f, int w, int h) { return detail::crop_center_impl(f, w, h); }

}  // namespace utir
