#pragma once

#include <cmath>
#include <vector>

#include "utir/errors.hpp"
#include "utir/image_ops.hpp"
#include "utir/propagate.hpp"
#include "utir/raster.hpp"

namespace utir {

/// One measured intensity plane with its own propagation geometry. All
/// constraints share the object-plane grid; each uses its own wavelength in
/// the transfer function (multi-wavelength recording of one object).
struct GsConstraint {
    Raster intensity;
    double wavelength = 405e-9;
    double z = 2.6e-3;
};

struct GsProblem {
    std::vector<GsConstraint> constraints;
    int iterations = 5;
    double object_plane_pitch = 0.0;  // 0: take the first constraint's pitch
};

/// Object-plane amplitude filter approximating complex-field-filtering
/// constraints: flatten the Gaussian-estimated background to its mean and
/// optionally clamp amplitude deviations to clamp_factor * their rms.
struct CffConfig {
    bool enabled = false;
    double sigma = 8.0;
    double clamp_factor = 3.0;  // <= 0 disables the clamp, keeps the flattening
};

struct GsResult {
    ComplexField object;
    // residuals[iteration][constraint]: rmse between the propagated amplitude
    // and the measured sqrt-intensity on arrival at that plane, before the
    // amplitude is replaced. Index 0 is the first constraint plane, reached at
    // the end of each cycle.
    std::vector<std::vector<double>> residuals;
    CffConfig filter;  // echoed for provenance
};

namespace detail_gs {

inline Raster sqrt_raster(const Raster& intensity, double pitch) {
    Raster out(intensity.width, intensity.height, pitch);
    for (size_t i = 0; i < intensity.v.size(); ++i) {
        if (!(intensity.v[i] >= 0.0)) throw DataError("constraint intensity must be nonnegative");
        out.v[i] = std::sqrt(intensity.v[i]);
    }
    return out;
}

inline void apply_cff(ComplexField& object, const CffConfig& cfg) {
    auto [amp, phase] = split(object);
    Raster bg = gaussian_blur(amp, cfg.sigma);
    const double bg_mean = mean(bg);
    Raster dev(amp.width, amp.height, amp.pitch);
    for (size_t i = 0; i < amp.v.size(); ++i) dev.v[i] = amp.v[i] - bg.v[i];
    if (cfg.clamp_factor > 0.0) {
        const double limit = cfg.clamp_factor * rms(dev);
        if (limit > 0.0)
            for (double& x : dev.v) x = std::clamp(x, -limit, limit);
    }
    for (size_t i = 0; i < amp.v.size(); ++i) amp.v[i] = std::max(0.0, bg_mean + dev.v[i]);
    object = combine(amp, phase);
}

}  // namespace detail_gs

/// Cyclic alternating projection across the constraint planes. Start from the
/// first constraint's sqrt-intensity with zero phase; each hop goes through
/// the object plane to the next constraint plane, where the measured amplitude
/// replaces the propagated one and the phase survives.
inline GsResult gs_cff(const GsProblem& problem, const CffConfig& filter) {
    const auto& cs = problem.constraints;
    if (cs.empty()) throw CountError("gs: at least one constraint required");
    if (problem.iterations < 1) throw ParamError("gs: iterations must be >= 1");
    for (const auto& c : cs) {
        if (!c.intensity.same_shape(cs[0].intensity))
            throw ShapeError("gs: constraint dimensions differ");
        if (!(c.wavelength > 0.0) || !(c.z > 0.0)) throw ParamError("gs: bad constraint geometry");
    }
    const double pitch =
        problem.object_plane_pitch > 0.0 ? problem.object_plane_pitch : cs[0].intensity.pitch;
    const int n = static_cast<int>(cs.size());

    std::vector<Raster> measured;
    measured.reserve(n);
    for (const auto& c : cs) measured.push_back(detail_gs::sqrt_raster(c.intensity, pitch));

    Raster zero(cs[0].intensity.width, cs[0].intensity.height, pitch, 0.0);
    ComplexField state = combine(measured[0], zero);

    GsResult result;
    result.filter = filter;
    result.residuals.assign(problem.iterations, std::vector<double>(n, 0.0));

    for (int it = 0; it < problem.iterations; ++it) {
        for (int j = 0; j < n; ++j) {
            const int next = (j + 1) % n;
            ComplexField object = angular_spectrum(state, cs[j].z, cs[j].wavelength);
            if (filter.enabled) detail_gs::apply_cff(object, filter);
            state = angular_spectrum(object, -cs[next].z, cs[next].wavelength);
            Raster amp = split(state).first;
            result.residuals[it][next] = rmse(amp, measured[next]);
            state = combine(measured[next], split(state).second);
        }
    }
    result.object = angular_spectrum(state, cs[0].z, cs[0].wavelength);
    if (filter.enabled) detail_gs::apply_cff(result.object, filter);
    return result;
}

inline GsResult gs_multi(const GsProblem& problem) { return gs_cff(problem, CffConfig{}); }

}  // namespace utir
