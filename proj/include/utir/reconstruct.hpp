#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "utir/cnn.hpp"
#include "utir/errors.hpp"
#include "utir/propagate.hpp"
#include "utir/raster.hpp"
#include "utir/tiling.hpp"

namespace utir {

/// Recorded camera-plane intensity plus the optical geometry it was taken with.
struct Hologram {
    Raster intensity;
    SystemParams params;

    void validate() const {
        params.validate();
        for (double x : intensity.v)
            if (!(x >= 0.0)) throw DataError("hologram intensity must be nonnegative and finite");
    }
};

/// sqrt of the recorded intensity, taken as a zero-phase field, propagated back
/// to the object plane (+Z). The phase is referenced to the illumination wave
/// (the piston exp(i*2*pi*Z/lambda) is divided out), matching the dataset
/// forward model so the networks see the same phase statistics either way.
inline ComplexField backpropagate(const Hologram& holo) {
    holo.validate();
    const double pitch = holo.params.effective_pitch();
    ComplexField camera(holo.intensity.width, holo.intensity.height, pitch);
    for (size_t i = 0; i < camera.v.size(); ++i)
        camera.v[i] = {std::sqrt(holo.intensity.v[i]), 0.0};
    PropagationPlan plan(camera.width, camera.height, holo.params.wavelength, pitch);
    ComplexField field = plan.propagate(camera, holo.params.z_distance);
    const cdouble piston_ref = std::conj(plan.transfer_at(0, 0, holo.params.z_distance));
    for (auto& z : field.v) z *= piston_ref;
    return field;
}

/// Scale + shift bookkeeping for the pre-CNN normalization; stores enough to
/// invert it exactly.
struct NormRecord {
    double amplitude_median = 1.0;
    double phase_offset = kPi;
};

/// Normalize a backpropagated field the way the networks expect: amplitude
/// divided by its median. The record carries the median and the +pi phase
/// shift; the shift itself lives in the raster domain (see split_normalized),
/// since a complex sample cannot represent phases outside (-pi, pi].
inline std::pair<ComplexField, NormRecord> normalize_experimental(const ComplexField& field) {
    std::vector<double> amps(field.v.size());
    for (size_t i = 0; i < field.v.size(); ++i) amps[i] = std::abs(field.v[i]);
    const double med = median_of(std::move(amps));
    if (!(med > 0.0)) throw DataError("normalize: amplitude median is zero");
    ComplexField out(field.width, field.height, field.pitch);
    const double inv = 1.0 / med;
    for (size_t i = 0; i < field.v.size(); ++i) out.v[i] = field.v[i] * inv;
    return {std::move(out), NormRecord{med, kPi}};
}

inline ComplexField denormalize(const ComplexField& field, const NormRecord& rec) {
    ComplexField out(field.width, field.height, field.pitch);
    for (size_t i = 0; i < field.v.size(); ++i) out.v[i] = field.v[i] * rec.amplitude_median;
    return out;
}

/// Amplitude (median-normalized) and phase ([0, 2pi]) rasters as the CNNs see
/// them.
inline std::pair<Raster, Raster> split_normalized(const ComplexField& normalized,
                                                  const NormRecord& rec) {
    auto [amp, ph] = split(normalized);
    for (double& x : ph.v) x += rec.phase_offset;
    return {std::move(amp), std::move(ph)};
}

/// Inverse of split_normalized back into physical units.
inline ComplexField combine_denormalized(const Raster& amp, const Raster& phase,
                                         const NormRecord& rec) {
    Raster a = amp;
    for (double& x : a.v) x *= rec.amplitude_median;
    Raster p = phase;
    for (double& x : p.v) x -= rec.phase_offset;
    return combine(a, p);
}

using RasterFilter = std::function<Raster(const Raster&)>;

struct ReconstructOptions {
    int consistency_iterations = 1;  // single GS-style update by default
    int tile_size = 0;               // 0: use the weights' training tile size
    double overlap_fraction = 0.10;
};

namespace detail_rec {

// Forward pass tolerant of odd dimensions: replicate-pad right/bottom to even,
// run, crop back.
inline Raster forward_even(const NetworkWeights& w, const Raster& r) {
    const int padx = r.width % 2, pady = r.height % 2;
    if (!padx && !pady) return forward(w, r);
    Raster padded(r.width + padx, r.height + pady, r.pitch);
    for (int y = 0; y < padded.height; ++y)
        for (int x = 0; x < padded.width; ++x)
            padded.at(x, y) = r.at(std::min(x, r.width - 1), std::min(y, r.height - 1));
    Raster out = forward(w, padded);
    Raster crop(r.width, r.height, r.pitch);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x) crop.at(x, y) = out.at(x, y);
    return crop;
}

// CNN filter for full-frame rasters: fields larger than the network's tile are
// cut into overlapping tiles, filtered, and alpha-blended back together.
inline RasterFilter cnn_filter(const NetworkWeights& w, const ReconstructOptions& opts) {
    int tile = opts.tile_size > 0 ? opts.tile_size : w.meta.tile_size;
    return [&w, tile, opts](const Raster& r) -> Raster {
        if (tile <= 0 || (r.width <= tile && r.height <= tile)) return forward_even(w, r);
        TileLayout layout = plan_tiles(r.width, r.height, tile, opts.overlap_fraction);
        return process_tiled(r, layout, [&w](const Raster& t) { return forward(w, t); });
    };
}

}  // namespace detail_rec

/// Full processing patch with caller-supplied channel filters:
/// backpropagate, normalize, filter amplitude and phase, denormalize, then
/// enforce consistency with the recorded hologram (amplitude replacement at
/// the camera plane) and return the final object-plane field.
inline ComplexField utirnet_reconstruct_with(const Hologram& holo, const RasterFilter& amp_filter,
                                             const RasterFilter& phase_filter,
                                             const ReconstructOptions& opts = {}) {
    if (opts.consistency_iterations < 0) throw ParamError("consistency iterations must be >= 0");
    const ComplexField u0 = backpropagate(holo);
    auto [u0n, rec] = normalize_experimental(u0);
    auto [amp, phase] = split_normalized(u0n, rec);

    Raster amp_f = amp_filter(amp);
    Raster phase_f = phase_filter(phase);
    if (!amp_f.same_shape(amp) || !phase_f.same_shape(phase))
        throw ContractError("channel filter changed raster dimensions");

    ComplexField u = combine_denormalized(amp_f, phase_f, rec);

    Raster sqrt_holo(holo.intensity.width, holo.intensity.height, u.pitch);
    for (size_t i = 0; i < sqrt_holo.v.size(); ++i) sqrt_holo.v[i] = std::sqrt(holo.intensity.v[i]);

    const double z = holo.params.z_distance;
    const double lambda = holo.params.wavelength;
    for (int it = 0; it < opts.consistency_iterations; ++it) {
        ComplexField camera = angular_spectrum(u, -z, lambda);
        Raster camera_phase = split(camera).second;
        u = angular_spectrum(combine(sqrt_holo, camera_phase), z, lambda);
    }
    return u;
}

/// Steps 1-5 only (no hologram-consistency update); the ablation variant.
inline ComplexField cnn_only_reconstruct_with(const Hologram& holo, const RasterFilter& amp_filter,
                                              const RasterFilter& phase_filter,
                                              const ReconstructOptions& opts = {}) {
    ReconstructOptions o = opts;
    o.consistency_iterations = 0;
    return utirnet_reconstruct_with(holo, amp_filter, phase_filter, o);
}

inline ComplexField utirnet_reconstruct(const Hologram& holo, const NetworkWeights& w_amp,
                                        const NetworkWeights& w_phase,
                                        const ReconstructOptions& opts = {}) {
    return utirnet_reconstruct_with(holo, detail_rec::cnn_filter(w_amp, opts),
                                    detail_rec::cnn_filter(w_phase, opts), opts);
}

inline ComplexField cnn_only_reconstruct(const Hologram& holo, const NetworkWeights& w_amp,
                                         const NetworkWeights& w_phase,
                                         const ReconstructOptions& opts = {}) {
    return cnn_only_reconstruct_with(holo, detail_rec::cnn_filter(w_amp, opts),
                                     detail_rec::cnn_filter(w_phase, opts), opts);
}

inline RasterFilter identity_filter() {
    return [](const Raster& r) { return r; };
}

}  // namespace utir
