#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "utir/cnn.hpp"
#include "utir/dataset.hpp"
#include "utir/errors.hpp"
#include "utir/gs.hpp"
#include "utir/parallel.hpp"
#include "utir/raster.hpp"
#include "utir/reconstruct.hpp"

namespace utir {

enum class Method { AS, CnnOnly, Utirnet, GS, GsCff };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::AS: return "AS";
        case Method::CnnOnly: return "cnn_only";
        case Method::Utirnet: return "UTIRnet";
        case Method::GS: return "GS";
        case Method::GsCff: return "GS+CFF";
    }
    return "?";
}

inline Method method_from(const std::string& s) {
    if (s == "AS" || s == "as") return Method::AS;
    if (s == "cnn_only" || s == "cnn" || s == "CNN") return Method::CnnOnly;
    if (s == "UTIRnet" || s == "utirnet") return Method::Utirnet;
    if (s == "GS" || s == "gs") return Method::GS;
    if (s == "GS+CFF" || s == "gs+cff" || s == "gscff") return Method::GsCff;
    throw ConfigError("unknown method: " + s);
}

struct EvalOptions {
    std::vector<Method> methods{Method::AS, Method::CnnOnly, Method::Utirnet};
    double gs_second_wavelength = 561e-9;
    int gs_iterations = 5;
    CffConfig cff{true, 8.0, 3.0};
    ReconstructOptions recon;
};

struct EvalRow {
    std::string dataset;
    std::string split;
    ChannelKind kind = ChannelKind::amplitude;
    Method method = Method::AS;
    double mean_rmse = 0.0;
    double std_rmse = 0.0;
    int count = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    SystemParams params;
    std::vector<std::string> provenance;  // corpus dirs of the evaluated datasets

    const EvalRow* find(const std::string& dataset, const std::string& split, ChannelKind kind,
                        Method method) const {
        for (const auto& r : rows)
            if (r.dataset == dataset && r.split == split && r.kind == kind && r.method == method)
                return &r;
        return nullptr;
    }
};

namespace detail_bench {

inline Raster channel_of(const ComplexField& f, ChannelKind kind) {
    Raster out(f.width, f.height, f.pitch);
    if (kind == ChannelKind::amplitude) {
        for (size_t i = 0; i < f.v.size(); ++i) out.v[i] = std::abs(f.v[i]);
    } else {
        for (size_t i = 0; i < f.v.size(); ++i) {
            const cdouble z = f.v[i];
            out.v[i] = ((z.real() == 0.0 && z.imag() == 0.0) ? 0.0 : std::arg(z)) + kPi;
        }
    }
    return out;
}

// Second-wavelength hologram for the GS baselines, re-simulated from the
// stored clean target.
inline Raster second_hologram(const Raster& target, ChannelKind kind, const SystemParams& params,
                              double wavelength2) {
    SystemParams p2 = params;
    p2.wavelength = wavelength2;
    return synthesize_pair(target, kind, p2).hologram;
}

// Reconstructions run on the stored camera frame (the padded simulation
// domain) and are scored on the central target-sized window, so the AS column
// and the learned methods see identical twin-image physics.
inline double pair_rmse(Method method, const LoadedPair& lp, const SystemParams& params,
                        const NetworkWeights* wa, const NetworkWeights* wp,
                        const EvalOptions& opts) {
    const ChannelKind kind = lp.rec->kind;
    const int tw = lp.target.width, th = lp.target.height;
    switch (method) {
        case Method::AS:
            // The stored input *is* the AS backpropagation of the pair.
            return rmse(lp.input, lp.target);
        case Method::CnnOnly: {
            Hologram h{lp.hologram, params};
            ComplexField out = cnn_only_reconstruct(h, *wa, *wp, opts.recon);
            return rmse(channel_of(crop_center(out, tw, th), kind), lp.target);
        }
        case Method::Utirnet: {
            Hologram h{lp.hologram, params};
            ComplexField out = utirnet_reconstruct(h, *wa, *wp, opts.recon);
            return rmse(channel_of(crop_center(out, tw, th), kind), lp.target);
        }
        case Method::GS:
        case Method::GsCff: {
            GsProblem prob;
            prob.iterations = opts.gs_iterations;
            const double pitch = params.effective_pitch();
            Raster holo1 = lp.hologram;
            holo1.pitch = pitch;
            Raster holo2 = second_hologram(lp.target, kind, params, opts.gs_second_wavelength);
            holo2.pitch = pitch;
            prob.constraints.push_back({holo1, params.wavelength, params.z_distance});
            prob.constraints.push_back({holo2, opts.gs_second_wavelength, params.z_distance});
            GsResult res = method == Method::GS ? gs_multi(prob) : gs_cff(prob, opts.cff);
            // reference the phase to the first illumination wave, like
            // backpropagate does, so phase channels are comparable
            const cdouble ref =
                std::polar(1.0, -kTwoPi * params.z_distance / params.wavelength);
            for (auto& v : res.object.v) v *= ref;
            return rmse(channel_of(crop_center(res.object, tw, th), kind), lp.target);
        }
    }
    throw ConfigError("unhandled method");
}

inline void mean_std(const std::vector<double>& xs, double& mean, double& stddev) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    stddev = std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace detail_bench

/// Per-(dataset, split, kind, method) RMSE means over stored targets.
/// Parallel across pairs; aggregation order is fixed by manifest order.
inline EvalReport evaluate(const std::vector<DatasetManifest>& datasets, const EvalOptions& opts,
                           const NetworkWeights* wa = nullptr, const NetworkWeights* wp = nullptr) {
    if (datasets.empty()) throw CountError("evaluate: no datasets");
    for (Method m : opts.methods)
        if ((m == Method::CnnOnly || m == Method::Utirnet) && (!wa || !wp))
            throw ConfigError("evaluate: learned methods need amplitude and phase weights");

    EvalReport report;
    report.params = datasets.front().params;
    for (const auto& d : datasets) report.provenance.push_back(d.corpus_dir);

    for (const auto& manifest : datasets) {
        std::vector<std::string> splits;
        for (const auto& p : manifest.pairs)
            if (std::find(splits.begin(), splits.end(), p.split) == splits.end())
                splits.push_back(p.split);

        for (const auto& split : splits) {
            for (ChannelKind kind : {ChannelKind::amplitude, ChannelKind::phase}) {
                auto records = manifest.select(kind, split);
                if (records.empty()) continue;
                std::vector<LoadedPair> pairs(records.size());
                parallel_for(0, static_cast<int>(records.size()),
                             [&](int i) { pairs[i] = load_pair(manifest, *records[i]); });
                for (Method method : opts.methods) {
                    std::vector<double> errors(pairs.size());
                    parallel_for(0, static_cast<int>(pairs.size()), [&](int i) {
                        errors[i] =
                            detail_bench::pair_rmse(method, pairs[i], manifest.params, wa, wp, opts);
                    });
                    EvalRow row;
                    row.dataset = manifest.name;
                    row.split = split;
                    row.kind = kind;
                    row.method = method;
                    row.count = static_cast<int>(errors.size());
                    detail_bench::mean_std(errors, row.mean_rmse, row.std_rmse);
                    report.rows.push_back(std::move(row));
                }
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Z-robustness sweep
// ---------------------------------------------------------------------------

struct ZSweepPoint {
    double z = 0.0;
    double utirnet_rmse = 0.0;
    double as_rmse = 0.0;
    double relative_pct = 0.0;  // UTIRnet / AS * 100
};

/// Regenerate the test inputs from the manifest's stored targets at each z and
/// reconstruct with fixed weights; reports UTIRnet RMSE / AS RMSE in percent.
inline std::vector<ZSweepPoint> z_sweep(const DatasetManifest& manifest, const NetworkWeights& wa,
                                        const NetworkWeights& wp, const std::vector<double>& z_values,
                                        int max_pairs = 0, ChannelKind kind = ChannelKind::amplitude,
                                        const ReconstructOptions& recon = {}) {
    for (double z : z_values)
        if (!(z > 0.0)) throw ParamError("z_sweep: z values must be positive");
    auto records = manifest.select(kind);
    if (records.empty()) throw CountError("z_sweep: dataset holds no pairs of the requested kind");
    if (max_pairs > 0 && static_cast<int>(records.size()) > max_pairs) records.resize(max_pairs);

    std::vector<Raster> targets(records.size());
    parallel_for(0, static_cast<int>(records.size()),
                 [&](int i) { targets[i] = load_pair(manifest, *records[i]).target; });

    std::vector<ZSweepPoint> curve;
    curve.reserve(z_values.size());
    for (double z : z_values) {
        SystemParams params = manifest.params;
        params.z_distance = z;
        std::vector<double> as_err(targets.size()), utir_err(targets.size());
        parallel_for(0, static_cast<int>(targets.size()), [&](int i) {
            SynthesizedPair sp = synthesize_pair(targets[i], kind, params);
            as_err[i] = rmse(sp.input, sp.target);
            Hologram h{sp.hologram, params};
            ComplexField out = utirnet_reconstruct(h, wa, wp, recon);
            utir_err[i] = rmse(detail_bench::channel_of(out, kind), sp.target);
        });
        ZSweepPoint pt;
        pt.z = z;
        double dummy;
        detail_bench::mean_std(as_err, pt.as_rmse, dummy);
        detail_bench::mean_std(utir_err, pt.utirnet_rmse, dummy);
        pt.relative_pct = pt.as_rmse > 0.0 ? 100.0 * pt.utirnet_rmse / pt.as_rmse : 0.0;
        curve.push_back(pt);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// timing harness
// ---------------------------------------------------------------------------

struct TimingCell {
    int size = 0;
    Method method = Method::AS;
    double seconds = 0.0;
};

struct TimingReport {
    std::vector<TimingCell> cells;
    int reps = 1;
    std::string hardware;

    double at(int size, Method m) const {
        for (const auto& c : cells)
            if (c.size == size && c.method == m) return c.seconds;
        throw CountError("timing cell missing");
    }
};

namespace detail_bench {

inline std::string hardware_descriptor() {
    std::string cpu = "unknown cpu";
    std::ifstream f("/proc/cpuinfo");
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) cpu = line.substr(colon + 2);
            break;
        }
    }
    return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " hw threads";
}

// Deterministic smooth test object for timing runs.
inline Raster timing_object(int size, double pitch, uint64_t seed) {
    Rng rng(seed);
    Raster r(size, size, pitch, 1.0);
    const int blobs = 24;
    for (int b = 0; b < blobs; ++b) {
        const double cx = rng.uniform(0.1, 0.9) * size;
        const double cy = rng.uniform(0.1, 0.9) * size;
        const double rad = rng.uniform(0.02, 0.12) * size;
        const double depth = rng.uniform(0.2, 0.7);
        const int x0 = std::max(0, static_cast<int>(cx - 3 * rad));
        const int x1 = std::min(size - 1, static_cast<int>(cx + 3 * rad));
        const int y0 = std::max(0, static_cast<int>(cy - 3 * rad));
        const int y1 = std::min(size - 1, static_cast<int>(cy + 3 * rad));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double d2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (rad * rad);
                r.at(x, y) = std::max(0.05, r.at(x, y) - depth * std::exp(-d2));
            }
    }
    return r;
}

template <typename F>
double time_median(F&& fn, int reps) {
    std::vector<double> times;
    times.reserve(reps);
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace detail_bench

/// Wall-clock comparison of the reconstruction methods over square images.
/// Report-only: hardware-dependent by nature.
inline TimingReport time_methods(const std::vector<int>& sizes, const std::vector<Method>& methods,
                                 int reps, const SystemParams& params, const NetworkWeights* wa,
                                 const NetworkWeights* wp, const EvalOptions& opts = {}) {
    params.validate();
    if (reps < 1) throw ParamError("reps must be >= 1");
    for (Method m : methods)
        if ((m == Method::CnnOnly || m == Method::Utirnet) && (!wa || !wp))
            throw ConfigError("time_methods: learned methods need weights");

    TimingReport report;
    report.reps = reps;
    report.hardware = detail_bench::hardware_descriptor();
    const double pitch = params.effective_pitch();

    for (int size : sizes) {
        // One simulated hologram pair per size (second wavelength for GS).
        Raster object = detail_bench::timing_object(size, pitch, 0x715u + size);
        SynthesizedPair sp = synthesize_pair(object, ChannelKind::amplitude, params);
        Raster holo2 =
            detail_bench::second_hologram(object, ChannelKind::amplitude, params,
                                          opts.gs_second_wavelength);
        Hologram holo{sp.hologram, params};

        for (Method m : methods) {
            double seconds = 0.0;
            switch (m) {
                case Method::AS:
                    seconds = detail_bench::time_median([&] { backpropagate(holo); }, reps);
                    break;
                case Method::CnnOnly:
                    seconds = detail_bench::time_median(
                        [&] { cnn_only_reconstruct(holo, *wa, *wp, opts.recon); }, reps);
                    break;
                case Method::Utirnet:
                    seconds = detail_bench::time_median(
                        [&] { utirnet_reconstruct(holo, *wa, *wp, opts.recon); }, reps);
                    break;
                case Method::GS:
                case Method::GsCff: {
                    GsProblem prob;
                    prob.iterations = opts.gs_iterations;
                    Raster h1 = sp.hologram;
                    h1.pitch = pitch;
                    Raster h2 = holo2;
                    h2.pitch = pitch;
                    prob.constraints.push_back({h1, params.wavelength, params.z_distance});
                    prob.constraints.push_back(
                        {h2, opts.gs_second_wavelength, params.z_distance});
                    if (m == Method::GS)
                        seconds = detail_bench::time_median([&] { gs_multi(prob); }, reps);
                    else
                        seconds =
                            detail_bench::time_median([&] { gs_cff(prob, opts.cff); }, reps);
                    break;
                }
            }
            report.cells.push_back({size, m, seconds});
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// report emission: CSV ('.' decimal, one header row, 6 significant digits)
// ---------------------------------------------------------------------------

namespace detail_bench {

inline std::string fmt6(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

}  // namespace detail_bench

inline std::string eval_report_csv(const EvalReport& report) {
    std::string out = "dataset,split,kind,method,mean_rmse,std_rmse,count\n";
    for (const auto& r : report.rows) {
        out += r.dataset + "," + r.split + "," + to_string(r.kind) + "," + to_string(r.method) +
               "," + detail_bench::fmt6(r.mean_rmse) + "," + detail_bench::fmt6(r.std_rmse) + "," +
               std::to_string(r.count) + "\n";
    }
    return out;
}

inline std::string z_sweep_csv(const std::vector<ZSweepPoint>& curve) {
    std::string out = "z,utirnet_rmse,as_rmse,relative_pct\n";
    for (const auto& p : curve)
        out += detail_bench::fmt6(p.z) + "," + detail_bench::fmt6(p.utirnet_rmse) + "," +
               detail_bench::fmt6(p.as_rmse) + "," + detail_bench::fmt6(p.relative_pct) + "\n";
    return out;
}

inline std::string timing_csv(const TimingReport& report, const std::vector<int>& sizes,
                              const std::vector<Method>& methods) {
    std::string out = "image_size";
    for (Method m : methods) out += std::string(",") + to_string(m) + "_s";
    out += "\n";
    for (int size : sizes) {
        out += std::to_string(size) + "x" + std::to_string(size);
        for (Method m : methods) out += "," + detail_bench::fmt6(report.at(size, m));
        out += "\n";
    }
    out += "# hardware: " + report.hardware + "; reps: " + std::to_string(report.reps) + "\n";
    return out;
}

inline std::string eval_report_json(const EvalReport& report) {
    nlohmann::json j;
    j["params"] = detail_ds::params_json(report.params);
    j["provenance"] = report.provenance;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"dataset", r.dataset},
                        {"split", r.split},
                        {"kind", to_string(r.kind)},
                        {"method", to_string(r.method)},
                        {"mean_rmse", r.mean_rmse},
                        {"std_rmse", r.std_rmse},
                        {"count", r.count}});
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << content;
}

}  // namespace utir
