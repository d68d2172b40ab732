#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "utir/errors.hpp"
#include "utir/image_io.hpp"
#include "utir/image_ops.hpp"
#include "utir/propagate.hpp"
#include "utir/raster.hpp"
#include "utir/rng.hpp"

namespace utir {

enum class ChannelKind { amplitude, phase };

inline const char* to_string(ChannelKind k) {
    return k == ChannelKind::amplitude ? "amplitude" : "phase";
}

inline ChannelKind channel_kind_from(const std::string& s) {
    if (s == "amplitude" || s == "amp") return ChannelKind::amplitude;
    if (s == "phase") return ChannelKind::phase;
    throw ConfigError("unknown channel kind: " + s);
}

struct DatasetGenOptions {
    int tile_size = 512;
    DenoiserKind denoiser = DenoiserKind::nlm;
    double highpass_sigma = 10.0;          // px, phase-target high-pass
    double validation_subdir_fraction = 0.25;
    std::string force_split;               // "", "train", "validation", "test"
};

struct PairRecord {
    ChannelKind kind = ChannelKind::amplitude;
    uint64_t seed = 0;
    std::string source_id;                 // corpus-relative path of the source image
    std::string split;                     // train | validation | test
    std::string input_file, target_file, holo_file;  // relative to the manifest
    int width = 0, height = 0;
};

struct DatasetManifest {
    std::string name;
    std::string corpus_dir;
    SystemParams params;
    uint64_t master_seed = 0;
    int tile_size = 512;
    std::string denoiser = "nlm";
    std::vector<PairRecord> pairs;

    std::string base_dir;  // set on load; not serialized

    std::vector<const PairRecord*> select(ChannelKind kind, const std::string& split = "") const {
        std::vector<const PairRecord*> out;
        for (const auto& p : pairs)
            if (p.kind == kind && (split.empty() || p.split == split)) out.push_back(&p);
        return out;
    }
};

// --- target preparation (grayscale input in [0,1] assumed) ------------------

namespace detail_ds {

// Largest double that still rounds down-or-equal to 2*pi under float32
// storage; phase values are clamped here so the stored files keep the
// [0, 2*pi] invariant exactly.
inline double two_pi_store_max() {
    static const double v = [] {
        float f = static_cast<float>(kTwoPi);
        while (static_cast<double>(f) > kTwoPi) f = std::nextafterf(f, 0.0f);
        return static_cast<double>(f);
    }();
    return v;
}

inline double clamp_phase_store(double x) {
    return std::clamp(x, 0.0, two_pi_store_max());
}

// Round through float32 so in-memory values equal what the pair files hold;
// re-running the forward model on a stored target then reproduces the stored
// input bit-for-bit.
inline void quantize_to_storage(Raster& r) {
    for (double& x : r.v) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace detail_ds

inline Raster prepare_target_amplitude(const Raster& image, int tile_size, const Denoiser& denoise) {
    if (image.size() == 0) throw DataError("empty image");
    Raster r = resize_bilinear(image, tile_size, tile_size);
    r = denoise(r);
    if (!normalize_minmax(r, 0.0, 1.0))
        std::cerr << "warning: constant image, amplitude target set to 0.5\n";
    return r;
}

inline Raster prepare_target_phase(const Raster& image, int tile_size, const Denoiser& denoise,
                                   double highpass_sigma, Rng& rng) {
    if (image.size() == 0) throw DataError("empty image");
    Raster r = resize_bilinear(image, tile_size, tile_size);
    r = denoise(r);
    r = highpass_gaussian(r, highpass_sigma);
    // Low end of the normalization range is drawn per image: a deep [-2pi, 0]
    // span produces wrapped 2pi jumps, the shallow [-pi/2, 0] span does not.
    const double lo = rng.bernoulli(0.5) ? -kTwoPi : -kPi / 2.0;
    if (!normalize_minmax(r, lo, 0.0)) {
        std::fill(r.v.begin(), r.v.end(), 0.0);
        std::cerr << "warning: constant image, phase target set to pi\n";
    }
    for (double& x : r.v) x = detail_ds::clamp_phase_store(wrap_phase(x) + kPi);
    return r;
}

// --- forward model -----------------------------------------------------------

struct SynthesizedPair {
    Raster input;     // backpropagated channel with twin image, target-sized
    Raster target;    // clean channel
    Raster hologram;  // camera-plane intensity over the full simulated frame
                      // (padded size); reconstructing it reproduces `input`
                      // at the frame center
};

/// Simulate the in-line recording of one prepared target: replicate-pad by 50%
/// per side, propagate the object field to the camera, drop the phase (the
/// camera records intensity), propagate the amplitude back, crop to size.
inline SynthesizedPair synthesize_pair(const Raster& target, ChannelKind kind,
                                       const SystemParams& params) {
    params.validate();
    if (target.size() == 0) throw DataError("empty target");
    const int margin = std::max(target.width, target.height) / 2;
    const double pitch = params.effective_pitch();

    Raster t = target;
    t.pitch = pitch;
    Raster padded = pad_replicate(t, margin);

    ComplexField object;
    if (kind == ChannelKind::amplitude) {
        Raster zero(padded.width, padded.height, pitch, 0.0);
        object = combine(padded, zero);
    } else {
        Raster unit(padded.width, padded.height, pitch, 1.0);
        Raster signed_phase = padded;
        for (double& x : signed_phase.v) x -= kPi;  // undo the +pi storage shift
        object = combine(unit, signed_phase);
    }

    PropagationPlan plan(object.width, object.height, params.wavelength, pitch);
    ComplexField camera = plan.propagate(object, -params.z_distance);
    Raster camera_amp(camera.width, camera.height, pitch);
    Raster holo_full(camera.width, camera.height, pitch);
    for (size_t i = 0; i < camera.v.size(); ++i) {
        const double a = std::abs(camera.v[i]);
        camera_amp.v[i] = a;
        holo_full.v[i] = a * a;
    }

    Raster zero(camera.width, camera.height, pitch, 0.0);
    ComplexField back = plan.propagate(combine(camera_amp, zero), params.z_distance);
    // Reference the backpropagated phase to the illumination wave: the piston
    // exp(i*2*pi*Z/lambda) is physically meaningless for the object and would
    // shift every phase input by a Z-dependent constant.
    const cdouble piston_ref = std::conj(plan.transfer_at(0, 0, params.z_distance));
    for (auto& z : back.v) z *= piston_ref;

    Raster input_full(back.width, back.height, pitch);
    if (kind == ChannelKind::amplitude) {
        for (size_t i = 0; i < back.v.size(); ++i) input_full.v[i] = std::abs(back.v[i]);
    } else {
        for (size_t i = 0; i < back.v.size(); ++i) {
            const cdouble z = back.v[i];
            input_full.v[i] = detail_ds::clamp_phase_store(
                ((z.real() == 0.0 && z.imag() == 0.0) ? 0.0 : std::arg(z)) + kPi);
        }
    }

    SynthesizedPair out;
    out.input = crop_center(input_full, target.width, target.height);
    out.target = t;
    out.hologram = std::move(holo_full);
    return out;
}

// --- manifest (de)serialization ----------------------------------------------

namespace detail_ds {

inline nlohmann::json params_json(const SystemParams& p) {
    return {{"wavelength", p.wavelength},
            {"pixel_size", p.pixel_size},
            {"z_distance", p.z_distance},
            {"magnification", p.magnification}};
}

inline SystemParams params_from_json(const nlohmann::json& j) {
    SystemParams p;
    p.wavelength = j.at("wavelength").get<double>();
    p.pixel_size = j.at("pixel_size").get<double>();
    p.z_distance = j.at("z_distance").get<double>();
    p.magnification = j.at("magnification").get<double>();
    return p;
}

}  // namespace detail_ds

inline std::string manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["format"] = "utir-dataset";
    j["version"] = 1;
    j["name"] = m.name;
    j["corpus_dir"] = m.corpus_dir;
    j["params"] = detail_ds::params_json(m.params);
    j["master_seed"] = m.master_seed;
    j["tile_size"] = m.tile_size;
    j["denoiser"] = m.denoiser;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : m.pairs) {
        pairs.push_back({{"kind", to_string(p.kind)},
                         {"seed", p.seed},
                         {"source_id", p.source_id},
                         {"split", p.split},
                         {"input", p.input_file},
                         {"target", p.target_file},
                         {"hologram", p.holo_file},
                         {"width", p.width},
                         {"height", p.height}});
    }
    j["pairs"] = std::move(pairs);
    return j.dump(2) + "\n";
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << manifest_to_json(m);
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad manifest " + path + ": " + e.what());
    }
    if (j.value("format", "") != "utir-dataset") throw FormatError("not a dataset manifest: " + path);
    DatasetManifest m;
    m.name = j.value("name", "");
    m.corpus_dir = j.value("corpus_dir", "");
    m.params = detail_ds::params_from_json(j.at("params"));
    m.master_seed = j.at("master_seed").get<uint64_t>();
    m.tile_size = j.at("tile_size").get<int>();
    m.denoiser = j.value("denoiser", "nlm");
    for (const auto& e : j.at("pairs")) {
        PairRecord p;
        p.kind = channel_kind_from(e.at("kind").get<std::string>());
        p.seed = e.at("seed").get<uint64_t>();
        p.source_id = e.at("source_id").get<std::string>();
        p.split = e.at("split").get<std::string>();
        p.input_file = e.at("input").get<std::string>();
        p.target_file = e.at("target").get<std::string>();
        p.holo_file = e.at("hologram").get<std::string>();
        p.width = e.at("width").get<int>();
        p.height = e.at("height").get<int>();
        m.pairs.push_back(std::move(p));
    }
    m.base_dir = std::filesystem::path(path).parent_path().string();
    return m;
}

struct LoadedPair {
    const PairRecord* rec = nullptr;
    Raster input, target, hologram;
};

inline LoadedPair load_pair(const DatasetManifest& m, const PairRecord& rec) {
    const std::filesystem::path base = m.base_dir.empty() ? "." : m.base_dir;
    LoadedPair lp;
    lp.rec = &rec;
    lp.input = read_raster((base / rec.input_file).string());
    lp.target = read_raster((base / rec.target_file).string());
    lp.hologram = read_raster((base / rec.holo_file).string());
    if (lp.input.width != rec.width || lp.input.height != rec.height ||
        !lp.input.same_shape(lp.target))
        throw DataError("pair files do not match manifest dimensions: " + rec.source_id);
    return lp;
}

// --- dataset builder -----------------------------------------------------------

namespace detail_ds {

inline bool is_image_file(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ".png" || e == ".pgm" || e == ".ppm" || e == ".utr";
}

struct CorpusItem {
    std::string rel_path;
    std::string subdir;  // first path component, "" for root-level files
};

inline std::vector<CorpusItem> list_corpus(const std::string& corpus_dir) {
    namespace fs = std::filesystem;
    std::vector<CorpusItem> items;
    if (!fs::is_directory(corpus_dir)) throw IoError("corpus directory not found: " + corpus_dir);
    for (const auto& entry : fs::recursive_directory_iterator(corpus_dir)) {
        if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
        const std::string rel = fs::relative(entry.path(), corpus_dir).generic_string();
        const auto slash = rel.find('/');
        items.push_back({rel, slash == std::string::npos ? "" : rel.substr(0, slash)});
    }
    std::sort(items.begin(), items.end(),
              [](const CorpusItem& a, const CorpusItem& b) { return a.rel_path < b.rel_path; });
    return items;
}

// Subdirectory-disjoint split: the lexicographically last fraction of the
// subdirectories supplies validation data, mirroring how the source image
// repository's sub-datasets are assigned.
inline std::string split_for(const CorpusItem& item, const std::vector<std::string>& val_subdirs) {
    for (const auto& s : val_subdirs)
        if (item.subdir == s) return "validation";
    return "train";
}

}  // namespace detail_ds

inline DatasetManifest build_dataset(const std::string& corpus_dir, const std::string& out_dir,
                                     int count_per_kind, const SystemParams& params,
                                     uint64_t master_seed, const DatasetGenOptions& opts = {}) {
    namespace fs = std::filesystem;
    params.validate();
    if (count_per_kind < 0) throw CountError("count must be >= 0");
    if (opts.tile_size < 2 || opts.tile_size % 2 != 0)
        throw ParamError("tile size must be even and >= 2");

    fs::create_directories(out_dir);
    DatasetManifest m;
    m.name = fs::path(out_dir).filename().string();
    m.corpus_dir = corpus_dir;
    m.params = params;
    m.master_seed = master_seed;
    m.tile_size = opts.tile_size;
    m.denoiser = opts.denoiser == DenoiserKind::identity ? "identity" : "nlm";
    m.base_dir = out_dir;

    const auto items = detail_ds::list_corpus(corpus_dir);

    std::vector<std::string> val_subdirs;
    if (opts.force_split.empty()) {
        std::vector<std::string> subdirs;
        for (const auto& it : items)
            if (!it.subdir.empty() &&
                std::find(subdirs.begin(), subdirs.end(), it.subdir) == subdirs.end())
                subdirs.push_back(it.subdir);
        std::sort(subdirs.begin(), subdirs.end());
        if (subdirs.size() >= 2) {
            const int n_val = std::max(
                1, static_cast<int>(std::lround(opts.validation_subdir_fraction * subdirs.size())));
            val_subdirs.assign(subdirs.end() - n_val, subdirs.end());
        }
    }

    const Denoiser denoise = make_denoiser(opts.denoiser);
    int made = 0;
    char namebuf[64];
    for (size_t idx = 0; idx < items.size() && made < count_per_kind; ++idx) {
        const auto& item = items[idx];
        Raster gray;
        try {
            gray = read_image((fs::path(corpus_dir) / item.rel_path).string());
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping unreadable image " << item.rel_path << " (" << e.what()
                      << ")\n";
            continue;
        }
        const uint64_t pair_seed = mix_seed(master_seed, fnv1a64(item.rel_path));
        const std::string split = opts.force_split.empty()
                                      ? detail_ds::split_for(item, val_subdirs)
                                      : opts.force_split;

        for (ChannelKind kind : {ChannelKind::amplitude, ChannelKind::phase}) {
            Raster target;
            if (kind == ChannelKind::amplitude) {
                target = prepare_target_amplitude(gray, opts.tile_size, denoise);
            } else {
                Rng rng(mix_seed(pair_seed, 1));
                target = prepare_target_phase(gray, opts.tile_size, denoise, opts.highpass_sigma, rng);
            }
            detail_ds::quantize_to_storage(target);
            SynthesizedPair sp = synthesize_pair(target, kind, params);

            PairRecord rec;
            rec.kind = kind;
            rec.seed = pair_seed;
            rec.source_id = item.rel_path;
            rec.split = split;
            rec.width = opts.tile_size;
            rec.height = opts.tile_size;
            std::snprintf(namebuf, sizeof(namebuf), "pair%05d_%s", made,
                          kind == ChannelKind::amplitude ? "amp" : "phs");
            rec.input_file = std::string(namebuf) + "_input.utr";
            rec.target_file = std::string(namebuf) + "_target.utr";
            rec.holo_file = std::string(namebuf) + "_holo.utr";
            write_raster((fs::path(out_dir) / rec.input_file).string(), sp.input);
            write_raster((fs::path(out_dir) / rec.target_file).string(), sp.target);
            write_raster((fs::path(out_dir) / rec.holo_file).string(), sp.hologram);
            m.pairs.push_back(std::move(rec));
        }
        ++made;
    }
    if (made < count_per_kind)
        throw CountError("corpus holds only " + std::to_string(made) + " readable images, need " +
                         std::to_string(count_per_kind));

    save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
    return m;
}

}  // namespace utir
