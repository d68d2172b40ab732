#include <catch2/catch_amalgamated.hpp>

#include "support/synthetic_corpus.hpp"
#include "utir/dataset.hpp"
#include "utir/reconstruct.hpp"

using namespace utir;

namespace {

Hologram simulated_hologram(uint64_t seed, int n = 64) {
    SystemParams params = testsup::desk_params();
    Raster target = testsup::synth_image(n, seed, testsup::Flavor::organic);
    SynthesizedPair sp = synthesize_pair(target, ChannelKind::amplitude, params);
    return Hologram{sp.hologram, params};
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace

TEST_CASE("backpropagate uniform intensity") {
    SystemParams params = testsup::desk_params();
    Hologram holo{Raster(32, 32, params.effective_pitch(), 4.0), params};
    ComplexField u = backpropagate(holo);
    for (auto z : u.v) CHECK(std::abs(z - cdouble{2.0, 0.0}) < 1e-9);
}

TEST_CASE("backpropagate refocuses a point absorber") {
    SystemParams params = testsup::desk_params();
    const int n = 64;
    Raster object(n, n, 1.0, 1.0);
    object.at(n / 2, n / 2) = 0.0;
    object.at(n / 2 + 1, n / 2) = 0.0;
    object.at(n / 2, n / 2 + 1) = 0.0;
    object.at(n / 2 + 1, n / 2 + 1) = 0.0;
    SynthesizedPair sp = synthesize_pair(object, ChannelKind::amplitude, params);
    Hologram holo{sp.hologram, params};
    ComplexField u = backpropagate(holo);
    // strongest deviation from the unit background sits at the absorber
    double best = -1.0;
    int bx = -1, by = -1;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double d = std::abs(std::abs(u.at(x, y)) - 1.0);
            if (d > best) {
                best = d;
                bx = x;
                by = y;
            }
        }
    CHECK(std::abs(bx - n / 2) <= 1);
    CHECK(std::abs(by - n / 2) <= 1);
}

TEST_CASE("backpropagate then forward-propagate restores the hologram amplitude") {
    Hologram holo = simulated_hologram(5);
    ComplexField u = backpropagate(holo);
    ComplexField cam = angular_spectrum(u, -holo.params.z_distance, holo.params.wavelength);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < cam.v.size(); ++i) {
        const double d = std::abs(cam.v[i]) - std::sqrt(holo.intensity.v[i]);
        num += d * d;
        den += holo.intensity.v[i];
    }
    CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("backpropagate rejects negative intensity") {
    SystemParams params = testsup::desk_params();
    Raster bad(8, 8, params.effective_pitch(), 1.0);
    bad.v[3] = -0.5;
    CHECK_THROWS_AS(backpropagate(Hologram{bad, params}), DataError);
    bad.v[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(backpropagate(Hologram{bad, params}), DataError);
}

TEST_CASE("normalize_experimental basics") {
    Raster amp(4, 4, 1e-6, 2.0), ph(4, 4, 1e-6, 0.0);
    ComplexField f = combine(amp, ph);
    auto [norm, rec] = normalize_experimental(f);
    CHECK(rec.amplitude_median == Catch::Approx(2.0));
    CHECK(rec.phase_offset == Catch::Approx(kPi));
    auto [na, np] = split_normalized(norm, rec);
    for (double v : na.v) CHECK(v == Catch::Approx(1.0));
    for (double v : np.v) CHECK(v == Catch::Approx(kPi));
}

TEST_CASE("normalization inverts exactly") {
    Rng rng(9);
    ComplexField f(6, 5, 1e-6);
    for (auto& z : f.v) z = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    auto [norm, rec] = normalize_experimental(f);
    CHECK(max_abs_diff(denormalize(norm, rec), f) < 1e-12);

    auto [na, np] = split_normalized(norm, rec);
    ComplexField back = combine_denormalized(na, np, rec);
    CHECK(max_abs_diff(back, f) < 1e-12);
}

TEST_CASE("normalization divides by the amplitude median") {
    Raster amp(3, 1, 1e-6), ph(3, 1, 1e-6, 0.0);
    amp.v = {1.0, 2.0, 3.0};
    auto [norm, rec] = normalize_experimental(combine(amp, ph));
    CHECK(rec.amplitude_median == Catch::Approx(2.0));
    CHECK(std::abs(norm.v[0]) == Catch::Approx(0.5));
    CHECK(std::abs(norm.v[2]) == Catch::Approx(1.5));

    ComplexField zeros(3, 3, 1e-6, {0.0, 0.0});
    CHECK_THROWS_AS(normalize_experimental(zeros), DataError);
}

TEST_CASE("identity filters collapse the pipeline to plain backpropagation") {
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        Hologram holo = simulated_hologram(seed);
        ComplexField direct = backpropagate(holo);
        ComplexField out = utirnet_reconstruct_with(holo, identity_filter(), identity_filter());
        CHECK(max_abs_diff(out, direct) < 1e-10);

        ComplexField cnn_only =
            cnn_only_reconstruct_with(holo, identity_filter(), identity_filter());
        CHECK(max_abs_diff(cnn_only, direct) < 1e-12);
    }
}

TEST_CASE("uniform hologram gives a uniform reconstruction") {
    SystemParams params = testsup::desk_params();
    Hologram holo{Raster(32, 32, params.effective_pitch(), 1.0), params};
    ComplexField out = utirnet_reconstruct_with(holo, identity_filter(), identity_filter());
    for (auto z : out.v) CHECK(std::abs(z - cdouble{1.0, 0.0}) < 1e-9);
}

TEST_CASE("physics consistency holds for arbitrary channel filters") {
    Hologram holo = simulated_hologram(11);
    // a deliberately destructive filter pair
    RasterFilter smash_a = [](const Raster& r) {
        Raster s = r;
        for (double& x : s.v) x = 0.7 * x + 0.1;
        return s;
    };
    RasterFilter smash_p = [](const Raster& r) {
        Raster s = r;
        for (double& x : s.v) x = std::clamp(x, 0.5, 5.0);
        return s;
    };
    ComplexField out = utirnet_reconstruct_with(holo, smash_a, smash_p);
    ComplexField cam = angular_spectrum(out, -holo.params.z_distance, holo.params.wavelength);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < cam.v.size(); ++i) {
        const double d = std::abs(cam.v[i]) - std::sqrt(holo.intensity.v[i]);
        num += d * d;
        den += holo.intensity.v[i];
    }
    CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("channel filter that changes dimensions is rejected") {
    Hologram holo = simulated_hologram(12);
    RasterFilter bad = [](const Raster&) { return Raster(3, 3); };
    CHECK_THROWS_AS(utirnet_reconstruct_with(holo, bad, identity_filter()), ContractError);
}

TEST_CASE("weights-driven reconstruction routes large fields through tiles") {
    NetworkSpec spec;
    spec.filters = 2;
    spec.blocks = 1;
    NetworkWeights wa = init_weights(spec, 21);
    NetworkWeights wp = init_weights(spec, 22);
    wa.meta.tile_size = 32;
    wp.meta.tile_size = 32;

    SystemParams params = testsup::desk_params();
    Raster target = testsup::synth_image(96, 31, testsup::Flavor::organic);
    SynthesizedPair sp = synthesize_pair(target, ChannelKind::amplitude, params);
    Hologram holo{sp.hologram, params};

    ComplexField out = utirnet_reconstruct(holo, wa, wp);
    CHECK(out.width == 96);
    CHECK(out.height == 96);

    // the consistency step keeps the output hologram-faithful regardless of
    // how the CNN channels were produced
    ComplexField cam = angular_spectrum(out, -params.z_distance, params.wavelength);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < cam.v.size(); ++i) {
        const double d = std::abs(cam.v[i]) - std::sqrt(holo.intensity.v[i]);
        num += d * d;
        den += holo.intensity.v[i];
    }
    CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("odd-sized hologram works through edge padding") {
    NetworkSpec spec;
    spec.filters = 2;
    spec.blocks = 1;
    NetworkWeights wa = init_weights(spec, 23);
    NetworkWeights wp = init_weights(spec, 24);

    SystemParams params = testsup::desk_params();
    Raster intensity(33, 29, params.effective_pitch(), 1.0);
    Hologram holo{intensity, params};
    ComplexField out = utirnet_reconstruct(holo, wa, wp);
    CHECK(out.width == 33);
    CHECK(out.height == 29);
}

TEST_CASE("consistency iterations parameter") {
    Hologram holo = simulated_hologram(44);
    ReconstructOptions opts;
    opts.consistency_iterations = 0;
    ComplexField no_update = utirnet_reconstruct_with(holo, identity_filter(), identity_filter(), opts);
    ComplexField plain = cnn_only_reconstruct_with(holo, identity_filter(), identity_filter());
    CHECK(max_abs_diff(no_update, plain) == 0.0);

    opts.consistency_iterations = 3;
    ComplexField multi = utirnet_reconstruct_with(holo, identity_filter(), identity_filter(), opts);
    CHECK(multi.width == holo.intensity.width);
    CHECK_THROWS_AS([&] {
        ReconstructOptions bad;
        bad.consistency_iterations = -1;
        utirnet_reconstruct_with(holo, identity_filter(), identity_filter(), bad);
    }(), ParamError);
}
