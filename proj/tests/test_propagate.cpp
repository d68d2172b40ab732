#include <catch2/catch_amalgamated.hpp>

#include "utir/propagate.hpp"
#include "utir/rng.hpp"

using namespace utir;

namespace {

constexpr double kLambda = 405e-9;
constexpr double kPitch = 2.4e-6;

ComplexField random_field(int w, int h, double pitch, Rng& rng) {
    ComplexField f(w, h, pitch);
    for (auto& z : f.v) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return f;
}

// Zero the evanescent band so the field is strictly band-limited.
ComplexField band_limit(const ComplexField& f, double wavelength) {
    PropagationPlan plan(f.width, f.height, wavelength, f.pitch);
    ComplexField spec = fft::fft2(f);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            if (plan.transfer_at(x, y, 0.0) == cdouble{0.0, 0.0}) spec.at(x, y) = {0.0, 0.0};
    return fft::ifft2(spec);
}

double energy(const ComplexField& f) {
    double e = 0.0;
    for (auto z : f.v) e += std::norm(z);
    return e;
}

}  // namespace

TEST_CASE("plane wave gains only the piston phase") {
    const double z = 1.7e-3;
    ComplexField f(32, 32, kPitch, {0.8, 0.0});
    ComplexField g = angular_spectrum(f, z, kLambda);
    const cdouble expected = 0.8 * std::polar(1.0, kTwoPi * z / kLambda);
    for (auto v : g.v) CHECK(std::abs(v - expected) < 1e-9);
}

TEST_CASE("forward then backward propagation is the identity") {
    Rng rng(3);
    for (int trial = 0; trial < 4; ++trial) {
        ComplexField f = random_field(64, 48, kPitch, rng);
        // at this pitch/wavelength every grid frequency propagates
        ComplexField round = angular_spectrum(angular_spectrum(f, 2.6e-3, kLambda), -2.6e-3, kLambda);
        CHECK(rel_rmse(round, f) < 1e-10);
    }
}

TEST_CASE("inverse propagation with a real evanescent band") {
    // pitch below lambda/2: part of the grid is evanescent and gets cut
    const double pitch = 0.15e-6;
    Rng rng(9);
    ComplexField f = band_limit(random_field(48, 48, pitch, rng), kLambda);
    ComplexField round = angular_spectrum(angular_spectrum(f, 5e-6, kLambda), -5e-6, kLambda);
    CHECK(rel_rmse(round, f) < 1e-10);
}

TEST_CASE("energy conservation on the propagating band") {
    Rng rng(4);
    ComplexField f = band_limit(random_field(64, 64, 0.15e-6, rng), kLambda);
    const double e0 = energy(f);
    ComplexField g = angular_spectrum(f, 3e-6, kLambda);
    CHECK(std::abs(energy(g) - e0) / e0 < 1e-9);
}

TEST_CASE("composition of propagations") {
    Rng rng(5);
    ComplexField f = random_field(64, 64, kPitch, rng);
    ComplexField two_step = angular_spectrum(angular_spectrum(f, 1.1e-3, kLambda), 0.7e-3, kLambda);
    ComplexField one_step = angular_spectrum(f, 1.8e-3, kLambda);
    CHECK(rel_rmse(two_step, one_step) < 1e-10);
}

TEST_CASE("zero distance is the identity") {
    Rng rng(6);
    ComplexField f = random_field(32, 32, kPitch, rng);
    ComplexField g = angular_spectrum(f, 0.0, kLambda);
    CHECK(rel_rmse(g, f) < 1e-12);
}

TEST_CASE("linearity") {
    Rng rng(7);
    ComplexField f = random_field(32, 32, kPitch, rng);
    ComplexField g = random_field(32, 32, kPitch, rng);
    const cdouble alpha{0.7, -0.3}, beta{-1.1, 0.4};
    ComplexField combo(32, 32, kPitch);
    for (size_t i = 0; i < combo.v.size(); ++i) combo.v[i] = alpha * f.v[i] + beta * g.v[i];
    ComplexField lhs = angular_spectrum(combo, 1e-3, kLambda);
    ComplexField pf = angular_spectrum(f, 1e-3, kLambda);
    ComplexField pg = angular_spectrum(g, 1e-3, kLambda);
    ComplexField rhs(32, 32, kPitch);
    for (size_t i = 0; i < rhs.v.size(); ++i) rhs.v[i] = alpha * pf.v[i] + beta * pg.v[i];
    CHECK(rel_rmse(lhs, rhs) < 1e-10);
}

TEST_CASE("transfer function magnitude and inverse") {
    // grid with a populated evanescent band
    PropagationPlan plan(32, 32, kLambda, 0.15e-6);
    const double z = 4e-6;
    bool saw_evanescent = false;
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const cdouble hf = plan.transfer_at(x, y, z);
            const cdouble hb = plan.transfer_at(x, y, -z);
            CHECK(std::abs(hf) <= 1.0 + 1e-12);
            CHECK(std::abs(std::abs(hf) - std::abs(hb)) < 1e-12);
            if (hf == cdouble{0.0, 0.0}) {
                saw_evanescent = true;
            } else {
                CHECK(std::abs(hf * hb - cdouble{1.0, 0.0}) < 1e-12);
            }
        }
    }
    CHECK(saw_evanescent);
}

TEST_CASE("point scatterer produces Gabor rings at the Fresnel-zone radii") {
    const int n = 512;
    const double z = 2.6e-3;
    ComplexField object(n, n, kPitch, {1.0, 0.0});
    // weakly absorbing dot, ~1.2 px radius, at the grid center
    const double eps = 0.1, rad = 1.2;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double d2 = (x - n / 2) * (x - n / 2) + (y - n / 2) * (y - n / 2);
            if (d2 <= rad * rad) object.at(x, y) -= cdouble{eps, 0.0};
        }
    ComplexField camera = angular_spectrum(object, -z, kLambda);

    // radial intensity profile in 1 px annuli
    std::vector<double> sum(80, 0.0);
    std::vector<int> cnt(80, 0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double r = std::sqrt(double((x - n / 2) * (x - n / 2) + (y - n / 2) * (y - n / 2)));
            const int bin = static_cast<int>(std::lround(r));
            if (bin < 80) {
                sum[bin] += std::norm(camera.at(x, y));
                ++cnt[bin];
            }
        }
    std::vector<double> profile(80);
    for (int i = 0; i < 80; ++i) profile[i] = cnt[i] ? sum[i] / cnt[i] : 0.0;

    // The ring oscillation rides on a constant offset; crossings of the
    // profile through that baseline sit at the Fresnel-zone radii
    // sqrt(m * lambda * z).
    const int lo = 8, hi = 40;
    double baseline = 0.0;
    for (int i = lo; i <= hi; ++i) baseline += profile[i];
    baseline /= (hi - lo + 1);

    std::vector<double> crossings;
    for (int i = lo; i < hi; ++i) {
        const double a = profile[i] - baseline, b = profile[i + 1] - baseline;
        if (a == 0.0 || a * b >= 0.0) continue;
        crossings.push_back(i + a / (a - b));
    }
    REQUIRE(crossings.size() >= 3);
    const double zone = std::sqrt(kLambda * z) / kPitch;  // 13.5 px
    for (size_t m = 1; m <= 3; ++m) {
        const double expected = zone * std::sqrt(static_cast<double>(m));
        double best = 1e9;
        for (double c : crossings) best = std::min(best, std::abs(c - expected));
        CHECK(best <= 1.0);
    }
}

TEST_CASE("pad_replicate") {
    Rng rng(8);
    Raster r(5, 4);
    for (double& x : r.v) x = rng.uniform(0, 1);
    CHECK(pad_replicate(r, 0).v == r.v);

    Raster q(2, 2);
    q.v = {1, 2, 3, 4};
    Raster p = pad_replicate(q, 1);
    REQUIRE(p.width == 4);
    REQUIRE(p.height == 4);
    const std::vector<double> expected = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(p.v == expected);

    Raster big(512, 512, kPitch, 0.25);
    Raster padded = pad_replicate(big, 256);
    CHECK(padded.width == 1024);
    CHECK(padded.height == 1024);
    CHECK(padded.pitch == kPitch);

    CHECK_THROWS_AS(pad_replicate(q, -1), ParamError);
}

TEST_CASE("crop_center") {
    Rng rng(9);
    Raster r(10, 6);
    for (double& x : r.v) x = rng.uniform(0, 1);
    CHECK(crop_center(r, 10, 6).v == r.v);

    Raster padded = pad_replicate(r, 3);
    CHECK(crop_center(padded, 10, 6).v == r.v);  // bit-identical round trip

    // 1024 -> 512 takes rows/cols 256..767
    Raster big(1024, 1024);
    big.at(256, 256) = 1.0;
    big.at(767, 767) = 2.0;
    big.at(255, 255) = 9.0;
    big.at(768, 768) = 9.0;
    Raster c = crop_center(big, 512, 512);
    CHECK(c.at(0, 0) == 1.0);
    CHECK(c.at(511, 511) == 2.0);

    CHECK_THROWS_AS(crop_center(r, 11, 6), ShapeError);
}

TEST_CASE("non-finite input is rejected") {
    ComplexField f(8, 8, kPitch, {1.0, 0.0});
    f.v[3] = {std::numeric_limits<double>::quiet_NaN(), 0.0};
    CHECK_THROWS_AS(angular_spectrum(f, 1e-3, kLambda), DataError);
}
