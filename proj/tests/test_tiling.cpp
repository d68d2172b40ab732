#include <catch2/catch_amalgamated.hpp>

#include "utir/rng.hpp"
#include "utir/tiling.hpp"

using namespace utir;

namespace {

Raster random_raster(int w, int h, Rng& rng) {
    Raster r(w, h);
    for (double& x : r.v) x = rng.uniform(-1.0, 2.0);
    return r;
}

double weight_sum_at(const TileLayout& lt, int x, int y) {
    double sum = 0.0;
    for (size_t iy = 0; iy < lt.ystarts.size(); ++iy)
        for (size_t ix = 0; ix < lt.xstarts.size(); ++ix)
            sum += lt.weight_at(static_cast<int>(ix), static_cast<int>(iy), x, y);
    return sum;
}

}  // namespace

TEST_CASE("single tile layout when the image equals the tile") {
    TileLayout lt = plan_tiles(512, 512, 512, 0.10);
    REQUIRE(lt.tiles.size() == 1);
    CHECK(lt.tiles[0].x == 0);
    CHECK(lt.tiles[0].y == 0);
    CHECK(weight_sum_at(lt, 0, 0) == 1.0);
    CHECK(weight_sum_at(lt, 300, 511) == 1.0);
    CHECK(lt.weight_at(0, 0, 7, 9) == 1.0);
}

TEST_CASE("1024 image with 512 tiles and 10 percent overlap") {
    TileLayout lt = plan_tiles(1024, 1024, 512, 0.10);
    REQUIRE(lt.xstarts == std::vector<int>{0, 256, 512});
    REQUIRE(lt.ystarts == std::vector<int>{0, 256, 512});
    REQUIRE(lt.tiles.size() == 9);
    // coverage and the spec'd minimum overlap of 51 px
    for (size_t i = 1; i < lt.xstarts.size(); ++i)
        CHECK(lt.xstarts[i - 1] + 512 - lt.xstarts[i] >= 51);
    CHECK(lt.xstarts.back() + 512 == 1024);
}

TEST_CASE("layout determinism") {
    TileLayout a = plan_tiles(1931, 1207, 256, 0.10);
    TileLayout b = plan_tiles(1931, 1207, 256, 0.10);
    CHECK(a.xstarts == b.xstarts);
    CHECK(a.ystarts == b.ystarts);
    REQUIRE(a.tiles.size() == b.tiles.size());
}

TEST_CASE("partition of unity across random layouts") {
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const int tile = 16 + 2 * static_cast<int>(rng.uniform_int(40));
        const int w = tile + static_cast<int>(rng.uniform_int(3 * tile));
        const int h = tile + static_cast<int>(rng.uniform_int(3 * tile));
        const double frac = rng.uniform(0.0, 0.45);
        TileLayout lt = plan_tiles(w, h, tile, frac);
        for (int probe = 0; probe < 40; ++probe) {
            const int x = static_cast<int>(rng.uniform_int(lt.padded_width));
            const int y = static_cast<int>(rng.uniform_int(lt.padded_height));
            CHECK(std::abs(weight_sum_at(lt, x, y) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("identity filter reassembles the input bit-exactly") {
    Rng rng(42);
    Raster r = random_raster(300, 220, rng);
    TileLayout lt = plan_tiles(r.width, r.height, 96, 0.10);
    REQUIRE(lt.tiles.size() > 4);
    Raster out = process_tiled(r, lt, [](const Raster& t) { return t; });
    CHECK(out.v == r.v);
}

TEST_CASE("constant-shift filter produces no seams") {
    Rng rng(43);
    Raster r = random_raster(200, 200, rng);
    TileLayout lt = plan_tiles(r.width, r.height, 64, 0.10);
    Raster out = process_tiled(r, lt, [](const Raster& t) {
        Raster s = t;
        for (double& x : s.v) x += 2.5;
        return s;
    });
    for (size_t i = 0; i < r.v.size(); ++i) CHECK(out.v[i] == r.v[i] + 2.5);
}

TEST_CASE("filter changing dimensions is a contract violation") {
    Rng rng(44);
    Raster r = random_raster(128, 128, rng);
    TileLayout lt = plan_tiles(r.width, r.height, 64, 0.10);
    CHECK_THROWS_AS(process_tiled(r, lt, [](const Raster&) { return Raster(3, 3); }),
                    ContractError);
}

TEST_CASE("image smaller than the tile is padded and cropped back") {
    Rng rng(45);
    Raster r = random_raster(40, 28, rng);
    TileLayout lt = plan_tiles(r.width, r.height, 64, 0.10);
    REQUIRE(lt.tiles.size() == 1);
    CHECK(lt.needs_padding());
    int seen_w = 0;
    Raster out = process_tiled(r, lt, [&](const Raster& t) {
        seen_w = t.width;
        return t;
    });
    CHECK(seen_w == 64);  // the filter always sees a full tile
    CHECK(out.v == r.v);
}

TEST_CASE("plan_tiles rejects bad arguments") {
    CHECK_THROWS_AS(plan_tiles(0, 10, 8, 0.1), ShapeError);
    CHECK_THROWS_AS(plan_tiles(10, 10, 0, 0.1), ParamError);
    CHECK_THROWS_AS(plan_tiles(10, 10, 8, 0.5), ParamError);
    CHECK_THROWS_AS(plan_tiles(10, 10, 8, -0.1), ParamError);
}

TEST_CASE("weights are linear ramps over the overlap band") {
    TileLayout lt = plan_tiles(100, 60, 60, 0.2);  // overlap 12 -> starts {0, 40}
    REQUIRE(lt.xstarts == std::vector<int>{0, 40});
    // overlap band covers x in [40, 59]
    double prev = 1.1;
    for (int x = 40; x < 60; ++x) {
        const double wl = lt.weight_at(0, 0, x, 30);
        const double wr = lt.weight_at(1, 0, x, 30);
        CHECK(std::abs(wl + wr - 1.0) < 1e-12);
        CHECK(wl < prev);  // strictly decreasing ramp
        prev = wl;
    }
    CHECK(lt.weight_at(0, 0, 39, 30) == 1.0);
    CHECK(lt.weight_at(1, 0, 60, 30) == 1.0);
}
