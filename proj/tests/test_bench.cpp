#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "support/synthetic_corpus.hpp"
#include "utir/bench.hpp"
#include "utir/plot.hpp"

using namespace utir;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    fs::path base;
    DatasetManifest manifest;
    NetworkWeights wa, wp;

    Fixture() {
        base = fs::temp_directory_path() / ("utir_bench_" + std::to_string(::getpid()));
        fs::remove_all(base);
        testsup::write_corpus((base / "corpus").string(), {{"a", 3}, {"b", 2}}, 48, 5,
                              testsup::Flavor::organic);
        DatasetGenOptions opts;
        opts.tile_size = 32;
        opts.denoiser = DenoiserKind::identity;
        manifest = build_dataset((base / "corpus").string(), (base / "ds").string(), 5,
                                 testsup::desk_params(), 1, opts);
        NetworkSpec spec;
        spec.filters = 2;
        spec.blocks = 1;
        wa = init_weights(spec, 101);
        wp = init_weights(spec, 102);
        wa.meta.tile_size = 32;
        wp.meta.tile_size = 32;
    }
    ~Fixture() { fs::remove_all(base); }
};

}  // namespace

TEST_CASE("evaluate: AS cell equals the stored-input rmse by definition") {
    Fixture fx;
    EvalOptions opts;
    opts.methods = {Method::AS};
    EvalReport report = evaluate({fx.manifest}, opts);

    // manual aggregation over the train split, amplitude kind
    auto records = fx.manifest.select(ChannelKind::amplitude, "train");
    REQUIRE(!records.empty());
    double acc = 0.0;
    for (const auto* rec : records) {
        LoadedPair lp = load_pair(fx.manifest, *rec);
        acc += rmse(lp.input, lp.target);
    }
    acc /= records.size();

    const EvalRow* row = report.find(fx.manifest.name, "train", ChannelKind::amplitude, Method::AS);
    REQUIRE(row != nullptr);
    CHECK(row->mean_rmse == Catch::Approx(acc).epsilon(1e-12));
    CHECK(row->count == static_cast<int>(records.size()));
}

TEST_CASE("evaluate: learned methods require weights") {
    Fixture fx;
    EvalOptions opts;
    opts.methods = {Method::Utirnet};
    CHECK_THROWS_AS(evaluate({fx.manifest}, opts), ConfigError);
    CHECK_THROWS_AS(evaluate({}, opts), CountError);
}

TEST_CASE("evaluate covers every method and is deterministic") {
    Fixture fx;
    EvalOptions opts;
    opts.methods = {Method::AS, Method::CnnOnly, Method::Utirnet, Method::GS, Method::GsCff};
    EvalReport a = evaluate({fx.manifest}, opts, &fx.wa, &fx.wp);
    EvalReport b = evaluate({fx.manifest}, opts, &fx.wa, &fx.wp);

    // rows: 2 splits x 2 kinds x 5 methods
    CHECK(a.rows.size() == 20);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].mean_rmse == b.rows[i].mean_rmse);
        CHECK(a.rows[i].std_rmse == b.rows[i].std_rmse);
        CHECK(a.rows[i].count > 0);
        CHECK(std::isfinite(a.rows[i].mean_rmse));
    }
}

TEST_CASE("z_sweep basics") {
    Fixture fx;
    std::vector<double> zs = {0.3e-3, 0.4e-3, 0.5e-3};
    auto curve = z_sweep(fx.manifest, fx.wa, fx.wp, zs, 2);
    REQUIRE(curve.size() == 3);
    for (size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].z == zs[i]);
        CHECK(curve[i].as_rmse > 0.0);
        CHECK(curve[i].relative_pct ==
              Catch::Approx(100.0 * curve[i].utirnet_rmse / curve[i].as_rmse));
    }
    auto again = z_sweep(fx.manifest, fx.wa, fx.wp, zs, 2);
    for (size_t i = 0; i < curve.size(); ++i)
        CHECK(curve[i].utirnet_rmse == again[i].utirnet_rmse);

    CHECK_THROWS_AS(z_sweep(fx.manifest, fx.wa, fx.wp, {0.0}), ParamError);
    CHECK_THROWS_AS(z_sweep(fx.manifest, fx.wa, fx.wp, {-1e-3}), ParamError);
}

TEST_CASE("time_methods produces a full table") {
    Fixture fx;
    EvalOptions opts;
    std::vector<int> sizes = {64, 192};
    std::vector<Method> methods = {Method::AS, Method::GS, Method::GsCff, Method::Utirnet};
    TimingReport report =
        time_methods(sizes, methods, 1, testsup::desk_params(), &fx.wa, &fx.wp, opts);
    CHECK(report.cells.size() == sizes.size() * methods.size());
    CHECK_FALSE(report.hardware.empty());
    for (const auto& c : report.cells) CHECK(c.seconds >= 0.0);
    // 9x the pixels: the CNN-bound method must not get faster
    CHECK(report.at(192, Method::Utirnet) >= report.at(64, Method::Utirnet));

    const std::string csv = timing_csv(report, sizes, methods);
    CHECK(csv.rfind("image_size,AS_s,GS_s,GS+CFF_s,UTIRnet_s\n", 0) == 0);
    CHECK(csv.find("64x64,") != std::string::npos);
    CHECK(csv.find("192x192,") != std::string::npos);
    CHECK(csv.find("# hardware:") != std::string::npos);

    CHECK_THROWS_AS(time_methods(sizes, {Method::Utirnet}, 1, testsup::desk_params(), nullptr,
                                 nullptr, opts),
                    ConfigError);
}

TEST_CASE("csv and json emission") {
    Fixture fx;
    EvalOptions opts;
    opts.methods = {Method::AS};
    EvalReport report = evaluate({fx.manifest}, opts);

    const std::string csv = eval_report_csv(report);
    CHECK(csv.rfind("dataset,split,kind,method,mean_rmse,std_rmse,count\n", 0) == 0);
    size_t lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(lines == report.rows.size() + 1);

    auto parsed = nlohmann::json::parse(eval_report_json(report));
    CHECK(parsed.at("rows").size() == report.rows.size());
    CHECK(parsed.at("params").at("wavelength").get<double>() == Catch::Approx(405e-9));

    std::vector<ZSweepPoint> curve = {{1e-3, 0.05, 0.1, 50.0}, {2e-3, 0.08, 0.1, 80.0}};
    const std::string zcsv = z_sweep_csv(curve);
    CHECK(zcsv.rfind("z,utirnet_rmse,as_rmse,relative_pct\n", 0) == 0);
    CHECK(zcsv.find("0.001,0.05,0.1,50\n") != std::string::npos);
}

TEST_CASE("plots are emitted deterministically") {
    Fixture fx;
    EvalOptions opts;
    opts.methods = {Method::AS, Method::Utirnet};
    EvalReport report = evaluate({fx.manifest}, opts, &fx.wa, &fx.wp);

    const auto bar1 = (fx.base / "bars1.png").string();
    const auto bar2 = (fx.base / "bars2.png").string();
    plot_eval_report(report, bar1);
    plot_eval_report(report, bar2);
    REQUIRE(fs::exists(bar1));
    CHECK(fs::file_size(bar1) > 500);
    std::ifstream f1(bar1, std::ios::binary), f2(bar2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    std::vector<double> zs = {0.3e-3, 0.4e-3, 0.5e-3};
    ZSweepCurve curve{"Z=0.4MM", z_sweep(fx.manifest, fx.wa, fx.wp, zs, 1)};
    const auto zplot = (fx.base / "zsweep.png").string();
    plot_z_sweep({curve}, zplot);
    REQUIRE(fs::exists(zplot));
    CHECK(fs::file_size(zplot) > 500);

    CHECK_THROWS_AS(plot_eval_report(EvalReport{}, (fx.base / "no.png").string()), DataError);
    CHECK_FALSE(fs::exists(fx.base / "no.png"));
    CHECK_THROWS_AS(plot_z_sweep({}, (fx.base / "no2.png").string()), DataError);
}
