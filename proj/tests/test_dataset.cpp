#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lwdinv/core/checksum.hpp"
#include "lwdinv/core/rng.hpp"
#include "lwdinv/dataset/dataset.hpp"

using namespace lwdinv;
using namespace lwdinv::dataset;
using instrument::ChannelSet;
namespace fs = std::filesystem;

namespace {

formation::SamplerConfig small_cfg(std::uint64_t seed, int t = 9) {
    formation::SamplerConfig cfg;
    cfg.seed = seed;
    cfg.t_count = t;
    return cfg;
}

fs::path temp_dir(const char* tag) {
    const auto p = fs::temp_directory_path() / (std::string("lwdinv_test_") + tag);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("target scaling: bounds, midpoint, round trip") {
    formation::SamplerConfig cfg;
    formation::FormationModel f;
    f.rho_h = 1.0;      // log = 0 -> scaled 0
    f.rho_v = 10.0;     // log a = 1 -> scaled 1
    f.rho_u = 1000.0;   // scaled 1
    f.rho_l = 1.0;      // scaled 0
    f.d_u = std::pow(10.0, -0.5);  // midpoint of [-2, 1]
    f.d_l = 10.0;
    f.beta_deg = -10.0;
    const auto s = scale_targets(f, cfg);
    CHECK(s[0] == doctest::Approx(0.0));
    CHECK(s[1] == doctest::Approx(1.0));
    CHECK(s[2] == doctest::Approx(1.0));
    CHECK(s[3] == doctest::Approx(0.0));
    CHECK(s[4] == doctest::Approx(0.5));
    CHECK(s[5] == doctest::Approx(1.0));
    CHECK(s[6] == doctest::Approx(0.0));

    Rng rng(55);
    for (int i = 0; i < 10000; ++i) {
        Rng s_rng = rng.stream(i);
        const auto g = formation::sample_formation(cfg, s_rng);
        const auto v = scale_targets(g, cfg);
        const auto back = unscale_targets(v, cfg);
        CHECK(std::abs(std::log10(back.rho_h) - std::log10(g.rho_h)) < 1e-12);
        CHECK(std::abs(std::log10(back.d_u) - std::log10(g.d_u)) < 1e-12);
        CHECK(std::abs(back.beta_deg - g.beta_deg) < 1e-12);
    }

    formation::FormationModel bad = f;
    bad.rho_u = 0.5;
    CHECK_THROWS_AS(scale_targets(bad, cfg), RangeError);
    CHECK_THROWS_AS(unscale_targets({0.5, 0.5, 1.2, 0.5, 0.5, 0.5, 0.5}, cfg),
                    RangeError);
}

TEST_CASE("split sizing: floor rule with remainder to train") {
    auto s = split_sizes(1000000, 0.8, 0.1, 0.1);
    CHECK(s[0] == 800000);
    CHECK(s[1] == 100000);
    CHECK(s[2] == 100000);
    s = split_sizes(10, 0.8, 0.1, 0.1);
    CHECK(s[0] == 8);
    CHECK(s[1] == 1);
    CHECK(s[2] == 1);
    CHECK_THROWS_AS(split_sizes(2, 0.8, 0.1, 0.1), ValidationError);
    CHECK_THROWS_AS(split_sizes(100, 0.8, 0.1, 0.2), ValidationError);
}

TEST_CASE("generate: determinism, channel accounting, split coverage") {
    const auto cfg = small_cfg(4242);
    GenerateOptions opts;
    auto ds = generate(12, cfg, {ChannelSet::M2}, opts);
    CHECK(ds.size() == 12);
    CHECK(ds.manifest.channels == 2 + 3);

    auto ds2 = generate(12, cfg, {ChannelSet::M2}, opts);
    CHECK(ds.features == ds2.features);
    CHECK(ds.targets == ds2.targets);

    // worker-count independence
    GenerateOptions serial = opts;
    serial.threads = 1;
    auto ds1 = generate(12, cfg, {ChannelSet::M2}, serial);
    CHECK(ds.features == ds1.features);

    auto all = generate(4, cfg, {ChannelSet::M1, ChannelSet::M2, ChannelSet::M3}, opts);
    CHECK(all.manifest.channels == 6 + 3);
    CHECK(all.manifest.channel_names.size() == 9);

    ds.assign_split(0.8, 0.1, 0.1, 99);
    CHECK(ds.manifest.train_idx.size() == 10);
    CHECK(ds.manifest.val_idx.size() == 1);
    CHECK(ds.manifest.test_idx.size() == 1);
    ds.validate();
    CHECK(ds.manifest.stats.size() == 5);
    for (const auto& st : ds.manifest.stats) CHECK(st.stddev > 0.0);
}

TEST_CASE("near-homogeneous sample yields near-constant M2 channels") {
    // boundaries ~10 m away, mild contrast: deep attenuation barely moves
    formation::FormationModel f;
    f.rho_h = 1.0;
    f.rho_v = 1.0;
    f.rho_u = 1.5;
    f.rho_l = 2.0;
    f.d_u = 9.99;
    f.d_l = 9.99;
    const auto traj = formation::build_trajectory(90.0, 0.0, 16);
    const auto meas = instrument::simulate_window(f, traj, {ChannelSet::M2});
    double lo_att = 1e30, hi_att = -1e30;
    for (std::size_t t = 0; t < traj.size(); ++t) {
        lo_att = std::min(lo_att, meas[t * 2 + 0]);
        hi_att = std::max(hi_att, meas[t * 2 + 0]);
    }
    CHECK(hi_att - lo_att < 1e-2);
}

TEST_CASE("save/load round trip is bit exact with checksum guard") {
    const auto cfg = small_cfg(7);
    auto ds = generate(6, cfg, {ChannelSet::M2, ChannelSet::M3});
    ds.assign_split(0.8, 0.1, 0.1, 5);
    const auto dir = temp_dir("roundtrip");
    save(ds, dir);
    const auto back = load(dir);
    CHECK(back.features == ds.features);
    CHECK(back.targets == ds.targets);
    CHECK(back.manifest.train_idx == ds.manifest.train_idx);
    CHECK(back.manifest.stats.size() == ds.manifest.stats.size());
    CHECK(back.manifest.stats[0].mean == ds.manifest.stats[0].mean);

    // corrupt one byte -> checksum error naming the file
    {
        std::fstream fbin(dir / "features.bin",
                          std::ios::in | std::ios::out | std::ios::binary);
        fbin.seekp(3);
        char c;
        fbin.seekg(3);
        fbin.get(c);
        fbin.seekp(3);
        c = static_cast<char>(c ^ 0x40);
        fbin.put(c);
    }
    try {
        load(dir);
        CHECK(false);
    } catch (const ChecksumError& e) {
        CHECK(std::string(e.what()).find("features.bin") != std::string::npos);
    }

    // unknown schema version -> explicit version error
    save(ds, dir);
    {
        std::ifstream in(dir / "manifest.json");
        std::string text((std::istreambuf_iterator<char>(in)), {});
        in.close();
        auto pos = text.find("\"schema_version\": 1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 19, "\"schema_version\": 9");
        std::ofstream out(dir / "manifest.json");
        out << text;
    }
    CHECK_THROWS_AS(load(dir), SchemaError);
    fs::remove_all(dir);
}

TEST_CASE("text export is lossless for float32") {
    const auto cfg = small_cfg(13, 4);
    auto ds = generate(3, cfg, {ChannelSet::M2});
    ds.assign_split(0.8, 0.1, 0.1, 1);
    const auto file = temp_dir("txt").string() + ".txt";
    fs::create_directories(fs::path(file).parent_path());
    export_text(ds, file);
    std::ifstream in(file);
    std::string header;
    std::getline(in, header);
    CHECK(header.find("M2.att[0]") != std::string::npos);
    std::size_t idx;
    std::string split;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        in >> idx >> split;
        for (int k = 0; k < formation::kNumTargets; ++k) {
            double v;
            in >> v;
            CHECK(static_cast<float>(v) == ds.target_row(i)[k]);
        }
        for (int k = 0; k < ds.manifest.t_count * ds.manifest.channels; ++k) {
            double v;
            in >> v;
            CHECK(static_cast<float>(v) == ds.feature_row(i)[k]);
        }
    }
    fs::remove(file);
}

TEST_CASE("channel selection keeps split and recomputes stats") {
    const auto cfg = small_cfg(21, 5);
    auto ds = generate(8, cfg, {ChannelSet::M1, ChannelSet::M2, ChannelSet::M3});
    ds.assign_split(0.8, 0.1, 0.1, 3);
    const auto sub = ds.select_channels({ChannelSet::M2});
    CHECK(sub.manifest.channels == 5);
    CHECK(sub.manifest.channel_names[0] == "M2.att");
    CHECK(sub.manifest.channel_names[4] == "traj.dip");
    CHECK(sub.manifest.train_idx == ds.manifest.train_idx);
    CHECK(sub.targets == ds.targets);
    // column content preserved
    const int cc_full = ds.manifest.channels, cc_sub = sub.manifest.channels;
    const int m2_att_col = 2;  // after M1.att, M1.phase
    for (int t = 0; t < ds.manifest.t_count; ++t)
        CHECK(sub.feature_row(2)[t * cc_sub + 0] ==
              ds.feature_row(2)[t * cc_full + m2_att_col]);
    CHECK_THROWS_AS(ds.select_channels({}), ValidationError);
    const auto m2only = ds.select_channels({ChannelSet::M2});
    CHECK_THROWS_AS(m2only.select_channels({ChannelSet::M1}), ValidationError);
}
