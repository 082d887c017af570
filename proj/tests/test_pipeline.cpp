#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lwdinv/pipeline/pipeline.hpp"

using namespace lwdinv;
using namespace lwdinv::pipeline;
using instrument::ChannelSet;
namespace fs = std::filesystem;

namespace {

// Model with zero parameters: every prediction is sigmoid(0) = 0.5.
TrainedModel constant_model(int t_count, int channels,
                            const std::vector<ChannelSet>& sets) {
    TrainedModel m;
    m.config.recurrent_output_size = 8;
    m.config.nb_filter = 4;
    m.config.t_count = t_count;
    m.config.channels = channels;
    m.channel_sets = sets;
    m.channel_names = instrument::channel_names(sets);
    m.channel_names.insert(m.channel_names.end(), {"traj.h", "traj.tvd", "traj.dip"});
    m.stats.assign(channels, {0.0, 1.0});
    m.theta.assign(build_network<float>(m.config).param_count(), 0.0f);
    return m;
}

dataset::Dataset physics_dataset(std::size_t n, std::uint64_t seed, int t_count) {
    formation::SamplerConfig cfg;
    cfg.seed = seed;
    cfg.t_count = t_count;
    auto ds = dataset::generate(n, cfg, {ChannelSet::M2, ChannelSet::M3});
    ds.assign_split(0.6, 0.2, 0.2, seed + 1);
    return ds;
}

MeasurementLog synthetic_log(std::size_t length, int t_count) {
    // window-by-window simulation of a fixed formation along a long path
    formation::FormationModel f;
    f.rho_h = 2.0;
    f.rho_v = 7.0;
    f.rho_u = 30.0;
    f.rho_l = 10.0;
    f.d_u = 1.5;
    f.d_l = 2.5;
    f.beta_deg = 2.0;
    const auto traj = formation::build_trajectory(89.0, 0.01, static_cast<int>(length));
    const auto vals = instrument::simulate_window(
        f, traj, {ChannelSet::M2, ChannelSet::M3});
    MeasurementLog log;
    log.channel_names = instrument::channel_names({ChannelSet::M2, ChannelSet::M3});
    log.positions = traj.positions;
    log.values = vals;
    (void)t_count;
    return log;
}

}  // namespace

TEST_CASE("crossplot: constant predictor, percentile order, permutation invariance") {
    const int T = 7;
    auto ds = physics_dataset(30, 100, T);
    auto model = constant_model(T, ds.manifest.channels, ds.manifest.channel_sets);
    model.sampler = ds.manifest.sampler;
    model.stats = ds.manifest.stats;

    auto rep = evaluate_crossplot(model, ds, 5);
    const auto ranges = formation::target_ranges(model.sampler);
    for (int k = 0; k < formation::kNumTargets; ++k) {
        const double mid = 0.5 * (ranges[k][0] + ranges[k][1]);
        for (const auto& bin : rep.bins[k]) {
            CHECK(bin.p10 <= bin.p90);
            if (bin.count > 0) {
                CHECK(bin.p10 == doctest::Approx(mid).epsilon(1e-6));
                CHECK(bin.p90 == doctest::Approx(mid).epsilon(1e-6));
            }
        }
        for (double p : rep.pred[k]) CHECK(p == doctest::Approx(mid).epsilon(1e-6));
    }

    // order statistics do not care about test-split ordering
    auto shuffled = ds;
    std::reverse(shuffled.manifest.test_idx.begin(), shuffled.manifest.test_idx.end());
    auto rep2 = evaluate_crossplot(model, shuffled, 5);
    for (int k = 0; k < formation::kNumTargets; ++k)
        for (std::size_t b = 0; b < rep.bins[k].size(); ++b) {
            CHECK(rep.bins[k][b].p10 == rep2.bins[k][b].p10);
            CHECK(rep.bins[k][b].p90 == rep2.bins[k][b].p90);
        }
    CHECK(rep.mean_abs_err[0] == rep2.mean_abs_err[0]);
}

TEST_CASE("crossplot rejects channel mismatch") {
    const int T = 7;
    auto ds = physics_dataset(20, 200, T);  // M2 + M3
    auto m2only = constant_model(T, 5, {ChannelSet::M2});
    m2only.sampler = ds.manifest.sampler;
    try {
        evaluate_crossplot(m2only, ds);
        CHECK(false);
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("channel mismatch") != std::string::npos);
    }
}

TEST_CASE("crossplot writes plotter-ready files") {
    const int T = 7;
    auto ds = physics_dataset(25, 300, T);
    auto model = constant_model(T, ds.manifest.channels, ds.manifest.channel_sets);
    model.sampler = ds.manifest.sampler;
    model.stats = ds.manifest.stats;
    auto rep = evaluate_crossplot(model, ds, 4);
    const auto dir = fs::temp_directory_path() / "lwdinv_crossplot";
    fs::remove_all(dir);
    write_crossplot(rep, dir);
    CHECK(fs::exists(dir / "scatter_log_rho_h.txt"));
    CHECK(fs::exists(dir / "percentiles_beta.txt"));
    CHECK(fs::exists(dir / "mae.txt"));
    fs::remove_all(dir);
}

TEST_CASE("inversion window arithmetic and channel guards") {
    const int T = 13;
    const auto log = synthetic_log(40, T);
    auto model = constant_model(T, 7, {ChannelSet::M2, ChannelSet::M3});

    const auto res = invert(model, log);
    CHECK(res.predictions.size() == 40 - T + 1);
    CHECK(res.anchor_index.front() == std::size_t(T - 1));
    CHECK(res.anchor_index.back() == 39);
    for (const auto& f : res.predictions) f.validate();  // inside sampling boxes

    // exactly one window
    MeasurementLog one = log;
    one.positions.resize(T);
    one.values.resize(T * one.channels());
    CHECK(invert(model, one).predictions.size() == 1);

    // too short
    MeasurementLog tiny = log;
    tiny.positions.resize(T - 1);
    tiny.values.resize((T - 1) * tiny.channels());
    CHECK_THROWS_AS(invert(model, tiny), ValidationError);

    // missing channels are named
    auto m1model = constant_model(T, 5, {ChannelSet::M1});
    try {
        invert(m1model, log);
        CHECK(false);
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("M1.att") != std::string::npos);
    }
}

TEST_CASE("log file round trip preserves records") {
    const auto log = synthetic_log(18, 13);
    const auto file = fs::temp_directory_path() / "lwdinv_log.txt";
    write_log(log, file);
    const auto back = read_log(file);
    REQUIRE(back.size() == log.size());
    CHECK(back.channel_names == log.channel_names);
    for (std::size_t i = 0; i < log.values.size(); ++i)
        CHECK(back.values[i] == doctest::Approx(log.values[i]).epsilon(1e-7));
    fs::remove(file);

    // malformed header
    {
        std::ofstream bad(file);
        bad << "x y z M2.att\n1 2 3 4\n";
    }
    CHECK_THROWS_AS(read_log(file), SchemaError);
    fs::remove(file);
}

TEST_CASE("misfit: ground-truth predictions give quadrature-level misfit") {
    const int T = 13;
    formation::FormationModel truth;
    truth.rho_h = 2.0;
    truth.rho_v = 7.0;
    truth.rho_u = 30.0;
    truth.rho_l = 10.0;
    truth.d_u = 1.5;
    truth.d_l = 2.5;
    truth.beta_deg = 2.0;
    const auto traj = formation::build_trajectory(89.0, 0.01, 20);

    MeasurementLog log;
    log.channel_names = instrument::channel_names({ChannelSet::M2});
    log.positions = traj.positions;
    // window-anchored measurement: simulate each position against the model
    // anchored at ITS own position, matching what misfit re-simulates
    for (std::size_t i = 0; i < traj.size(); ++i) {
        formation::Trajectory single;
        single.positions = {traj.positions[i]};
        const auto v = instrument::simulate_window(truth, single, {ChannelSet::M2});
        log.values.push_back(v[0]);
        log.values.push_back(v[1]);
    }

    InversionResult inv;
    for (std::size_t i = T - 1; i < traj.size(); ++i) {
        inv.anchor_index.push_back(i);
        inv.predictions.push_back(truth);
    }
    const auto rep = misfit_report(inv, log, {ChannelSet::M2});
    REQUIRE(rep.rms.size() == 2);
    for (double r : rep.rms) {
        CHECK(r >= 0.0);
        CHECK(r < 1e-9);
    }

    // hand-computed RMS on a 3-position subset with perturbed predictions
    InversionResult pert = inv;
    pert.anchor_index.resize(3);
    pert.predictions.resize(3);
    for (auto& f : pert.predictions) f.rho_h *= 1.15;
    const auto rep2 = misfit_report(pert, log, {ChannelSet::M2});
    double hand = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double d = rep2.resimulated[i * 2] - rep2.measured[i * 2];
        hand += d * d;
    }
    hand = std::sqrt(hand / 3.0);
    CHECK(rep2.rms[0] == doctest::Approx(hand).epsilon(1e-12));
    CHECK(rep2.rms[0] > 0.0);

    const auto file = fs::temp_directory_path() / "lwdinv_misfit.txt";
    write_misfit(rep2, file);
    CHECK(fs::exists(file));
    fs::remove(file);
}
