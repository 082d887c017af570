// Command-line surface of the toolkit: forward simulation, dataset
// generation, training, evaluation, inversion and crossplot export, all
// driven by JSON config files with dotted-path overrides.
//
// Exit codes: 0 success, 1 usage, 2 validation/input error, 3 numerical
// failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lwdinv/core/checksum.hpp"
#include "lwdinv/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lwdinv;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw SchemaError("malformed config " + path + ": " + e.what());
    }
}

// "a.b.c=value" with the value parsed as JSON when possible.
void apply_override(json& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw ValidationError("override must look like path.to.key=value: " + kv);
    std::string path = "/" + kv.substr(0, eq);
    for (auto& c : path)
        if (c == '.') c = '/';
    const std::string raw = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;  // plain string
    }
    cfg[json::json_pointer(path)] = value;
}

int resolve_threads(int cli_threads) {
    if (cli_threads > 0) return cli_threads;
    if (const char* env = std::getenv("LWDINV_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 0;  // library default
}

std::vector<instrument::ChannelSet> parse_sets(const json& cfg, const char* key,
                                               const std::string& fallback) {
    std::vector<std::string> names;
    if (cfg.contains(key))
        names = cfg.at(key).get<std::vector<std::string>>();
    else
        for (std::size_t i = 0; i < fallback.size(); i += 2)
            names.push_back(fallback.substr(i, 2));
    std::vector<instrument::ChannelSet> sets;
    for (const auto& n : names) {
        if (n == "M1")
            sets.push_back(instrument::ChannelSet::M1);
        else if (n == "M2")
            sets.push_back(instrument::ChannelSet::M2);
        else if (n == "M3")
            sets.push_back(instrument::ChannelSet::M3);
        else
            throw ValidationError("unknown channel set '" + n + "' (use M1/M2/M3)");
    }
    return sets;
}

// Artifact-dir contract: resolved config snapshot plus checksums of every
// produced file, enough to reproduce the run bit-exactly.
void finalize_artifact_dir(const fs::path& dir, const json& resolved) {
    {
        std::ofstream out(dir / "resolved_config.json");
        out << resolved.dump(2) << "\n";
    }
    std::ofstream sums(dir / "checksums.txt");
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "checksums.txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        Crc32 crc;
        char buf[65536];
        while (in.read(buf, sizeof buf) || in.gcount() > 0)
            crc.update(buf, static_cast<std::size_t>(in.gcount()));
        sums << Crc32::hex(crc.value()) << "  " << fs::relative(f, dir).string() << "\n";
    }
}

json base_resolved(const std::string& command, const json& cfg) {
    json r;
    r["command"] = command;
    r["toolkit_version"] = dataset::kToolkitVersion;
    r["config"] = cfg;
    return r;
}

// Removes a partially written artifact directory when a command fails,
// but only if this run created it.
struct ArtifactGuard {
    fs::path dir;
    bool created = false;
    bool committed = false;
    explicit ArtifactGuard(const fs::path& d) : dir(d) {
        created = !fs::exists(d);
        fs::create_directories(d);
    }
    void commit() { committed = true; }
    ~ArtifactGuard() {
        if (!committed && created) {
            std::error_code ec;
            fs::remove_all(dir, ec);
        }
    }
};

em::LayeredMedium formation_from_json(const json& j, double* beta_out) {
    em::LayeredMedium med;
    if (!j.contains("layers") || !j.at("layers").is_array())
        throw SchemaError("formation file needs a 'layers' array");
    for (const auto& l : j.at("layers")) {
        em::MediumProperties m;
        m.rho_h = l.at("rho_h").get<double>();
        m.rho_v = l.value("rho_v", m.rho_h);
        med.layers.push_back(m);
    }
    med.boundaries = j.value("boundaries_tvd", std::vector<double>{});
    *beta_out = j.value("beta_deg", 0.0);
    med.validate();
    return med;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_forward(const json& cfg, int threads) {
    const std::string formation_path = cfg.at("formation").get<std::string>();
    std::ifstream fin(formation_path);
    if (!fin) throw IoError("missing input file: " + formation_path);
    json fj;
    try {
        fin >> fj;
    } catch (const json::exception& e) {
        throw SchemaError("malformed formation file " + formation_path + ": " + e.what());
    }
    double beta = 0.0;
    const auto med = formation_from_json(fj, &beta);

    std::vector<formation::TrajectoryPoint> positions;
    if (cfg.contains("trajectory_file")) {
        const auto log = pipeline::read_log(cfg.at("trajectory_file").get<std::string>());
        positions = log.positions;
    } else {
        const auto& tj = cfg.at("trajectory");
        auto tr = formation::build_trajectory(
            tj.at("alpha_ini").get<double>(), tj.value("alpha_v", 0.0),
            tj.at("t_count").get<int>(), tj.value("step", 0.3048));
        positions = tr.positions;
        if (tj.contains("tvd_offset"))
            for (auto& p : positions) p.tvd += tj.at("tvd_offset").get<double>();
    }

    const auto sets = parse_sets(cfg, "channel_sets", "M1M2M3");
    const auto values =
        instrument::simulate_log_global(med, beta, positions, sets, threads);

    pipeline::MeasurementLog log;
    log.channel_names = instrument::channel_names(sets);
    log.positions = positions;
    log.values = values;

    const fs::path out_dir = cfg.at("output").get<std::string>();
    ArtifactGuard guard(out_dir);
    pipeline::write_log(log, out_dir / "log.txt");
    finalize_artifact_dir(out_dir, base_resolved("forward", cfg));
    guard.commit();
    std::cout << "{\"log\": \"" << (out_dir / "log.txt").string()
              << "\", \"positions\": " << positions.size() << "}\n";
    return 0;
}

int cmd_generate(const json& cfg, int threads) {
    formation::SamplerConfig scfg;
    scfg.seed = cfg.value("seed", 0ull);
    scfg.t_count = cfg.value("t_count", 65);
    const auto sets = parse_sets(cfg, "channel_sets", "M1M2M3");
    dataset::GenerateOptions opts;
    opts.threads = threads;
    auto ds = dataset::generate(cfg.at("n").get<std::size_t>(), scfg, sets, opts);
    const double tr = cfg.value("train_frac", 0.8);
    const double va = cfg.value("val_frac", 0.1);
    const double te = cfg.value("test_frac", 0.1);
    ds.assign_split(tr, va, te, cfg.value("split_seed", scfg.seed + 1));

    const fs::path out_dir = cfg.at("output").get<std::string>();
    ArtifactGuard guard(out_dir);
    dataset::save(ds, out_dir);
    if (cfg.value("export_text", false))
        dataset::export_text(ds, out_dir / "dataset.txt");
    json resolved = base_resolved("generate", cfg);
    resolved["seed"] = scfg.seed;
    resolved["samples"] = ds.size();
    resolved["skipped"] = ds.manifest.skipped;
    finalize_artifact_dir(out_dir, resolved);
    guard.commit();
    std::cout << "{\"samples\": " << ds.size() << ", \"skipped\": "
              << ds.manifest.skipped << ", \"dir\": \"" << out_dir.string() << "\"}\n";
    return 0;
}

int cmd_train(const json& cfg, int threads) {
    auto ds = dataset::load(cfg.at("dataset").get<std::string>());
    if (cfg.contains("channel_sets")) {
        const auto sets = parse_sets(cfg, "channel_sets", "");
        if (sets != ds.manifest.channel_sets) ds = ds.select_channels(sets);
    }
    pipeline::NetworkConfig ncfg;
    ncfg.t_count = ds.manifest.t_count;
    if (cfg.contains("network")) {
        const auto& nj = cfg.at("network");
        ncfg.recurrent_output_size = nj.value("recurrent_output_size", 64);
        ncfg.nb_filter = nj.value("nb_filter", 32);
        ncfg.pool_length = nj.value("pool_length", 2);
        ncfg.kernel_size = nj.value("kernel_size", 3);
        ncfg.batch_size = nj.value("batch_size", 128);
        ncfg.max_epochs = nj.value("max_epochs", 60);
        ncfg.patience = nj.value("patience", 5);
        ncfg.adam.lr = nj.value("learning_rate", 1e-3);
        ncfg.use_sgd = nj.value("use_sgd", false);
        ncfg.sgd.lr = nj.value("learning_rate", 1e-2);
    }
    pipeline::TrainOptions topt;
    topt.seed = cfg.value("seed", 0ull);
    topt.threads = threads;
    topt.verbose = cfg.value("verbose", false);
    const auto model = pipeline::train(ncfg, ds, topt);

    const fs::path out_dir = cfg.at("output").get<std::string>();
    ArtifactGuard guard(out_dir);
    pipeline::save_model(model, out_dir);
    json resolved = base_resolved("train", cfg);
    resolved["seed"] = topt.seed;
    resolved["best_epoch"] = model.best_epoch;
    resolved["best_val_loss"] = model.history[model.best_epoch].val_loss;
    finalize_artifact_dir(out_dir, resolved);
    guard.commit();
    std::cout << "{\"best_epoch\": " << model.best_epoch << ", \"val_loss\": "
              << model.history[model.best_epoch].val_loss << ", \"dir\": \""
              << out_dir.string() << "\"}\n";
    return 0;
}

int run_evaluate(const json& cfg, bool export_only) {
    const auto model = pipeline::load_model(cfg.at("model").get<std::string>());
    const auto ds = dataset::load(cfg.at("dataset").get<std::string>());
    const int bins = cfg.value("bins", 20);
    const auto rep = pipeline::evaluate_crossplot(model, ds, bins);

    const fs::path out_dir = cfg.at("output").get<std::string>();
    ArtifactGuard guard(out_dir);
    pipeline::write_crossplot(rep, out_dir);
    json resolved = base_resolved(export_only ? "crossplot-export" : "evaluate", cfg);
    if (!export_only) {
        json mae;
        for (int k = 0; k < formation::kNumTargets; ++k)
            mae[formation::kTargetNames[k]] = rep.mean_abs_err[k];
        resolved["mean_abs_err"] = mae;
        std::ofstream summary(out_dir / "summary.json");
        summary << mae.dump(2) << "\n";
    }
    finalize_artifact_dir(out_dir, resolved);
    guard.commit();
    std::cout << "{\"test_samples\": " << rep.truth[0].size() << ", \"dir\": \""
              << out_dir.string() << "\"}\n";
    return 0;
}

int cmd_invert(const json& cfg, int threads) {
    const auto model = pipeline::load_model(cfg.at("model").get<std::string>());
    const auto log = pipeline::read_log(cfg.at("log").get<std::string>());
    const auto res = pipeline::invert(model, log, threads);

    const fs::path out_dir = cfg.at("output").get<std::string>();
    ArtifactGuard guard(out_dir);
    {
        std::ofstream out(out_dir / "predictions.txt");
        out << "# position h tvd";
        for (int k = 0; k < formation::kNumTargets; ++k)
            out << ' ' << formation::kTargetNames[k];
        out << '\n';
        for (std::size_t i = 0; i < res.predictions.size(); ++i) {
            const auto& p = log.positions[res.anchor_index[i]];
            out << res.anchor_index[i] << ' ' << p.horizontal << ' ' << p.tvd;
            const auto lp = formation::to_log_params(res.predictions[i]);
            for (int k = 0; k < formation::kNumTargets; ++k) out << ' ' << lp[k];
            out << '\n';
        }
    }
    json resolved = base_resolved("invert", cfg);
    resolved["predictions"] = res.predictions.size();
    if (cfg.value("misfit", true)) {
        const auto rep =
            pipeline::misfit_report(res, log, model.channel_sets, threads);
        pipeline::write_misfit(rep, out_dir / "misfit.txt");
        json rms;
        for (std::size_t c = 0; c < rep.channel_names.size(); ++c)
            rms[rep.channel_names[c]] = rep.rms[c];
        resolved["rms_misfit"] = rms;
    }
    finalize_artifact_dir(out_dir, resolved);
    guard.commit();
    std::cout << "{\"predictions\": " << res.predictions.size() << ", \"dir\": \""
              << out_dir.string() << "\"}\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1D layered-formation resistivity modeling and inversion toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    int threads = 0;
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("-s,--set", overrides, "override config fields, path.to.key=value");
    app.add_option("-t,--threads", threads,
                   "worker threads (default: LWDINV_THREADS or all cores)");

    auto* c_forward = app.add_subcommand("forward", "simulate measurement logs");
    auto* c_generate = app.add_subcommand("generate", "build a synthetic dataset");
    auto* c_train = app.add_subcommand("train", "train an inversion model");
    auto* c_evaluate = app.add_subcommand("evaluate", "test-split crossplot report");
    auto* c_invert = app.add_subcommand("invert", "sliding-window log inversion");
    auto* c_export = app.add_subcommand("crossplot-export",
                                        "emit crossplot files without a summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        json cfg = load_config(config_path);
        for (const auto& kv : overrides) apply_override(cfg, kv);
        const int nthreads = resolve_threads(threads);
        if (c_forward->parsed()) return cmd_forward(cfg, nthreads);
        if (c_generate->parsed()) return cmd_generate(cfg, nthreads);
        if (c_train->parsed()) return cmd_train(cfg, nthreads);
        if (c_evaluate->parsed()) return run_evaluate(cfg, false);
        if (c_export->parsed()) return run_evaluate(cfg, true);
        if (c_invert->parsed()) return cmd_invert(cfg, nthreads);
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: config field problem: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 3;
    }
}
