#include "lwdinv/pipeline/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lwdinv/core/binio.hpp"

namespace lwdinv::pipeline {

using dataset::Dataset;
using formation::kNumTargets;
using nlohmann::json;

void NetworkConfig::validate() const {
    if (recurrent_output_size <= 0 || nb_filter <= 0 || pool_length <= 0)
        throw ValidationError("network sizes must be positive");
    const int p3 = pool_length * pool_length * pool_length;
    if (recurrent_output_size % p3 != 0)
        throw ValidationError(
            "recurrent_output_size must be divisible by pool_length^3 (three "
            "pooling stages)");
    if (kernel_size <= 0 || kernel_size % 2 == 0)
        throw ValidationError("kernel size must be odd");
    if (num_outputs <= 0 || t_count <= 0 || channels <= 0)
        throw ValidationError("network input/output sizes must be positive");
    if (batch_size <= 0 || max_epochs <= 0 || patience < 0)
        throw ValidationError("training configuration must be positive");
}

std::vector<nn::LayerSpec> network_specs(const NetworkConfig& cfg) {
    using nn::InitKind;
    using nn::LayerSpec;
    std::vector<LayerSpec> specs;
    specs.push_back(LayerSpec::lstm(cfg.recurrent_output_size));
    specs.push_back(LayerSpec::reshape());
    for (int block = 0; block < 3; ++block) {
        specs.push_back(
            LayerSpec::residual_add(cfg.nb_filter, cfg.kernel_size, InitKind::GlorotNormal));
        specs.push_back(LayerSpec::maxpool(cfg.pool_length));
    }
    specs.push_back(LayerSpec::flatten());
    specs.push_back(LayerSpec::dense(cfg.num_outputs, InitKind::GlorotUniform));
    specs.push_back(LayerSpec::sigmoid());
    return specs;
}

template <typename T>
nn::Network<T> build_network(const NetworkConfig& cfg) {
    cfg.validate();
    return nn::Network<T>({cfg.t_count, cfg.channels}, network_specs(cfg));
}
template nn::Network<float> build_network<float>(const NetworkConfig&);
template nn::Network<double> build_network<double>(const NetworkConfig&);

// ---------------------------------------------------------------------------
// TrainedModel
// ---------------------------------------------------------------------------

const nn::Network<float>& TrainedModel::network() const {
    if (!net_) net_.emplace(build_network<float>(config));
    return *net_;
}

namespace {

void normalize_window(const float* raw, int t_count, int channels,
                      const std::vector<dataset::ChannelStats>& stats, float* out) {
    for (int t = 0; t < t_count; ++t)
        for (int c = 0; c < channels; ++c) {
            const std::size_t k = std::size_t(t) * channels + c;
            out[k] = static_cast<float>((raw[k] - stats[c].mean) / stats[c].stddev);
        }
}

}  // namespace

std::array<double, kNumTargets> TrainedModel::predict(const float* window) const {
    const auto& net = network();
    auto ws = net.make_workspace();
    std::vector<float> norm(std::size_t(config.t_count) * config.channels);
    normalize_window(window, config.t_count, config.channels, stats, norm.data());
    const float* y = net.forward(theta.data(), norm.data(), ws);
    std::array<double, kNumTargets> out{};
    for (int k = 0; k < kNumTargets; ++k) out[k] = y[k];
    return out;
}

double TrainedModel::mean_loss(const Dataset& ds,
                               const std::vector<std::uint32_t>& idx) const {
    if (idx.empty()) throw ValidationError("loss over an empty split");
    const auto& net = network();
    std::vector<double> losses(idx.size());
#pragma omp parallel
    {
        auto ws = net.make_workspace();
        std::vector<float> norm(std::size_t(config.t_count) * config.channels);
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(idx.size()); ++i) {
            normalize_window(ds.feature_row(idx[i]), config.t_count, config.channels,
                             stats, norm.data());
            const float* y = net.forward(theta.data(), norm.data(), ws);
            losses[i] = nn::l2_loss(y, ds.target_row(idx[i]), kNumTargets);
        }
    }
    double sum = 0.0;  // fixed-order reduction
    for (double v : losses) sum += v;
    return sum / static_cast<double>(idx.size());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainedModel train(const NetworkConfig& cfg_in, const Dataset& ds,
                   const TrainOptions& opts) {
    NetworkConfig cfg = cfg_in;
    if (cfg.channels == 0) cfg.channels = ds.manifest.channels;
    if (cfg.t_count != ds.manifest.t_count || cfg.channels != ds.manifest.channels)
        throw ValidationError("network input shape does not match the dataset");
    cfg.validate();
    if (ds.manifest.train_idx.empty() || ds.manifest.val_idx.empty())
        throw ValidationError("training needs nonempty train and validation splits");

    TrainedModel model;
    model.config = cfg;
    model.channel_sets = ds.manifest.channel_sets;
    model.channel_names = ds.manifest.channel_names;
    model.stats = ds.manifest.stats;
    model.sampler = ds.manifest.sampler;
    model.train_seed = opts.seed;

    const nn::Network<float> net = build_network<float>(cfg);
    std::vector<float> theta;
    net.init_params(theta, Rng(opts.seed, 0x1417));
    model.theta = theta;

    const std::size_t np = net.param_count();
    nn::AdamOptimizer<float> adam(cfg.adam, np);
    nn::SgdOptimizer<float> sgd(cfg.sgd, np);

    const auto& train_idx = ds.manifest.train_idx;
    std::vector<std::uint32_t> order(train_idx);

    const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
    const int tc = cfg.t_count, cc = cfg.channels;

    // per-sample gradient buffers so the reduction order is fixed
    const int max_batch = cfg.batch_size;
    std::vector<std::vector<float>> sample_grad(max_batch, std::vector<float>(np));
    std::vector<float> grad(np);
    std::vector<double> sample_loss(max_batch);

    std::vector<std::unique_ptr<nn::Network<float>::Workspace>> wss(threads);
    for (auto& w : wss) w = std::make_unique<nn::Network<float>::Workspace>(net.make_workspace());

    model.history.push_back({0.0, model.mean_loss(ds, ds.manifest.val_idx)});
    double best_val = model.history[0].val_loss;
    std::vector<float> best_theta = theta;
    int bad_epochs = 0;

    Rng shuffle_root(opts.seed, 0x5481);
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.lr_decay_every > 0 && cfg.lr_decay != 1.0) {
            const double f = std::pow(cfg.lr_decay, (epoch - 1) / cfg.lr_decay_every);
            adam.set_lr(cfg.adam.lr * f);
            sgd.set_lr(cfg.sgd.lr * f);
        }
        Rng srng = shuffle_root.stream(epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[srng.next_u64() % i]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const int bn = static_cast<int>(
                std::min<std::size_t>(cfg.batch_size, order.size() - start));
#pragma omp parallel for schedule(static) num_threads(threads)
            for (int b = 0; b < bn; ++b) {
                auto& ws = *wss[omp_get_thread_num()];
                std::fill(sample_grad[b].begin(), sample_grad[b].end(), 0.0f);
                std::vector<float> norm(std::size_t(tc) * cc);
                const std::uint32_t idx = order[start + b];
                normalize_window(ds.feature_row(idx), tc, cc, model.stats, norm.data());
                const float* y = net.forward(theta.data(), norm.data(), ws);
                float dy[kNumTargets];
                sample_loss[b] = nn::l2_loss(y, ds.target_row(idx), kNumTargets, dy);
                net.backward(theta.data(), dy, ws, sample_grad[b].data());
            }
            std::fill(grad.begin(), grad.end(), 0.0f);
            double batch_loss = 0.0;
            for (int b = 0; b < bn; ++b) {  // fixed-order reduction
                const float* g = sample_grad[b].data();
                for (std::size_t k = 0; k < np; ++k) grad[k] += g[k];
                batch_loss += sample_loss[b];
            }
            const float inv = 1.0f / static_cast<float>(bn);
            for (std::size_t k = 0; k < np; ++k) grad[k] *= inv;
            batch_loss /= bn;
            if (!std::isfinite(batch_loss))
                throw DivergenceError("non-finite loss in batch " +
                                      std::to_string(batches) + " of epoch " +
                                      std::to_string(epoch));
            if (cfg.use_sgd)
                sgd.step(theta.data(), grad.data());
            else
                adam.step(theta.data(), grad.data());
            epoch_loss += batch_loss;
            ++batches;
        }

        model.theta = theta;
        const double val = model.mean_loss(ds, ds.manifest.val_idx);
        model.history.push_back({epoch_loss / static_cast<double>(batches), val});
        if (opts.verbose)
            std::fprintf(stderr, "epoch %3d  train %.5f  val %.5f\n", epoch,
                         model.history.back().train_loss, val);
        if (val < best_val) {
            best_val = val;
            best_theta = theta;
            model.best_epoch = epoch;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs > cfg.patience) break;
        }
        if (opts.stop_at_train_loss > 0.0 &&
            model.history.back().train_loss < opts.stop_at_train_loss) {
            best_theta = theta;  // memorization run: keep the final parameters
            model.best_epoch = epoch;
            break;
        }
    }
    model.theta = std::move(best_theta);
    return model;
}

// ---------------------------------------------------------------------------
// Crossplot
// ---------------------------------------------------------------------------

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double rank = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = rank - static_cast<double>(lo);
    return values[lo] * (1.0 - w) + values[hi] * w;
}

CrossplotReport evaluate_crossplot(const TrainedModel& model, const Dataset& ds,
                                   int n_bins) {
    if (ds.manifest.test_idx.empty()) throw ValidationError("empty test split");
    if (model.channel_sets != ds.manifest.channel_sets ||
        model.channel_names != ds.manifest.channel_names) {
        std::string msg = "channel mismatch between model [";
        for (const auto& n : model.channel_names) msg += n + " ";
        msg += "] and dataset [";
        for (const auto& n : ds.manifest.channel_names) msg += n + " ";
        msg += "]";
        throw ValidationError(msg);
    }
    const auto ranges = formation::target_ranges(model.sampler);
    (void)model.network();  // primed before the parallel region
    const auto& idx = ds.manifest.test_idx;
    CrossplotReport rep;
    for (int k = 0; k < kNumTargets; ++k) {
        rep.truth[k].resize(idx.size());
        rep.pred[k].resize(idx.size());
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(idx.size()); ++i) {
        const auto scaled = model.predict(ds.feature_row(idx[i]));
        const auto raw = ds.raw_targets(idx[i]);
        for (int k = 0; k < kNumTargets; ++k) {
            rep.truth[k][i] = raw[k];
            rep.pred[k][i] = ranges[k][0] + scaled[k] * (ranges[k][1] - ranges[k][0]);
        }
    }

    for (int k = 0; k < kNumTargets; ++k) {
        double mae = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i)
            mae += std::abs(rep.pred[k][i] - rep.truth[k][i]);
        rep.mean_abs_err[k] = mae / static_cast<double>(idx.size());

        const double lo = ranges[k][0], hi = ranges[k][1];
        const double w = (hi - lo) / n_bins;
        std::vector<std::vector<double>> in_bin(n_bins);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            int b = static_cast<int>((rep.truth[k][i] - lo) / w);
            b = std::clamp(b, 0, n_bins - 1);
            in_bin[b].push_back(rep.pred[k][i]);
        }
        for (int b = 0; b < n_bins; ++b) {
            CrossplotBin bin;
            bin.lo = lo + b * w;
            bin.hi = lo + (b + 1) * w;
            bin.count = in_bin[b].size();
            if (!in_bin[b].empty()) {
                bin.p10 = percentile(in_bin[b], 0.10);
                bin.p90 = percentile(in_bin[b], 0.90);
            }
            rep.bins[k].push_back(bin);
        }
        // merge starved bins into their left neighbor (first bin merges right)
        auto& bins = rep.bins[k];
        for (std::size_t b = 0; b < bins.size();) {
            if (bins[b].count >= 2 || bins.size() == 1) {
                ++b;
                continue;
            }
            const std::size_t into = (b == 0) ? 1 : b - 1;
            std::vector<double> merged;
            const std::size_t lo_b = std::min(b, into), hi_b = std::max(b, into);
            // recollect predictions for the merged range
            for (std::size_t i = 0; i < idx.size(); ++i)
                if (rep.truth[k][i] >= bins[lo_b].lo && rep.truth[k][i] < bins[hi_b].hi)
                    merged.push_back(rep.pred[k][i]);
            bins[into].lo = std::min(bins[into].lo, bins[b].lo);
            bins[into].hi = std::max(bins[into].hi, bins[b].hi);
            bins[into].count += bins[b].count;
            bins[into].merged = true;
            if (!merged.empty()) {
                bins[into].p10 = percentile(merged, 0.10);
                bins[into].p90 = percentile(merged, 0.90);
            }
            bins.erase(bins.begin() + b);
            if (b > 0) --b;
        }
    }
    return rep;
}

void write_crossplot(const CrossplotReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (int k = 0; k < kNumTargets; ++k) {
        const std::string name = formation::kTargetNames[k];
        {
            std::ofstream out(dir / ("scatter_" + name + ".txt"));
            out << "# truth prediction (identity line is y = x)\n";
            for (std::size_t i = 0; i < rep.truth[k].size(); ++i)
                out << rep.truth[k][i] << ' ' << rep.pred[k][i] << '\n';
        }
        {
            std::ofstream out(dir / ("percentiles_" + name + ".txt"));
            out << "# bin_lo bin_hi count p10 p90 merged\n";
            for (const auto& b : rep.bins[k])
                out << b.lo << ' ' << b.hi << ' ' << b.count << ' ' << b.p10 << ' '
                    << b.p90 << ' ' << (b.merged ? 1 : 0) << '\n';
        }
    }
    std::ofstream out(dir / "mae.txt");
    out << "# parameter mean_abs_err\n";
    for (int k = 0; k < kNumTargets; ++k)
        out << formation::kTargetNames[k] << ' ' << rep.mean_abs_err[k] << '\n';
}

// ---------------------------------------------------------------------------
// Measurement logs and inversion
// ---------------------------------------------------------------------------

MeasurementLog read_log(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open log file: " + file.string());
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::vector<std::string> cols;
    std::string tok;
    while (hs >> tok)
        if (tok != "#") cols.push_back(tok);
    const std::vector<std::string> traj_cols = {"h", "tvd", "dip"};
    if (cols.size() < 4 || cols[0] != "h" || cols[1] != "tvd" || cols[2] != "dip")
        throw SchemaError("log header must start with 'h tvd dip' (line 1 of " +
                          file.string() + ")");
    MeasurementLog log;
    log.channel_names.assign(cols.begin() + 3, cols.end());
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        formation::TrajectoryPoint p{};
        if (!(ls >> p.horizontal >> p.tvd >> p.dip_deg))
            throw SchemaError("malformed trajectory columns at line " +
                              std::to_string(line_no) + " of " + file.string());
        log.positions.push_back(p);
        for (std::size_t c = 0; c < log.channel_names.size(); ++c) {
            double v;
            if (!(ls >> v))
                throw SchemaError("missing channel value at line " +
                                  std::to_string(line_no) + " of " + file.string());
            log.values.push_back(v);
        }
    }
    if (log.positions.empty()) throw SchemaError("log has no records: " + file.string());
    return log;
}

void write_log(const MeasurementLog& log, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write log file: " + file.string());
    out << "h tvd dip";
    for (const auto& c : log.channel_names) out << ' ' << c;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < log.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", log.positions[i].horizontal);
        out << buf;
        std::snprintf(buf, sizeof buf, " %.9g", log.positions[i].tvd);
        out << buf;
        std::snprintf(buf, sizeof buf, " %.9g", log.positions[i].dip_deg);
        out << buf;
        for (int c = 0; c < log.channels(); ++c) {
            std::snprintf(buf, sizeof buf, " %.9g", log.values[i * log.channels() + c]);
            out << buf;
        }
        out << '\n';
    }
}

InversionResult invert(const TrainedModel& model, const MeasurementLog& log,
                       int threads) {
    const int tc = model.config.t_count;
    const int cc = model.config.channels;
    if (static_cast<int>(log.size()) < tc)
        throw ValidationError("log shorter than one window (" +
                              std::to_string(log.size()) + " < " + std::to_string(tc) +
                              ")");
    // model channels = measurement channels + 3 trajectory columns
    std::vector<std::string> want(model.channel_names.begin(),
                                  model.channel_names.end() - 3);
    std::vector<int> col_of;
    std::string missing;
    for (const auto& name : want) {
        const auto it =
            std::find(log.channel_names.begin(), log.channel_names.end(), name);
        if (it == log.channel_names.end())
            missing += missing.empty() ? name : (", " + name);
        else
            col_of.push_back(static_cast<int>(it - log.channel_names.begin()));
    }
    if (!missing.empty())
        throw ValidationError("log is missing channels required by the model: " +
                              missing);

    const std::size_t n_windows = log.size() - tc + 1;
    (void)model.network();  // primed before the parallel region
    InversionResult res;
    res.anchor_index.resize(n_windows);
    res.predictions.resize(n_windows);
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel num_threads(nthreads)
    {
        std::vector<float> window(std::size_t(tc) * cc);
#pragma omp for schedule(static)
        for (std::int64_t w = 0; w < static_cast<std::int64_t>(n_windows); ++w) {
            const auto& origin = log.positions[w];
            for (int t = 0; t < tc; ++t) {
                const std::size_t pos = w + t;
                for (std::size_t c = 0; c < col_of.size(); ++c)
                    window[std::size_t(t) * cc + c] = static_cast<float>(
                        log.values[pos * log.channels() + col_of[c]]);
                window[std::size_t(t) * cc + col_of.size() + 0] =
                    static_cast<float>(log.positions[pos].horizontal - origin.horizontal);
                window[std::size_t(t) * cc + col_of.size() + 1] =
                    static_cast<float>(log.positions[pos].tvd - origin.tvd);
                window[std::size_t(t) * cc + col_of.size() + 2] =
                    static_cast<float>(log.positions[pos].dip_deg);
            }
            const auto scaled = model.predict(window.data());
            res.anchor_index[w] = w + tc - 1;
            res.predictions[w] = dataset::unscale_targets(scaled, model.sampler);
        }
    }
    return res;
}

MisfitReport misfit_report(const InversionResult& inv, const MeasurementLog& log,
                           const std::vector<instrument::ChannelSet>& sets,
                           int threads, const em::QuadratureConfig& quad) {
    if (inv.predictions.empty()) throw ValidationError("no predictions to re-simulate");
    MisfitReport rep;
    rep.channel_names = instrument::channel_names(sets);
    std::vector<int> col_of;
    for (const auto& name : rep.channel_names) {
        const auto it =
            std::find(log.channel_names.begin(), log.channel_names.end(), name);
        if (it == log.channel_names.end())
            throw ValidationError("log lacks channel " + name + " for the misfit report");
        col_of.push_back(static_cast<int>(it - log.channel_names.begin()));
    }
    const int nc = static_cast<int>(rep.channel_names.size());
    const std::size_t n = inv.predictions.size();
    rep.position = inv.anchor_index;
    rep.measured.resize(n * nc);
    rep.resimulated.resize(n * nc);

    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic, 4) num_threads(nthreads)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const std::size_t pos = inv.anchor_index[i];
        const auto& pt = log.positions[pos];
        try {
            formation::Trajectory single;
            single.positions = {pt};
            const auto sim =
                instrument::simulate_window(inv.predictions[i], single, sets, quad);
            for (int c = 0; c < nc; ++c) {
                rep.resimulated[i * nc + c] = sim[c];
                rep.measured[i * nc + c] = log.values[pos * log.channels() + col_of[c]];
            }
        } catch (const std::exception& e) {
            errors[i] = "position " + std::to_string(pos) + ": " + e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw NumericalError("misfit re-simulation failed at " + e);

    rep.rms.assign(nc, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < nc; ++c) {
            const double d = rep.resimulated[i * nc + c] - rep.measured[i * nc + c];
            rep.rms[c] += d * d;
        }
    for (int c = 0; c < nc; ++c) rep.rms[c] = std::sqrt(rep.rms[c] / n);
    return rep;
}

void write_misfit(const MisfitReport& rep, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write misfit report: " + file.string());
    out << "# position";
    for (const auto& c : rep.channel_names) out << " measured." << c << " resim." << c;
    out << "\n# rms";
    for (std::size_t c = 0; c < rep.rms.size(); ++c) out << ' ' << rep.rms[c];
    out << '\n';
    const int nc = static_cast<int>(rep.channel_names.size());
    for (std::size_t i = 0; i < rep.position.size(); ++i) {
        out << rep.position[i];
        for (int c = 0; c < nc; ++c)
            out << ' ' << rep.measured[i * nc + c] << ' ' << rep.resimulated[i * nc + c];
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Model serialization
// ---------------------------------------------------------------------------

void save_model(const TrainedModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::uint32_t crc = write_f32_file(dir / "params.bin", model.theta);
    json j;
    j["schema_version"] = 1;
    j["toolkit_version"] = dataset::kToolkitVersion;
    j["config"] = {{"recurrent_output_size", model.config.recurrent_output_size},
                   {"nb_filter", model.config.nb_filter},
                   {"pool_length", model.config.pool_length},
                   {"kernel_size", model.config.kernel_size},
                   {"num_outputs", model.config.num_outputs},
                   {"t_count", model.config.t_count},
                   {"channels", model.config.channels},
                   {"batch_size", model.config.batch_size},
                   {"max_epochs", model.config.max_epochs},
                   {"patience", model.config.patience},
                   {"use_sgd", model.config.use_sgd},
                   {"adam_lr", model.config.adam.lr},
                   {"sgd_lr", model.config.sgd.lr}};
    std::vector<int> sets;
    for (auto s : model.channel_sets) sets.push_back(static_cast<int>(s));
    j["channel_sets"] = sets;
    j["channel_names"] = model.channel_names;
    json stats = json::array();
    for (const auto& s : model.stats)
        stats.push_back({{"mean", s.mean}, {"std", s.stddev}});
    j["stats"] = stats;
    j["sampler"] = {{"seed", model.sampler.seed},
                    {"t_count", model.sampler.t_count},
                    {"step", model.sampler.step}};
    j["train_seed"] = model.train_seed;
    j["best_epoch"] = model.best_epoch;
    json hist = json::array();
    for (const auto& h : model.history)
        hist.push_back({{"train", h.train_loss}, {"val", h.val_loss}});
    j["history"] = hist;
    j["params_crc"] = Crc32::hex(crc);
    j["architecture"] = nn::Network<float>({model.config.t_count, model.config.channels},
                                           network_specs(model.config))
                            .describe();
    std::ofstream out(dir / "model.json");
    if (!out) throw IoError("cannot write model.json in " + dir.string());
    out << j.dump(2) << "\n";
}

TrainedModel load_model(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json");
    if (!in) throw IoError("missing model.json in " + dir.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError("malformed model.json: " + std::string(e.what()));
    }
    const int ver = j.value("schema_version", -1);
    if (ver != 1)
        throw SchemaError("unsupported model schema version " + std::to_string(ver));
    TrainedModel m;
    const auto& c = j.at("config");
    m.config.recurrent_output_size = c.at("recurrent_output_size").get<int>();
    m.config.nb_filter = c.at("nb_filter").get<int>();
    m.config.pool_length = c.at("pool_length").get<int>();
    m.config.kernel_size = c.at("kernel_size").get<int>();
    m.config.num_outputs = c.at("num_outputs").get<int>();
    m.config.t_count = c.at("t_count").get<int>();
    m.config.channels = c.at("channels").get<int>();
    m.config.batch_size = c.at("batch_size").get<int>();
    m.config.max_epochs = c.at("max_epochs").get<int>();
    m.config.patience = c.at("patience").get<int>();
    m.config.use_sgd = c.at("use_sgd").get<bool>();
    m.config.adam.lr = c.at("adam_lr").get<double>();
    m.config.sgd.lr = c.at("sgd_lr").get<double>();
    for (int s : j.at("channel_sets").get<std::vector<int>>())
        m.channel_sets.push_back(static_cast<instrument::ChannelSet>(s));
    m.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    for (const auto& s : j.at("stats"))
        m.stats.push_back({s.at("mean").get<double>(), s.at("std").get<double>()});
    m.sampler.seed = j.at("sampler").at("seed").get<std::uint64_t>();
    m.sampler.t_count = j.at("sampler").at("t_count").get<int>();
    m.sampler.step = j.at("sampler").at("step").get<double>();
    m.train_seed = j.at("train_seed").get<std::uint64_t>();
    m.best_epoch = j.at("best_epoch").get<int>();
    for (const auto& h : j.at("history"))
        m.history.push_back({h.at("train").get<double>(), h.at("val").get<double>()});
    const std::uint32_t crc =
        std::stoul(j.at("params_crc").get<std::string>(), nullptr, 16);
    const std::size_t np = build_network<float>(m.config).param_count();
    m.theta = read_f32_file(dir / "params.bin", np, crc);
    return m;
}

}  // namespace lwdinv::pipeline
