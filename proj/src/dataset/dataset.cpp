#include "lwdinv/dataset/dataset.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lwdinv/core/binio.hpp"
#include "lwdinv/core/rng.hpp"

namespace lwdinv::dataset {

using formation::kNumTargets;
using nlohmann::json;

std::array<double, kNumTargets> scale_targets(const formation::FormationModel& f,
                                              const formation::SamplerConfig& cfg) {
    const auto p = formation::to_log_params(f);
    const auto ranges = formation::target_ranges(cfg);
    std::array<double, kNumTargets> out{};
    for (int k = 0; k < kNumTargets; ++k) {
        const double lo = ranges[k][0], hi = ranges[k][1];
        if (p[k] < lo - 1e-9 || p[k] > hi + 1e-9)
            throw RangeError(std::string("parameter ") + formation::kTargetNames[k] +
                             " = " + std::to_string(p[k]) + " outside sampling range [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "]");
        out[k] = (p[k] - lo) / (hi - lo);
    }
    return out;
}

formation::FormationModel unscale_targets(const std::array<double, kNumTargets>& v,
                                          const formation::SamplerConfig& cfg) {
    const auto ranges = formation::target_ranges(cfg);
    std::array<double, kNumTargets> p{};
    for (int k = 0; k < kNumTargets; ++k) {
        if (v[k] < -1e-9 || v[k] > 1.0 + 1e-9)
            throw RangeError(std::string("scaled parameter ") +
                             formation::kTargetNames[k] + " = " + std::to_string(v[k]) +
                             " outside [0,1]");
        p[k] = ranges[k][0] + v[k] * (ranges[k][1] - ranges[k][0]);
    }
    return formation::from_log_params(p);
}

std::array<double, kNumTargets> Dataset::raw_targets(std::size_t i) const {
    const auto ranges = formation::target_ranges(manifest.sampler);
    std::array<double, kNumTargets> out{};
    for (int k = 0; k < kNumTargets; ++k)
        out[k] = ranges[k][0] + target_row(i)[k] * (ranges[k][1] - ranges[k][0]);
    return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, double train_frac,
                                       double val_frac, double test_frac) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw ValidationError("split fractions must sum to 1");
    if (n < 3) throw ValidationError("need at least 3 samples to split");
    const auto n_val = static_cast<std::size_t>(std::floor(val_frac * n));
    const auto n_test = static_cast<std::size_t>(std::floor(test_frac * n));
    return {n - n_val - n_test, n_val, n_test};
}

void Dataset::assign_split(double train_frac, double val_frac, double test_frac,
                           std::uint64_t split_seed) {
    const auto sizes = split_sizes(size(), train_frac, val_frac, test_frac);
    std::vector<std::uint32_t> order(size());
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(split_seed, 0x5eedu);
    for (std::size_t i = size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.next_u64() % i]);
    manifest.split_seed = split_seed;
    manifest.train_idx.assign(order.begin(), order.begin() + sizes[0]);
    manifest.val_idx.assign(order.begin() + sizes[0], order.begin() + sizes[0] + sizes[1]);
    manifest.test_idx.assign(order.begin() + sizes[0] + sizes[1], order.end());
    recompute_stats_();
}

Dataset Dataset::select_channels(const std::vector<instrument::ChannelSet>& sets) const {
    std::vector<instrument::ChannelSet> want(sets);
    std::sort(want.begin(), want.end());
    want.erase(std::unique(want.begin(), want.end()), want.end());
    if (want.empty()) throw ValidationError("channel selection cannot be empty");
    for (auto s : want)
        if (std::find(manifest.channel_sets.begin(), manifest.channel_sets.end(), s) ==
            manifest.channel_sets.end())
            throw ValidationError("channel set not present in dataset");

    const auto names = instrument::channel_names(want);
    std::vector<int> cols;
    for (const auto& nm : names) {
        const auto it = std::find(manifest.channel_names.begin(),
                                  manifest.channel_names.end(), nm);
        cols.push_back(static_cast<int>(it - manifest.channel_names.begin()));
    }
    // trajectory columns ride along
    for (int c = static_cast<int>(manifest.channel_names.size()) - 3;
         c < static_cast<int>(manifest.channel_names.size()); ++c)
        cols.push_back(c);

    Dataset out;
    out.manifest = manifest;
    out.manifest.channel_sets = want;
    out.manifest.channel_names.clear();
    for (int c : cols) out.manifest.channel_names.push_back(manifest.channel_names[c]);
    out.manifest.channels = static_cast<int>(cols.size());
    out.targets = targets;
    const int tc = manifest.t_count, cc = manifest.channels;
    out.features.resize(size() * tc * cols.size());
    for (std::size_t i = 0; i < size(); ++i) {
        const float* src = feature_row(i);
        float* dst = out.features.data() + i * tc * cols.size();
        for (int t = 0; t < tc; ++t)
            for (std::size_t k = 0; k < cols.size(); ++k)
                dst[t * cols.size() + k] = src[t * cc + cols[k]];
    }
    // same split, statistics recomputed for the reduced layout
    out.recompute_stats_();
    return out;
}

void Dataset::recompute_stats_() {
    const int tc = manifest.t_count, cc = manifest.channels;
    manifest.stats.assign(cc, {});
    std::vector<double> sum(cc, 0.0), sq(cc, 0.0);
    for (std::uint32_t idx : manifest.train_idx) {
        const float* row = feature_row(idx);
        for (int t = 0; t < tc; ++t)
            for (int c = 0; c < cc; ++c) {
                const double v = row[t * cc + c];
                sum[c] += v;
                sq[c] += v * v;
            }
    }
    const double cnt = std::max<double>(1.0, manifest.train_idx.size() * tc);
    for (int c = 0; c < cc; ++c) {
        const double m = sum[c] / cnt;
        const double var = std::max(sq[c] / cnt - m * m, 0.0);
        manifest.stats[c] = {m, std::max(std::sqrt(var), 1e-12)};
    }
}

void Dataset::validate() const {
    if (features.size() !=
        size() * static_cast<std::size_t>(manifest.t_count) * manifest.channels)
        throw ValidationError("feature array size mismatch");
    if (targets.size() != size() * kNumTargets)
        throw ValidationError("target array size mismatch");
    for (float v : targets)
        if (v < -1e-6f || v > 1.0f + 1e-6f)
            throw ValidationError("scaled target outside [0,1]");
    std::vector<char> seen(size(), 0);
    auto mark = [&](const std::vector<std::uint32_t>& idx) {
        for (auto i : idx) {
            if (i >= size() || seen[i]) throw ValidationError("split indices not disjoint");
            seen[i] = 1;
        }
    };
    mark(manifest.train_idx);
    mark(manifest.val_idx);
    mark(manifest.test_idx);
    if (!manifest.train_idx.empty() || !manifest.val_idx.empty())
        for (std::size_t i = 0; i < size(); ++i)
            if (!seen[i]) throw ValidationError("split does not cover all samples");
}

namespace {

// Features of one sample: [channels..., horizontal, tvd, dip] per position.
void fill_sample(const formation::SamplerConfig& cfg,
                 const std::vector<instrument::ChannelSet>& sets, Rng rng,
                 const em::QuadratureConfig& quad, double tvd_shift, float* feat_out,
                 float* target_out) {
    const auto f = formation::sample_formation(cfg, rng);
    auto traj = formation::sample_trajectory(cfg, rng);
    if (tvd_shift != 0.0)
        for (auto& p : traj.positions) p.tvd += tvd_shift;
    const auto meas = instrument::simulate_window(f, traj, sets, quad);
    const int n_meas = 2 * static_cast<int>(sets.size());
    const int cc = n_meas + 3;
    const auto& origin = traj.positions.front();
    for (int t = 0; t < cfg.t_count; ++t) {
        for (int c = 0; c < n_meas; ++c)
            feat_out[t * cc + c] = static_cast<float>(meas[t * n_meas + c]);
        feat_out[t * cc + n_meas + 0] =
            static_cast<float>(traj.positions[t].horizontal - origin.horizontal);
        feat_out[t * cc + n_meas + 1] =
            static_cast<float>(traj.positions[t].tvd - origin.tvd);
        feat_out[t * cc + n_meas + 2] = static_cast<float>(traj.positions[t].dip_deg);
    }
    const auto scaled = scale_targets(f, cfg);
    for (int k = 0; k < kNumTargets; ++k)
        target_out[k] = static_cast<float>(scaled[k]);
}

}  // namespace

Dataset generate(std::size_t n, const formation::SamplerConfig& cfg,
                 const std::vector<instrument::ChannelSet>& sets,
                 const GenerateOptions& opts) {
    if (n < 1) throw ValidationError("need at least one sample");
    if (sets.empty()) throw ValidationError("need at least one channel set");
    std::vector<instrument::ChannelSet> sorted(sets);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    cfg.validate();

    const int n_meas = 2 * static_cast<int>(sorted.size());
    const int cc = n_meas + 3;
    const int tc = cfg.t_count;

    std::vector<float> feats(n * tc * cc);
    std::vector<float> targs(n * kNumTargets);
    std::vector<char> ok(n, 0);
    const Rng root(cfg.seed);

    const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        float* feat = feats.data() + i * tc * cc;
        float* targ = targs.data() + i * kNumTargets;
        try {
            fill_sample(cfg, sorted, root.stream(i), opts.quad, 0.0, feat, targ);
            ok[i] = 1;
        } catch (const std::exception&) {
            try {
                // re-nudged geometry: shift the window off the failing depth
                fill_sample(cfg, sorted, root.stream(i), opts.quad, 2.5e-4, feat, targ);
                ok[i] = 1;
            } catch (const std::exception&) {
                ok[i] = 0;
            }
        }
    }

    Dataset ds;
    ds.manifest.seed = cfg.seed;
    ds.manifest.sampler = cfg;
    ds.manifest.channel_sets = sorted;
    ds.manifest.channel_names = instrument::channel_names(sorted);
    ds.manifest.channel_names.insert(ds.manifest.channel_names.end(),
                                     {"traj.h", "traj.tvd", "traj.dip"});
    ds.manifest.t_count = tc;
    ds.manifest.channels = cc;

    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ok[i]) continue;
        if (kept != i) {
            std::copy_n(feats.data() + i * tc * cc, tc * cc, feats.data() + kept * tc * cc);
            std::copy_n(targs.data() + i * kNumTargets, kNumTargets,
                        targs.data() + kept * kNumTargets);
        }
        ++kept;
    }
    ds.manifest.skipped = n - kept;
    if (ds.manifest.skipped > opts.max_skip_fraction * n)
        throw NumericalError("dataset generation skipped " +
                             std::to_string(ds.manifest.skipped) + " of " +
                             std::to_string(n) + " samples (limit " +
                             std::to_string(opts.max_skip_fraction * 100) + "%)");
    feats.resize(kept * tc * cc);
    targs.resize(kept * kNumTargets);
    ds.manifest.sample_count = kept;
    ds.features = std::move(feats);
    ds.targets = std::move(targs);
    return ds;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json manifest_to_json(const Manifest& m) {
    json j;
    j["schema_version"] = m.schema_version;
    j["toolkit_version"] = m.toolkit_version;
    j["seed"] = m.seed;
    j["sampler"] = {{"seed", m.sampler.seed},
                    {"t_count", m.sampler.t_count},
                    {"step", m.sampler.step}};
    std::vector<int> sets;
    for (auto s : m.channel_sets) sets.push_back(static_cast<int>(s));
    j["channel_sets"] = sets;
    j["channel_names"] = m.channel_names;
    j["t_count"] = m.t_count;
    j["channels"] = m.channels;
    j["sample_count"] = m.sample_count;
    j["skipped"] = m.skipped;
    j["split_seed"] = m.split_seed;
    j["train_idx"] = m.train_idx;
    j["val_idx"] = m.val_idx;
    j["test_idx"] = m.test_idx;
    json stats = json::array();
    for (const auto& s : m.stats) stats.push_back({{"mean", s.mean}, {"std", s.stddev}});
    j["stats"] = stats;
    j["features_crc"] = Crc32::hex(m.features_crc);
    j["targets_crc"] = Crc32::hex(m.targets_crc);
    return j;
}

Manifest manifest_from_json(const json& j) {
    Manifest m;
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw SchemaError("manifest missing schema_version");
    const int ver = j["schema_version"].get<int>();
    if (ver != kSchemaVersion)
        throw SchemaError("unsupported dataset schema version " + std::to_string(ver) +
                          " (expected " + std::to_string(kSchemaVersion) + ")");
    m.schema_version = ver;
    m.toolkit_version = j.value("toolkit_version", "");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.sampler.seed = j.at("sampler").at("seed").get<std::uint64_t>();
    m.sampler.t_count = j.at("sampler").at("t_count").get<int>();
    m.sampler.step = j.at("sampler").at("step").get<double>();
    for (int s : j.at("channel_sets").get<std::vector<int>>())
        m.channel_sets.push_back(static_cast<instrument::ChannelSet>(s));
    m.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    m.t_count = j.at("t_count").get<int>();
    m.channels = j.at("channels").get<int>();
    m.sample_count = j.at("sample_count").get<std::size_t>();
    m.skipped = j.at("skipped").get<std::size_t>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    m.train_idx = j.at("train_idx").get<std::vector<std::uint32_t>>();
    m.val_idx = j.at("val_idx").get<std::vector<std::uint32_t>>();
    m.test_idx = j.at("test_idx").get<std::vector<std::uint32_t>>();
    for (const auto& s : j.at("stats"))
        m.stats.push_back({s.at("mean").get<double>(), s.at("std").get<double>()});
    m.features_crc = std::stoul(j.at("features_crc").get<std::string>(), nullptr, 16);
    m.targets_crc = std::stoul(j.at("targets_crc").get<std::string>(), nullptr, 16);
    return m;
}

}  // namespace

void save(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Manifest m = ds.manifest;
    m.features_crc = write_f32_file(dir / "features.bin", ds.features);
    m.targets_crc = write_f32_file(dir / "targets.bin", ds.targets);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest_to_json(m).dump(2) << "\n";
}

Dataset load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("missing manifest.json in " + dir.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError("malformed manifest.json: " + std::string(e.what()));
    }
    Dataset ds;
    ds.manifest = manifest_from_json(j);
    const std::size_t nf = ds.manifest.sample_count *
                           static_cast<std::size_t>(ds.manifest.t_count) *
                           ds.manifest.channels;
    ds.features = read_f32_file(dir / "features.bin", nf, ds.manifest.features_crc);
    ds.targets = read_f32_file(dir / "targets.bin",
                               ds.manifest.sample_count * kNumTargets,
                               ds.manifest.targets_crc);
    ds.validate();
    return ds;
}

void export_text(const Dataset& ds, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "# idx split";
    for (int k = 0; k < kNumTargets; ++k) out << ' ' << formation::kTargetNames[k];
    for (int t = 0; t < ds.manifest.t_count; ++t)
        for (const auto& c : ds.manifest.channel_names) out << ' ' << c << '[' << t << ']';
    out << '\n';
    auto split_of = [&](std::size_t i) {
        for (auto v : ds.manifest.train_idx)
            if (v == i) return "train";
        for (auto v : ds.manifest.val_idx)
            if (v == i) return "val";
        return "test";
    };
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << i << ' ' << split_of(i);
        for (int k = 0; k < kNumTargets; ++k) {
            std::snprintf(buf, sizeof buf, " %.9g", ds.target_row(i)[k]);
            out << buf;
        }
        const float* row = ds.feature_row(i);
        const int nn = ds.manifest.t_count * ds.manifest.channels;
        for (int k = 0; k < nn; ++k) {
            std::snprintf(buf, sizeof buf, " %.9g", row[k]);
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace lwdinv::dataset
