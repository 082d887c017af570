#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lwdinv/em/layered.hpp"
#include "lwdinv/formation/model.hpp"
#include "lwdinv/instrument/tool.hpp"

namespace lwdinv::dataset {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolkitVersion = "0.1.0";

/// Min-max scaling of the seven log/angle parameters into [0,1].
std::array<double, formation::kNumTargets> scale_targets(
    const formation::FormationModel& f, const formation::SamplerConfig& cfg);
formation::FormationModel unscale_targets(
    const std::array<double, formation::kNumTargets>& v,
    const formation::SamplerConfig& cfg);

struct ChannelStats {
    double mean = 0.0;
    double stddev = 1.0;
};

struct Manifest {
    int schema_version = kSchemaVersion;
    std::string toolkit_version = kToolkitVersion;
    std::uint64_t seed = 0;
    formation::SamplerConfig sampler;
    std::vector<instrument::ChannelSet> channel_sets;
    std::vector<std::string> channel_names;  // measurement + trajectory columns
    int t_count = 65;
    int channels = 0;  // per-position feature count
    std::size_t sample_count = 0;
    std::size_t skipped = 0;
    std::vector<std::uint32_t> train_idx, val_idx, test_idx;
    std::uint64_t split_seed = 0;
    std::vector<ChannelStats> stats;  // from the training split only
    std::uint32_t features_crc = 0, targets_crc = 0;
};

struct Dataset {
    Manifest manifest;
    std::vector<float> features;  // n * T * C, row-major
    std::vector<float> targets;   // n * 7, min-max scaled

    std::size_t size() const { return manifest.sample_count; }
    const float* feature_row(std::size_t i) const {
        return features.data() + i * manifest.t_count * manifest.channels;
    }
    const float* target_row(std::size_t i) const {
        return targets.data() + i * formation::kNumTargets;
    }
    std::array<double, formation::kNumTargets> raw_targets(std::size_t i) const;

    /// Random disjoint split with floor sizing, remainder to train; then
    /// recomputes the normalization statistics from the training split.
    void assign_split(double train_frac, double val_frac, double test_frac,
                      std::uint64_t split_seed);

    /// New dataset carrying only the named channel sets (plus trajectory
    /// columns); split kept, statistics recomputed.
    Dataset select_channels(const std::vector<instrument::ChannelSet>& sets) const;

    void validate() const;

    void recompute_stats_();
};

struct GenerateOptions {
    GenerateOptions() { quad.fast_filter = true; }
    int threads = 0;  // 0: library default
    em::QuadratureConfig quad;
    double max_skip_fraction = 0.01;
};

/// Simulates n supervised samples: random formation + trajectory, forward
/// modeled through the instrument stack, features laid out per position as
/// [measurement channels..., horizontal, tvd, dip]. Sample k is a pure
/// function of (seed, k) regardless of thread count.
Dataset generate(std::size_t n, const formation::SamplerConfig& cfg,
                 const std::vector<instrument::ChannelSet>& sets,
                 const GenerateOptions& opts = {});

/// Split sizing rule shared by assign_split: floor for val/test, remainder
/// to train. Throws on n < 3 or fractions not summing to 1.
std::array<std::size_t, 3> split_sizes(std::size_t n, double train_frac,
                                       double val_frac, double test_frac);

void save(const Dataset& ds, const std::filesystem::path& dir);
Dataset load(const std::filesystem::path& dir);

/// Lossless text export, one record per line.
void export_text(const Dataset& ds, const std::filesystem::path& file);

}  // namespace lwdinv::dataset
