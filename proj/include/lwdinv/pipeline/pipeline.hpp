#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lwdinv/dataset/dataset.hpp"
#include "lwdinv/nn/network.hpp"

namespace lwdinv::pipeline {

/// Hyperparameters of the recurrent-convolutional inversion network.
struct NetworkConfig {
    int recurrent_output_size = 64;
    int nb_filter = 32;
    int pool_length = 2;
    int kernel_size = 3;
    int num_outputs = formation::kNumTargets;
    int t_count = 65;
    int channels = 0;  // set from the dataset when 0

    nn::AdamConfig adam;
    bool use_sgd = false;
    nn::SgdConfig sgd;
    int batch_size = 128;
    int max_epochs = 60;
    int patience = 5;
    double lr_decay = 1.0;     // per-interval multiplier (1 = constant)
    int lr_decay_every = 0;    // epochs per decay step (0 = disabled)

    void validate() const;
};

/// Layer list: LSTM -> reshape -> 3 x (residual conv block, max pool) ->
/// flatten -> dense(sigmoid).
std::vector<nn::LayerSpec> network_specs(const NetworkConfig& cfg);

template <typename T>
nn::Network<T> build_network(const NetworkConfig& cfg);

struct EpochStats {
    double train_loss = 0.0;  // mean over the epoch's batches
    double val_loss = 0.0;    // after the epoch (entry 0: before training)
};

/// Learned parameters plus everything needed to apply them: input
/// normalization, channel layout and target scaling ranges.
struct TrainedModel {
    NetworkConfig config;
    std::vector<float> theta;
    std::vector<instrument::ChannelSet> channel_sets;
    std::vector<std::string> channel_names;
    std::vector<dataset::ChannelStats> stats;
    formation::SamplerConfig sampler;
    std::uint64_t train_seed = 0;
    std::vector<EpochStats> history;
    int best_epoch = 0;

    /// Normalized forward pass over one raw feature window (t_count x
    /// channels); returns the scaled 7-vector in [0,1].
    std::array<double, formation::kNumTargets> predict(const float* window) const;

    /// Mean l2 loss over the given sample indices of a dataset.
    double mean_loss(const dataset::Dataset& ds,
                     const std::vector<std::uint32_t>& idx) const;

    /// Shared lazily-built network; call once before using predict() from
    /// multiple threads.
    const nn::Network<float>& network() const;

private:
    mutable std::optional<nn::Network<float>> net_;
};

struct TrainOptions {
    std::uint64_t seed = 0;
    int threads = 0;
    bool verbose = false;
    double stop_at_train_loss = 0.0;  // > 0: stop once the epoch mean drops below
};

/// Mini-batch training with per-epoch validation and early stopping;
/// returns the parameters of the best validation epoch. Gradients are
/// reduced in fixed sample order, so the result is identical for any
/// thread count.
TrainedModel train(const NetworkConfig& cfg, const dataset::Dataset& ds,
                   const TrainOptions& opts = {});

struct CrossplotBin {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
    double p10 = 0.0, p90 = 0.0;
    bool merged = false;  // absorbed a neighbor with < 2 samples
};

struct CrossplotReport {
    // per parameter: scatter points in physical (log/angle) units
    std::array<std::vector<double>, formation::kNumTargets> truth;
    std::array<std::vector<double>, formation::kNumTargets> pred;
    std::array<std::vector<CrossplotBin>, formation::kNumTargets> bins;
    std::array<double, formation::kNumTargets> mean_abs_err{};
};

/// Empirical P10/P90 of predictions against ground truth on the test
/// split, binned over each parameter's sampling range.
CrossplotReport evaluate_crossplot(const TrainedModel& model,
                                   const dataset::Dataset& ds, int n_bins = 20);

void write_crossplot(const CrossplotReport& rep, const std::filesystem::path& dir);

/// Interpolated order statistic (rank = q (n-1)); input need not be sorted.
double percentile(std::vector<double> values, double q);

/// Measurement log plus trajectory, the inversion input.
struct MeasurementLog {
    std::vector<std::string> channel_names;  // measurement channels only
    std::vector<double> values;              // L x channels
    std::vector<formation::TrajectoryPoint> positions;

    std::size_t size() const { return positions.size(); }
    int channels() const { return static_cast<int>(channel_names.size()); }
};

MeasurementLog read_log(const std::filesystem::path& file);
void write_log(const MeasurementLog& log, const std::filesystem::path& file);

struct InversionResult {
    std::vector<std::size_t> anchor_index;  // window end positions
    std::vector<formation::FormationModel> predictions;
};

/// Stride-1 sliding-window inversion: each length-T window yields one
/// formation estimate anchored at the window's last position.
InversionResult invert(const TrainedModel& model, const MeasurementLog& log,
                       int threads = 0);

struct MisfitReport {
    std::vector<std::string> channel_names;
    std::vector<std::size_t> position;   // log positions with predictions
    std::vector<double> measured;        // n x channels
    std::vector<double> resimulated;     // n x channels
    std::vector<double> rms;             // per channel
};

/// Forward-simulates every predicted local model at its anchor position
/// and compares against the measured channels.
MisfitReport misfit_report(const InversionResult& inv, const MeasurementLog& log,
                           const std::vector<instrument::ChannelSet>& sets,
                           int threads = 0,
                           const em::QuadratureConfig& quad = {});

void write_misfit(const MisfitReport& rep, const std::filesystem::path& file);

void save_model(const TrainedModel& model, const std::filesystem::path& dir);
TrainedModel load_model(const std::filesystem::path& dir);

}  // namespace lwdinv::pipeline
