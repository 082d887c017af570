// Serial vs OpenMP timing for the two hot paths: forward simulation of
// trajectory windows and one training batch of gradient accumulation.
// The parallel code paths are the ones used in production; threads=1 runs
// the identical code serially, and results must match bit for bit.

#include <omp.h>

#include <chrono>
#include <cstdio>

#include "lwdinv/dataset/dataset.hpp"
#include "lwdinv/pipeline/pipeline.hpp"

using namespace lwdinv;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void bench_generation(int max_threads) {
    formation::SamplerConfig cfg;
    cfg.seed = 17;
    cfg.t_count = 65;
    const std::size_t n = 6;
    const std::vector<instrument::ChannelSet> sets = {
        instrument::ChannelSet::M1, instrument::ChannelSet::M2,
        instrument::ChannelSet::M3};

    std::printf("forward simulation, %zu windows of %d positions (M1+M2+M3)\n", n,
                cfg.t_count);
    double serial_time = 0.0;
    std::vector<float> serial_feats;
    for (int threads = 1; threads <= max_threads; threads *= 2) {
        dataset::GenerateOptions opts;
        opts.threads = threads;
        const auto t0 = Clock::now();
        const auto ds = dataset::generate(n, cfg, sets, opts);
        const double dt = seconds_since(t0);
        if (threads == 1) {
            serial_time = dt;
            serial_feats = ds.features;
        }
        const bool identical = ds.features == serial_feats;
        std::printf("  threads=%d  %7.2f ms/window  speedup %.2fx  %s\n", threads,
                    dt / n * 1e3, serial_time / dt,
                    identical ? "bit-identical" : "MISMATCH");
    }
}

void bench_training_batch(int max_threads) {
    // synthetic batch through the full-size network
    pipeline::NetworkConfig cfg;
    cfg.t_count = 65;
    cfg.channels = 9;
    const auto net = pipeline::build_network<float>(cfg);
    std::vector<float> theta;
    net.init_params(theta, Rng(1));
    const int batch = 128;
    Rng rng(7);
    std::vector<float> x(std::size_t(batch) * 65 * 9);
    std::vector<float> targ(std::size_t(batch) * 7);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : targ) v = static_cast<float>(rng.uniform(0, 1));

    std::printf("training batch, %d samples through %s\n", batch,
                net.describe().c_str());
    double serial_time = 0.0;
    std::vector<float> serial_grad;
    for (int threads = 1; threads <= max_threads; threads *= 2) {
        std::vector<std::vector<float>> sample_grad(batch,
                                                    std::vector<float>(net.param_count()));
        std::vector<std::unique_ptr<nn::Network<float>::Workspace>> wss(threads);
        for (auto& w : wss)
            w = std::make_unique<nn::Network<float>::Workspace>(net.make_workspace());
        const auto t0 = Clock::now();
#pragma omp parallel for schedule(static) num_threads(threads)
        for (int b = 0; b < batch; ++b) {
            auto& ws = *wss[omp_get_thread_num()];
            const float* y = net.forward(theta.data(), &x[std::size_t(b) * 65 * 9], ws);
            float dy[7];
            nn::l2_loss(y, &targ[std::size_t(b) * 7], 7, dy);
            net.backward(theta.data(), dy, ws, sample_grad[b].data());
        }
        std::vector<float> grad(net.param_count(), 0.0f);
        for (int b = 0; b < batch; ++b)  // fixed-order reduction
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += sample_grad[b][k];
        const double dt = seconds_since(t0);
        if (threads == 1) {
            serial_time = dt;
            serial_grad = grad;
        }
        const bool identical = grad == serial_grad;
        std::printf("  threads=%d  %7.2f ms/batch  speedup %.2fx  %s\n", threads,
                    dt * 1e3, serial_time / dt, identical ? "bit-identical" : "MISMATCH");
    }
}

}  // namespace

int main() {
    const int max_threads = omp_get_max_threads();
    std::printf("max threads: %d\n\n", max_threads);
    bench_generation(max_threads);
    std::printf("\n");
    bench_training_batch(max_threads);
    return 0;
}
