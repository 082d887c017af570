#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lwdinv/nn/tensor.hpp"

namespace lwdinv::nn {

/// Sequence-form shape: `len` positions of `ch` channels. Vectors are
/// represented as {1, n}.
struct Shape2 {
    int len = 1;
    int ch = 1;
    int numel() const { return len * ch; }
    bool operator==(const Shape2&) const = default;
    std::string str() const {
        return "(" + std::to_string(len) + ", " + std::to_string(ch) + ")";
    }
};

enum class LayerKind {
    Dense,
    Relu,
    Sigmoid,
    Conv1d,
    MaxPool1d,
    AvgPool1d,
    ResidualAdd,  // input + (conv3-relu-conv3-relu)(input), channel-broadcast
    Rnn,
    Lstm,
    Bidirectional,  // wraps an LSTM pair, concatenated outputs
    Reshape,        // (1, n) -> (n, 1)
    Flatten,
};

/// Declarative layer description; the network type-checks the whole list
/// before any parameter is allocated.
struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    int units = 0;        // dense outputs / lstm-rnn hidden size
    int filters = 0;      // conv / residual block
    int kernel_size = 3;  // conv (odd)
    int pool_len = 2;
    bool conv_bias = true;
    InitKind init = InitKind::GlorotNormal;

    static LayerSpec dense(int units, InitKind init = InitKind::GlorotUniform);
    static LayerSpec relu();
    static LayerSpec sigmoid();
    static LayerSpec conv1d(int filters, int kernel = 3,
                            InitKind init = InitKind::GlorotNormal, bool bias = true);
    static LayerSpec maxpool(int len);
    static LayerSpec avgpool(int len);
    static LayerSpec residual_add(int filters, int kernel = 3,
                                  InitKind init = InitKind::GlorotNormal);
    static LayerSpec rnn(int hidden, int outputs);
    static LayerSpec lstm(int hidden);
    static LayerSpec bidirectional_lstm(int hidden);
    static LayerSpec reshape();
    static LayerSpec flatten();

    int rnn_outputs = 0;  // rnn only
};

class LayerImpl;

/// Static-graph network over a flat parameter vector. Forward/backward on
/// one Workspace are single-threaded; distinct Workspaces may run in
/// parallel against the same network and parameters.
template <typename T>
class Network {
public:
    Network(Shape2 input, const std::vector<LayerSpec>& specs);
    ~Network();
    Network(Network&&) noexcept;
    Network& operator=(Network&&) noexcept;

    Shape2 input_shape() const { return input_; }
    Shape2 output_shape() const;
    std::size_t param_count() const { return param_count_; }
    const std::vector<LayerSpec>& specs() const { return specs_; }

    /// Deterministic layer-order initialization into `theta`.
    void init_params(std::vector<T>& theta, Rng rng) const;

    struct Workspace {
        std::vector<std::vector<T>> act;      // per-layer outputs
        std::vector<std::vector<T>> scratch;  // per-layer saved internals
        std::vector<T> input;
        std::vector<std::vector<T>> dact;     // backward buffers
        bool forward_done = false;
    };
    Workspace make_workspace() const;

    /// Returns a pointer to the network output (valid until next forward).
    const T* forward(const T* theta, const T* x, Workspace& ws) const;

    /// Accumulates parameter gradients into `dtheta` (not cleared here).
    /// `dy` is dLoss/doutput. Requires a completed forward pass on `ws`.
    void backward(const T* theta, const T* dy, Workspace& ws, T* dtheta) const;

    std::string describe() const;

private:
    Shape2 input_;
    std::vector<LayerSpec> specs_;
    std::vector<std::unique_ptr<LayerImpl>> layers_;
    std::size_t param_count_ = 0;
};

/// Standalone residual combination y = x + fx, broadcasting fx's channels
/// against a single-channel x when needed.
template <typename T>
void residual_add(const T* x, int x_ch, const T* fx, int fx_ch, int len, T* y);

/// Euclidean-norm loss ||pred - target||_2 and its gradient. The gradient
/// at zero loss is zero.
template <typename T>
T l2_loss(const T* pred, const T* target, int n, T* grad_out = nullptr);

struct SgdConfig {
    double lr = 1e-2;
    double momentum = 0.0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class SgdOptimizer {
public:
    SgdOptimizer(SgdConfig cfg, std::size_t n) : cfg_(cfg), vel_(n, T(0)) {}
    void step(T* theta, const T* grad);
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    SgdConfig cfg_;
    std::vector<T> vel_;
};

template <typename T>
class AdamOptimizer {
public:
    AdamOptimizer(AdamConfig cfg, std::size_t n) : cfg_(cfg), m_(n, T(0)), v_(n, T(0)) {}
    void step(T* theta, const T* grad);
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    AdamConfig cfg_;
    std::vector<T> m_, v_;
    long t_ = 0;
};

}  // namespace lwdinv::nn
