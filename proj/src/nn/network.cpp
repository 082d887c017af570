#include "lwdinv/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace lwdinv::nn {

// ---------------------------------------------------------------------------
// LayerSpec constructors
// ---------------------------------------------------------------------------

LayerSpec LayerSpec::dense(int units, InitKind init) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.units = units;
    s.init = init;
    return s;
}
LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    return s;
}
LayerSpec LayerSpec::sigmoid() {
    LayerSpec s;
    s.kind = LayerKind::Sigmoid;
    return s;
}
LayerSpec LayerSpec::conv1d(int filters, int kernel, InitKind init, bool bias) {
    LayerSpec s;
    s.kind = LayerKind::Conv1d;
    s.filters = filters;
    s.kernel_size = kernel;
    s.init = init;
    s.conv_bias = bias;
    return s;
}
LayerSpec LayerSpec::maxpool(int len) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool1d;
    s.pool_len = len;
    return s;
}
LayerSpec LayerSpec::avgpool(int len) {
    LayerSpec s;
    s.kind = LayerKind::AvgPool1d;
    s.pool_len = len;
    return s;
}
LayerSpec LayerSpec::residual_add(int filters, int kernel, InitKind init) {
    LayerSpec s;
    s.kind = LayerKind::ResidualAdd;
    s.filters = filters;
    s.kernel_size = kernel;
    s.init = init;
    return s;
}
LayerSpec LayerSpec::rnn(int hidden, int outputs) {
    LayerSpec s;
    s.kind = LayerKind::Rnn;
    s.units = hidden;
    s.rnn_outputs = outputs;
    return s;
}
LayerSpec LayerSpec::lstm(int hidden) {
    LayerSpec s;
    s.kind = LayerKind::Lstm;
    s.units = hidden;
    s.init = InitKind::GlorotUniform;
    return s;
}
LayerSpec LayerSpec::bidirectional_lstm(int hidden) {
    LayerSpec s;
    s.kind = LayerKind::Bidirectional;
    s.units = hidden;
    s.init = InitKind::GlorotUniform;
    return s;
}
LayerSpec LayerSpec::reshape() {
    LayerSpec s;
    s.kind = LayerKind::Reshape;
    return s;
}
LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
}

// ---------------------------------------------------------------------------
// Layer implementations. Parameters live in a flat external vector; each
// layer records its slice [offset, offset+count). forward() may stash
// values needed by backward() into `scratch`.
// ---------------------------------------------------------------------------

class LayerImpl {
public:
    Shape2 in, out;
    std::size_t offset = 0, count = 0;
    std::size_t scratch_count = 0;

    virtual ~LayerImpl() = default;
    virtual void forward(const double* theta, const double* x, double* y,
                         double* scratch) const = 0;
    virtual void forward(const float* theta, const float* x, float* y,
                         float* scratch) const = 0;
    virtual void backward(const double* theta, const double* x, const double* y,
                          const double* scratch, const double* dy, double* dx,
                          double* dtheta) const = 0;
    virtual void backward(const float* theta, const float* x, const float* y,
                          const float* scratch, const float* dy, float* dx,
                          float* dtheta) const = 0;
    virtual void init_into(double* theta, Rng& rng) const = 0;
    virtual std::string describe() const = 0;
};

namespace {

template <typename T>
inline T sigmoid_of(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

// y[m] = W[m x n] x + b[m]; theta layout [W row-major, b]
template <typename T>
void dense_fwd(const T* th, int n, int m, const T* x, T* y) {
    const T* W = th;
    const T* b = th + std::size_t(m) * n;
    for (int r = 0; r < m; ++r) {
        T acc = b[r];
        const T* row = W + std::size_t(r) * n;
        for (int c = 0; c < n; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

template <typename T>
void dense_bwd(const T* th, int n, int m, const T* x, const T* dy, T* dx, T* dth) {
    const T* W = th;
    if (dx) {
        for (int c = 0; c < n; ++c) dx[c] = T(0);
        for (int r = 0; r < m; ++r) {
            const T g = dy[r];
            const T* row = W + std::size_t(r) * n;
            for (int c = 0; c < n; ++c) dx[c] += row[c] * g;
        }
    }
    if (dth) {
        T* dW = dth;
        T* db = dth + std::size_t(m) * n;
        for (int r = 0; r < m; ++r) {
            const T g = dy[r];
            T* row = dW + std::size_t(r) * n;
            for (int c = 0; c < n; ++c) row[c] += g * x[c];
            db[r] += g;
        }
    }
}

#define LWDINV_LAYER_DISPATCH                                                          \
    void forward(const double* t, const double* x, double* y, double* s)               \
        const override {                                                               \
        fwd(t, x, y, s);                                                               \
    }                                                                                  \
    void forward(const float* t, const float* x, float* y, float* s) const override { \
        fwd(t, x, y, s);                                                               \
    }                                                                                  \
    void backward(const double* t, const double* x, const double* y,                   \
                  const double* s, const double* dy, double* dx, double* dt)           \
        const override {                                                               \
        bwd(t, x, y, s, dy, dx, dt);                                                   \
    }                                                                                  \
    void backward(const float* t, const float* x, const float* y, const float* s,      \
                  const float* dy, float* dx, float* dt) const override {              \
        bwd(t, x, y, s, dy, dx, dt);                                                   \
    }

class DenseLayer final : public LayerImpl {
public:
    InitKind init_kind;
    explicit DenseLayer(Shape2 input, int units, InitKind ik) : init_kind(ik) {
        if (units <= 0) throw ShapeError("dense: units must be positive");
        in = input;
        out = {1, units};
        count = std::size_t(units) * input.numel() + units;
    }
    template <typename T>
    void fwd(const T* th, const T* x, T* y, T*) const {
        dense_fwd(th + offset, in.numel(), out.ch, x, y);
    }
    template <typename T>
    void bwd(const T* th, const T* x, const T*, const T*, const T* dy, T* dx,
             T* dt) const {
        dense_bwd(th + offset, in.numel(), out.ch, x, dy, dx, dt ? dt + offset : nullptr);
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double* theta, Rng& rng) const override {
        const std::size_t n = in.numel(), m = out.ch;
        glorot_fill(theta + offset, n * m, n, m, init_kind, rng);
        std::fill(theta + offset + n * m, theta + offset + count, 0.0);
    }
    std::string describe() const override {
        return "dense(" + std::to_string(out.ch) + ")";
    }
};

class ReluLayer final : public LayerImpl {
public:
    explicit ReluLayer(Shape2 input) { in = out = input; }
    template <typename T>
    void fwd(const T*, const T* x, T* y, T*) const {
        const int n = in.numel();
        for (int i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    }
    template <typename T>
    void bwd(const T*, const T* x, const T*, const T*, const T* dy, T* dx, T*) const {
        const int n = in.numel();
        for (int i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double*, Rng&) const override {}
    std::string describe() const override { return "relu"; }
};

class SigmoidLayer final : public LayerImpl {
public:
    explicit SigmoidLayer(Shape2 input) { in = out = input; }
    template <typename T>
    void fwd(const T*, const T* x, T* y, T*) const {
        const int n = in.numel();
        for (int i = 0; i < n; ++i) y[i] = sigmoid_of(x[i]);
    }
    template <typename T>
    void bwd(const T*, const T*, const T* y, const T*, const T* dy, T* dx, T*) const {
        const int n = in.numel();
        for (int i = 0; i < n; ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double*, Rng&) const override {}
    std::string describe() const override { return "sigmoid"; }
};

// Zero-padded 'same' cross-correlation, kernels (F x K x C) + bias (F).
template <typename T>
void conv1d_fwd(const T* th, int L, int C, int F, int K, bool bias, const T* x, T* y) {
    const int h = K / 2;
    const T* ker = th;
    const T* b = th + std::size_t(F) * K * C;
    for (int p = 0; p < L; ++p) {
        for (int f = 0; f < F; ++f) {
            T acc = bias ? b[f] : T(0);
            const T* kf = ker + std::size_t(f) * K * C;
            const int m0 = std::max(0, h - p), m1 = std::min(K, L + h - p);
            for (int m = m0; m < m1; ++m) {
                const T* xr = x + std::size_t(p + m - h) * C;
                const T* kr = kf + std::size_t(m) * C;
                for (int c = 0; c < C; ++c) acc += kr[c] * xr[c];
            }
            y[std::size_t(p) * F + f] = acc;
        }
    }
}

template <typename T>
void conv1d_bwd(const T* th, int L, int C, int F, int K, bool bias, const T* x,
                const T* dy, T* dx, T* dth) {
    const int h = K / 2;
    const T* ker = th;
    if (dx) std::fill(dx, dx + std::size_t(L) * C, T(0));
    for (int p = 0; p < L; ++p) {
        for (int f = 0; f < F; ++f) {
            const T g = dy[std::size_t(p) * F + f];
            if (g == T(0)) continue;
            const T* kf = ker + std::size_t(f) * K * C;
            const int m0 = std::max(0, h - p), m1 = std::min(K, L + h - p);
            if (dx) {
                for (int m = m0; m < m1; ++m) {
                    T* xr = dx + std::size_t(p + m - h) * C;
                    const T* kr = kf + std::size_t(m) * C;
                    for (int c = 0; c < C; ++c) xr[c] += kr[c] * g;
                }
            }
            if (dth) {
                T* dkf = dth + std::size_t(f) * K * C;
                for (int m = m0; m < m1; ++m) {
                    const T* xr = x + std::size_t(p + m - h) * C;
                    T* dkr = dkf + std::size_t(m) * C;
                    for (int c = 0; c < C; ++c) dkr[c] += xr[c] * g;
                }
                if (bias) dth[std::size_t(F) * K * C + f] += g;
            }
        }
    }
}

class Conv1dLayer final : public LayerImpl {
public:
    int K, F;
    bool bias;
    InitKind init_kind;
    Conv1dLayer(Shape2 input, int filters, int kernel, InitKind ik, bool use_bias)
        : K(kernel), F(filters), bias(use_bias), init_kind(ik) {
        if (filters <= 0) throw ShapeError("conv1d: filters must be positive");
        if (kernel <= 0 || kernel % 2 == 0)
            throw ShapeError("conv1d: kernel size must be odd and positive");
        in = input;
        out = {input.len, filters};
        count = std::size_t(F) * K * input.ch + (bias ? F : 0);
    }
    template <typename T>
    void fwd(const T* th, const T* x, T* y, T*) const {
        conv1d_fwd(th + offset, in.len, in.ch, F, K, bias, x, y);
    }
    template <typename T>
    void bwd(const T* th, const T* x, const T*, const T*, const T* dy, T* dx,
             T* dt) const {
        conv1d_bwd(th + offset, in.len, in.ch, F, K, bias, x, dy, dx,
                   dt ? dt + offset : nullptr);
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double* theta, Rng& rng) const override {
        glorot_fill(theta + offset, std::size_t(F) * K * in.ch,
                    std::size_t(K) * in.ch, std::size_t(K) * F, init_kind, rng);
        if (bias)
            std::fill(theta + offset + std::size_t(F) * K * in.ch,
                      theta + offset + count, 0.0);
    }
    std::string describe() const override {
        return "conv1d(" + std::to_string(F) + ", k=" + std::to_string(K) + ")";
    }
};

class PoolLayer final : public LayerImpl {
public:
    int p;
    bool max_mode;
    PoolLayer(Shape2 input, int pool, bool is_max) : p(pool), max_mode(is_max) {
        if (pool <= 0) throw ShapeError("pool: length must be positive");
        if (input.len < pool)
            throw ShapeError("pool: sequence shorter than the window");
        in = input;
        out = {input.len / pool, input.ch};  // trailing remainder truncated
        scratch_count = max_mode ? std::size_t(out.numel()) : 0;
    }
    template <typename T>
    void fwd(const T*, const T* x, T* y, T* s) const {
        const int C = in.ch;
        for (int w = 0; w < out.len; ++w) {
            for (int c = 0; c < C; ++c) {
                if (max_mode) {
                    int best = w * p;
                    T bv = x[std::size_t(w) * p * C + c];
                    for (int k = 1; k < p; ++k) {
                        const T v = x[(std::size_t(w) * p + k) * C + c];
                        if (v > bv) {
                            bv = v;
                            best = w * p + k;
                        }
                    }
                    y[std::size_t(w) * C + c] = bv;
                    s[std::size_t(w) * C + c] = static_cast<T>(best);
                } else {
                    T acc = T(0);
                    for (int k = 0; k < p; ++k) acc += x[(std::size_t(w) * p + k) * C + c];
                    y[std::size_t(w) * C + c] = acc / T(p);
                }
            }
        }
    }
    template <typename T>
    void bwd(const T*, const T*, const T*, const T* s, const T* dy, T* dx, T*) const {
        const int C = in.ch;
        std::fill(dx, dx + std::size_t(in.numel()), T(0));
        for (int w = 0; w < out.len; ++w) {
            for (int c = 0; c < C; ++c) {
                const T g = dy[std::size_t(w) * C + c];
                if (max_mode) {
                    const int best = static_cast<int>(s[std::size_t(w) * C + c]);
                    dx[std::size_t(best) * C + c] += g;
                } else {
                    for (int k = 0; k < p; ++k)
                        dx[(std::size_t(w) * p + k) * C + c] += g / T(p);
                }
            }
        }
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double*, Rng&) const override {}
    std::string describe() const override {
        return std::string(max_mode ? "maxpool(" : "avgpool(") + std::to_string(p) + ")";
    }
};

// x + relu(conv(relu(conv(x)))) with channel broadcast when in.ch == 1.
class ResidualBlockLayer final : public LayerImpl {
public:
    int K, F;
    InitKind init_kind;
    std::size_t k1_count, k2_count;
    ResidualBlockLayer(Shape2 input, int filters, int kernel, InitKind ik)
        : K(kernel), F(filters), init_kind(ik) {
        if (input.ch != 1 && input.ch != filters)
            throw ShapeError(
                "residual_add: input channels must be 1 (broadcast) or equal filters");
        if (kernel % 2 == 0) throw ShapeError("residual_add: kernel size must be odd");
        in = input;
        out = {input.len, filters};
        k1_count = std::size_t(F) * K * input.ch + F;
        k2_count = std::size_t(F) * K * F + F;
        count = k1_count + k2_count;
        // saved: conv1 pre-activation, relu1 output, conv2 pre-activation
        scratch_count = 3 * std::size_t(input.len) * F;
    }
    template <typename T>
    void fwd(const T* th, const T* x, T* y, T* s) const {
        const int L = in.len, C = in.ch;
        T* a1 = s;                              // conv1 out
        T* r1 = s + std::size_t(L) * F;         // relu1 out
        T* a2 = r1 + std::size_t(L) * F;        // conv2 out
        conv1d_fwd(th + offset, L, C, F, K, true, x, a1);
        for (int i = 0; i < L * F; ++i) r1[i] = a1[i] > T(0) ? a1[i] : T(0);
        conv1d_fwd(th + offset + k1_count, L, F, F, K, true, r1, a2);
        for (int p = 0; p < L; ++p)
            for (int f = 0; f < F; ++f) {
                const T r2 = a2[std::size_t(p) * F + f] > T(0)
                                 ? a2[std::size_t(p) * F + f]
                                 : T(0);
                const T xin = (C == 1) ? x[p] : x[std::size_t(p) * F + f];
                y[std::size_t(p) * F + f] = xin + r2;
            }
    }
    template <typename T>
    void bwd(const T* th, const T* x, const T*, const T* s, const T* dy, T* dx,
             T* dt) const {
        const int L = in.len, C = in.ch;
        const T* a1 = s;
        const T* r1 = s + std::size_t(L) * F;
        const T* a2 = r1 + std::size_t(L) * F;
        std::vector<T> da2(std::size_t(L) * F), dr1(std::size_t(L) * F),
            da1(std::size_t(L) * F);
        for (int i = 0; i < L * F; ++i) da2[i] = a2[i] > T(0) ? dy[i] : T(0);
        conv1d_bwd(th + offset + k1_count, L, F, F, K, true, r1, da2.data(), dr1.data(),
                   dt ? dt + offset + k1_count : nullptr);
        for (int i = 0; i < L * F; ++i) da1[i] = a1[i] > T(0) ? dr1[i] : T(0);
        conv1d_bwd(th + offset, L, C, F, K, true, x, da1.data(), dx,
                   dt ? dt + offset : nullptr);
        // skip-path gradient
        if (C == 1) {
            for (int p = 0; p < L; ++p) {
                T acc = T(0);
                for (int f = 0; f < F; ++f) acc += dy[std::size_t(p) * F + f];
                dx[p] += acc;
            }
        } else {
            for (int i = 0; i < L * F; ++i) dx[i] += dy[i];
        }
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double* theta, Rng& rng) const override {
        glorot_fill(theta + offset, std::size_t(F) * K * in.ch, std::size_t(K) * in.ch,
                    std::size_t(K) * F, init_kind, rng);
        std::fill(theta + offset + std::size_t(F) * K * in.ch,
                  theta + offset + k1_count, 0.0);
        glorot_fill(theta + offset + k1_count, std::size_t(F) * K * F,
                    std::size_t(K) * F, std::size_t(K) * F, init_kind, rng);
        std::fill(theta + offset + k1_count + std::size_t(F) * K * F,
                  theta + offset + count, 0.0);
    }
    std::string describe() const override {
        return "residual_add(" + std::to_string(F) + ", k=" + std::to_string(K) + ")";
    }
};

// Plain recurrence: a_t = Wax x_t + Waa a_{t-1} + b_a (linear state),
// y_t = sigmoid(Wpa a_t + b_p). State starts at zero for every sequence.
class RnnLayer final : public LayerImpl {
public:
    int H, O;
    RnnLayer(Shape2 input, int hidden, int outputs) : H(hidden), O(outputs) {
        if (hidden <= 0 || outputs <= 0) throw ShapeError("rnn: sizes must be positive");
        in = input;
        out = {input.len, outputs};
        count = std::size_t(H) * input.ch + std::size_t(H) * H + H +
                std::size_t(O) * H + O;
        scratch_count = std::size_t(input.len) * H;  // a_t
    }
    // theta layout: Wax (H x C), Waa (H x H), b_a (H), Wpa (O x H), b_p (O)
    template <typename T>
    void fwd(const T* th, const T* x, T* y, T* s) const {
        const int C = in.ch, L = in.len;
        const T* Wax = th + offset;
        const T* Waa = Wax + std::size_t(H) * C;
        const T* ba = Waa + std::size_t(H) * H;
        const T* Wpa = ba + H;
        const T* bp = Wpa + std::size_t(O) * H;
        std::vector<T> prev(H, T(0));
        for (int t = 0; t < L; ++t) {
            T* a = s + std::size_t(t) * H;
            for (int r = 0; r < H; ++r) {
                T acc = ba[r];
                const T* w = Wax + std::size_t(r) * C;
                const T* xr = x + std::size_t(t) * C;
                for (int c = 0; c < C; ++c) acc += w[c] * xr[c];
                const T* wr = Waa + std::size_t(r) * H;
                for (int c = 0; c < H; ++c) acc += wr[c] * prev[c];
                a[r] = acc;
            }
            std::copy(a, a + H, prev.begin());
            T* yr = y + std::size_t(t) * O;
            for (int r = 0; r < O; ++r) {
                T acc = bp[r];
                const T* w = Wpa + std::size_t(r) * H;
                for (int c = 0; c < H; ++c) acc += w[c] * a[c];
                yr[r] = sigmoid_of(acc);
            }
        }
    }
    template <typename T>
    void bwd(const T* th, const T* x, const T* y, const T* s, const T* dy, T* dx,
             T* dt) const {
        const int C = in.ch, L = in.len;
        const T* Wax = th + offset;
        const T* Waa = Wax + std::size_t(H) * C;
        const T* Wpa = Waa + std::size_t(H) * H + H;
        T* dWax = dt ? dt + offset : nullptr;
        T* dWaa = dt ? dWax + std::size_t(H) * C : nullptr;
        T* dba = dt ? dWaa + std::size_t(H) * H : nullptr;
        T* dWpa = dt ? dba + H : nullptr;
        T* dbp = dt ? dWpa + std::size_t(O) * H : nullptr;
        std::vector<T> da_next(H, T(0)), da(H);
        if (dx) std::fill(dx, dx + std::size_t(L) * C, T(0));
        for (int t = L - 1; t >= 0; --t) {
            const T* a = s + std::size_t(t) * H;
            const T* a_prev = t > 0 ? s + std::size_t(t - 1) * H : nullptr;
            std::fill(da.begin(), da.end(), T(0));
            // output head
            for (int r = 0; r < O; ++r) {
                const T yo = y[std::size_t(t) * O + r];
                const T g = dy[std::size_t(t) * O + r] * yo * (T(1) - yo);
                const T* w = Wpa + std::size_t(r) * H;
                for (int c = 0; c < H; ++c) da[c] += w[c] * g;
                if (dt) {
                    T* dw = dWpa + std::size_t(r) * H;
                    for (int c = 0; c < H; ++c) dw[c] += g * a[c];
                    dbp[r] += g;
                }
            }
            for (int c = 0; c < H; ++c) da[c] += da_next[c];
            // recurrence
            std::fill(da_next.begin(), da_next.end(), T(0));
            for (int r = 0; r < H; ++r) {
                const T g = da[r];
                if (dt) {
                    T* dw = dWax + std::size_t(r) * C;
                    const T* xr = x + std::size_t(t) * C;
                    for (int c = 0; c < C; ++c) dw[c] += g * xr[c];
                    if (a_prev) {
                        T* dwr = dWaa + std::size_t(r) * H;
                        for (int c = 0; c < H; ++c) dwr[c] += g * a_prev[c];
                    }
                    dba[r] += g;
                }
                if (dx) {
                    const T* w = Wax + std::size_t(r) * C;
                    T* dxr = dx + std::size_t(t) * C;
                    for (int c = 0; c < C; ++c) dxr[c] += w[c] * g;
                }
                const T* wr = Waa + std::size_t(r) * H;
                for (int c = 0; c < H; ++c) da_next[c] += wr[c] * g;
            }
        }
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double* theta, Rng& rng) const override {
        const int C = in.ch;
        double* p = theta + offset;
        glorot_fill(p, std::size_t(H) * C, C, H, InitKind::GlorotUniform, rng);
        p += std::size_t(H) * C;
        glorot_fill(p, std::size_t(H) * H, H, H, InitKind::GlorotUniform, rng);
        p += std::size_t(H) * H;
        std::fill(p, p + H, 0.0);
        p += H;
        glorot_fill(p, std::size_t(O) * H, H, O, InitKind::GlorotUniform, rng);
        p += std::size_t(O) * H;
        std::fill(p, p + O, 0.0);
    }
    std::string describe() const override {
        return "rnn(" + std::to_string(H) + " -> " + std::to_string(O) + ")";
    }
};

// Standard gated memory cell; returns the last hidden state. Gate order in
// the stacked weights: input, forget, candidate, output. Forget-gate bias
// starts at one.
struct LstmCore {
    int C, H, L;
    std::size_t offset;

    std::size_t param_count() const {
        return 4 * std::size_t(H) * C + 4 * std::size_t(H) * H + 4 * std::size_t(H);
    }
    // per step saved: gates i,f,g,o (4H), c (H), h (H)
    std::size_t scratch_per_step() const { return 6 * std::size_t(H); }

    template <typename T>
    void fwd(const T* th, const T* x, T* h_last, T* s, bool reverse) const {
        const T* Wx = th + offset;
        const T* Wh = Wx + 4 * std::size_t(H) * C;
        const T* b = Wh + 4 * std::size_t(H) * H;
        std::vector<T> z(4 * H);
        const T* h_prev = nullptr;
        const T* c_prev = nullptr;
        for (int step = 0; step < L; ++step) {
            const int t = reverse ? L - 1 - step : step;
            const T* xt = x + std::size_t(t) * C;
            for (int r = 0; r < 4 * H; ++r) {
                T acc = b[r];
                const T* w = Wx + std::size_t(r) * C;
                for (int c = 0; c < C; ++c) acc += w[c] * xt[c];
                if (h_prev) {
                    const T* wh = Wh + std::size_t(r) * H;
                    for (int c = 0; c < H; ++c) acc += wh[c] * h_prev[c];
                }
                z[r] = acc;
            }
            T* save = s + std::size_t(step) * scratch_per_step();
            T* gi = save;
            T* gf = save + H;
            T* gg = save + 2 * H;
            T* go = save + 3 * H;
            T* cc = save + 4 * H;
            T* hh = save + 5 * H;
            for (int r = 0; r < H; ++r) {
                gi[r] = sigmoid_of(z[r]);
                gf[r] = sigmoid_of(z[H + r]);
                gg[r] = std::tanh(z[2 * H + r]);
                go[r] = sigmoid_of(z[3 * H + r]);
                const T cp = c_prev ? c_prev[r] : T(0);
                cc[r] = gf[r] * cp + gi[r] * gg[r];
                hh[r] = go[r] * std::tanh(cc[r]);
            }
            h_prev = hh;
            c_prev = cc;
        }
        std::copy(h_prev, h_prev + H, h_last);
    }

    template <typename T>
    void bwd(const T* th, const T* x, const T* s, const T* dh_last, T* dx, T* dth,
             bool reverse) const {
        const T* Wx = th + offset;
        const T* Wh = Wx + 4 * std::size_t(H) * C;
        T* dWx = dth ? dth + offset : nullptr;
        T* dWh = dth ? dWx + 4 * std::size_t(H) * C : nullptr;
        T* db = dth ? dWh + 4 * std::size_t(H) * H : nullptr;
        std::vector<T> dh(dh_last, dh_last + H), dc(H, T(0)), dz(4 * H);
        for (int step = L - 1; step >= 0; --step) {
            const int t = reverse ? L - 1 - step : step;
            const T* save = s + std::size_t(step) * scratch_per_step();
            const T* gi = save;
            const T* gf = save + H;
            const T* gg = save + 2 * H;
            const T* go = save + 3 * H;
            const T* cc = save + 4 * H;
            const T* prev = step > 0 ? s + std::size_t(step - 1) * scratch_per_step()
                                     : nullptr;
            const T* c_prev = prev ? prev + 4 * H : nullptr;
            const T* h_prev = prev ? prev + 5 * H : nullptr;
            for (int r = 0; r < H; ++r) {
                const T tc = std::tanh(cc[r]);
                const T dcr = dc[r] + dh[r] * go[r] * (T(1) - tc * tc);
                const T cp = c_prev ? c_prev[r] : T(0);
                dz[r] = dcr * gg[r] * gi[r] * (T(1) - gi[r]);
                dz[H + r] = dcr * cp * gf[r] * (T(1) - gf[r]);
                dz[2 * H + r] = dcr * gi[r] * (T(1) - gg[r] * gg[r]);
                dz[3 * H + r] = dh[r] * tc * go[r] * (T(1) - go[r]);
                dc[r] = dcr * gf[r];
            }
            const T* xt = x + std::size_t(t) * C;
            std::fill(dh.begin(), dh.end(), T(0));
            for (int r = 0; r < 4 * H; ++r) {
                const T g = dz[r];
                if (g == T(0)) continue;
                if (dth) {
                    T* dw = dWx + std::size_t(r) * C;
                    for (int c = 0; c < C; ++c) dw[c] += g * xt[c];
                    if (h_prev) {
                        T* dwh = dWh + std::size_t(r) * H;
                        for (int c = 0; c < H; ++c) dwh[c] += g * h_prev[c];
                    }
                    db[r] += g;
                }
                if (dx) {
                    const T* w = Wx + std::size_t(r) * C;
                    T* dxt = dx + std::size_t(t) * C;
                    for (int c = 0; c < C; ++c) dxt[c] += w[c] * g;
                }
                const T* wh = Wh + std::size_t(r) * H;
                for (int c = 0; c < H; ++c) dh[c] += wh[c] * g;
            }
            // dh now holds dL/dh_{prev step}; dc already propagated
        }
    }

    void init_into(double* theta, Rng& rng) const {
        double* p = theta + offset;
        glorot_fill(p, 4 * std::size_t(H) * C, C, 4 * std::size_t(H),
                    InitKind::GlorotUniform, rng);
        p += 4 * std::size_t(H) * C;
        glorot_fill(p, 4 * std::size_t(H) * H, H, 4 * std::size_t(H),
                    InitKind::GlorotUniform, rng);
        p += 4 * std::size_t(H) * H;
        std::fill(p, p + 4 * std::size_t(H), 0.0);
        std::fill(p + H, p + 2 * H, 1.0);  // forget gate opens at start
    }
};

class LstmLayer final : public LayerImpl {
public:
    LstmCore core;
    LstmLayer(Shape2 input, int hidden) {
        if (hidden <= 0) throw ShapeError("lstm: hidden size must be positive");
        in = input;
        out = {1, hidden};
        core = {input.ch, hidden, input.len, 0};
        count = core.param_count();
        scratch_count = std::size_t(input.len) * core.scratch_per_step();
    }
    template <typename T>
    void fwd(const T* th, const T* x, T* y, T* s) const {
        core.fwd(th, x, y, s, false);
    }
    template <typename T>
    void bwd(const T* th, const T* x, const T*, const T* s, const T* dy, T* dx,
             T* dt) const {
        if (dx) std::fill(dx, dx + std::size_t(in.numel()), T(0));
        core.bwd(th, x, s, dy, dx, dt, false);
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double* theta, Rng& rng) const override { core.init_into(theta, rng); }
    std::string describe() const override {
        return "lstm(" + std::to_string(core.H) + ")";
    }
};

// Two independent cells, one scanning forward and one scanning the
// reversed sequence; outputs concatenated.
class BidirectionalLstmLayer final : public LayerImpl {
public:
    LstmCore fwd_core, bwd_core;
    BidirectionalLstmLayer(Shape2 input, int hidden) {
        if (hidden <= 0) throw ShapeError("bidirectional: hidden size must be positive");
        in = input;
        out = {1, 2 * hidden};
        fwd_core = {input.ch, hidden, input.len, 0};
        bwd_core = {input.ch, hidden, input.len, fwd_core.param_count()};
        count = 2 * fwd_core.param_count();
        scratch_count = 2 * std::size_t(input.len) * fwd_core.scratch_per_step();
    }
    template <typename T>
    void fwd(const T* th, const T* x, T* y, T* s) const {
        const std::size_t half = std::size_t(in.len) * fwd_core.scratch_per_step();
        fwd_core.fwd(th, x, y, s, false);
        bwd_core.fwd(th, x, y + fwd_core.H, s + half, true);
    }
    template <typename T>
    void bwd(const T* th, const T* x, const T*, const T* s, const T* dy, T* dx,
             T* dt) const {
        const std::size_t half = std::size_t(in.len) * fwd_core.scratch_per_step();
        if (dx) std::fill(dx, dx + std::size_t(in.numel()), T(0));
        fwd_core.bwd(th, x, s, dy, dx, dt, false);
        bwd_core.bwd(th, x, s + half, dy + fwd_core.H, dx, dt, true);
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double* theta, Rng& rng) const override {
        fwd_core.init_into(theta, rng);
        bwd_core.init_into(theta, rng);
    }
    std::string describe() const override {
        return "bidirectional_lstm(" + std::to_string(fwd_core.H) + ")";
    }
};

class ReshapeLayer final : public LayerImpl {
public:
    explicit ReshapeLayer(Shape2 input) {
        if (input.len != 1)
            throw ShapeError("reshape expects a vector input, got " + input.str());
        in = input;
        out = {input.ch, 1};
    }
    template <typename T>
    void fwd(const T*, const T* x, T* y, T*) const {
        std::copy(x, x + in.numel(), y);
    }
    template <typename T>
    void bwd(const T*, const T*, const T*, const T*, const T* dy, T* dx, T*) const {
        std::copy(dy, dy + in.numel(), dx);
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double*, Rng&) const override {}
    std::string describe() const override { return "reshape"; }
};

class FlattenLayer final : public LayerImpl {
public:
    explicit FlattenLayer(Shape2 input) {
        in = input;
        out = {1, input.numel()};
    }
    template <typename T>
    void fwd(const T*, const T* x, T* y, T*) const {
        std::copy(x, x + in.numel(), y);
    }
    template <typename T>
    void bwd(const T*, const T*, const T*, const T*, const T* dy, T* dx, T*) const {
        std::copy(dy, dy + in.numel(), dx);
    }
    LWDINV_LAYER_DISPATCH
    void init_into(double*, Rng&) const override {}
    std::string describe() const override { return "flatten"; }
};

std::unique_ptr<LayerImpl> build_layer(Shape2 in, const LayerSpec& sp) {
    switch (sp.kind) {
        case LayerKind::Dense:
            if (in.len != 1)
                throw ShapeError("dense expects a vector input, got " + in.str());
            return std::make_unique<DenseLayer>(in, sp.units, sp.init);
        case LayerKind::Relu:
            return std::make_unique<ReluLayer>(in);
        case LayerKind::Sigmoid:
            return std::make_unique<SigmoidLayer>(in);
        case LayerKind::Conv1d:
            return std::make_unique<Conv1dLayer>(in, sp.filters, sp.kernel_size, sp.init,
                                                 sp.conv_bias);
        case LayerKind::MaxPool1d:
            return std::make_unique<PoolLayer>(in, sp.pool_len, true);
        case LayerKind::AvgPool1d:
            return std::make_unique<PoolLayer>(in, sp.pool_len, false);
        case LayerKind::ResidualAdd:
            return std::make_unique<ResidualBlockLayer>(in, sp.filters, sp.kernel_size,
                                                        sp.init);
        case LayerKind::Rnn:
            return std::make_unique<RnnLayer>(in, sp.units, sp.rnn_outputs);
        case LayerKind::Lstm:
            return std::make_unique<LstmLayer>(in, sp.units);
        case LayerKind::Bidirectional:
            return std::make_unique<BidirectionalLstmLayer>(in, sp.units);
        case LayerKind::Reshape:
            return std::make_unique<ReshapeLayer>(in);
        case LayerKind::Flatten:
            return std::make_unique<FlattenLayer>(in);
    }
    throw ShapeError("unknown layer kind");
}

}  // namespace

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

template <typename T>
Network<T>::Network(Shape2 input, const std::vector<LayerSpec>& specs)
    : input_(input), specs_(specs) {
    if (input.len < 1 || input.ch < 1)
        throw ShapeError("network input shape must be positive");
    // full shape inference first: reject mismatches before allocating
    Shape2 cur = input;
    std::size_t off = 0;
    std::vector<std::unique_ptr<LayerImpl>> built;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        std::unique_ptr<LayerImpl> layer;
        try {
            layer = build_layer(cur, specs[i]);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
        }
        layer->offset = off;
        off += layer->count;
        cur = layer->out;
        built.push_back(std::move(layer));
    }
    layers_ = std::move(built);
    param_count_ = off;
}

template <typename T>
Network<T>::~Network() = default;
template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <typename T>
Shape2 Network<T>::output_shape() const {
    return layers_.empty() ? input_ : layers_.back()->out;
}

template <typename T>
void Network<T>::init_params(std::vector<T>& theta, Rng rng) const {
    std::vector<double> full(param_count_, 0.0);
    for (const auto& l : layers_) l->init_into(full.data(), rng);
    theta.resize(param_count_);
    for (std::size_t i = 0; i < param_count_; ++i) theta[i] = static_cast<T>(full[i]);
}

template <typename T>
typename Network<T>::Workspace Network<T>::make_workspace() const {
    Workspace ws;
    ws.input.resize(input_.numel());
    ws.act.resize(layers_.size());
    ws.scratch.resize(layers_.size());
    ws.dact.resize(layers_.size() + 1);
    ws.dact[0].resize(input_.numel());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        ws.act[i].resize(layers_[i]->out.numel());
        ws.scratch[i].resize(layers_[i]->scratch_count);
        ws.dact[i + 1].resize(layers_[i]->out.numel());
    }
    return ws;
}

template <typename T>
const T* Network<T>::forward(const T* theta, const T* x, Workspace& ws) const {
    std::copy(x, x + input_.numel(), ws.input.begin());
    const T* cur = ws.input.data();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->forward(theta, cur, ws.act[i].data(), ws.scratch[i].data());
        cur = ws.act[i].data();
    }
    ws.forward_done = true;
    return cur;
}

template <typename T>
void Network<T>::backward(const T* theta, const T* dy, Workspace& ws, T* dtheta) const {
    if (!ws.forward_done)
        throw ValidationError("backward called before a completed forward pass");
    const std::size_t n = layers_.size();
    std::copy(dy, dy + output_shape().numel(), ws.dact[n].begin());
    for (std::size_t i = n; i-- > 0;) {
        const T* x_in = (i == 0) ? ws.input.data() : ws.act[i - 1].data();
        layers_[i]->backward(theta, x_in, ws.act[i].data(), ws.scratch[i].data(),
                             ws.dact[i + 1].data(), ws.dact[i].data(), dtheta);
    }
}

template <typename T>
std::string Network<T>::describe() const {
    std::ostringstream os;
    os << "input " << input_.str();
    Shape2 cur = input_;
    for (const auto& l : layers_) {
        cur = l->out;
        os << " -> " << l->describe() << " " << cur.str();
    }
    os << " [" << param_count_ << " params]";
    return os.str();
}

template class Network<float>;
template class Network<double>;

// ---------------------------------------------------------------------------
// Free ops
// ---------------------------------------------------------------------------

template <typename T>
void residual_add(const T* x, int x_ch, const T* fx, int fx_ch, int len, T* y) {
    if (x_ch != fx_ch && x_ch != 1)
        throw ShapeError("residual_add: channel mismatch without broadcast");
    for (int p = 0; p < len; ++p)
        for (int c = 0; c < fx_ch; ++c)
            y[std::size_t(p) * fx_ch + c] =
                (x_ch == 1 ? x[p] : x[std::size_t(p) * fx_ch + c]) +
                fx[std::size_t(p) * fx_ch + c];
}
template void residual_add<float>(const float*, int, const float*, int, int, float*);
template void residual_add<double>(const double*, int, const double*, int, int, double*);

template <typename T>
T l2_loss(const T* pred, const T* target, int n, T* grad_out) {
    T sq = T(0);
    for (int i = 0; i < n; ++i) {
        const T d = pred[i] - target[i];
        sq += d * d;
    }
    const T norm = std::sqrt(sq);
    if (grad_out) {
        if (norm > T(1e-30)) {
            for (int i = 0; i < n; ++i) grad_out[i] = (pred[i] - target[i]) / norm;
        } else {
            std::fill(grad_out, grad_out + n, T(0));
        }
    }
    return norm;
}
template float l2_loss<float>(const float*, const float*, int, float*);
template double l2_loss<double>(const double*, const double*, int, double*);

template <typename T>
void SgdOptimizer<T>::step(T* theta, const T* grad) {
    const T lr = static_cast<T>(cfg_.lr), mu = static_cast<T>(cfg_.momentum);
    if (cfg_.momentum == 0.0) {
        for (std::size_t i = 0; i < vel_.size(); ++i) theta[i] -= lr * grad[i];
    } else {
        for (std::size_t i = 0; i < vel_.size(); ++i) {
            vel_[i] = mu * vel_[i] + grad[i];
            theta[i] -= lr * vel_[i];
        }
    }
}
template class SgdOptimizer<float>;
template class SgdOptimizer<double>;

template <typename T>
void AdamOptimizer<T>::step(T* theta, const T* grad) {
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, t_);
    const double bc2 = 1.0 - std::pow(b2, t_);
    const double lr = cfg_.lr;
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const double g = grad[i];
        m_[i] = static_cast<T>(b1 * m_[i] + (1.0 - b1) * g);
        v_[i] = static_cast<T>(b2 * v_[i] + (1.0 - b2) * g * g);
        const double mh = m_[i] / bc1, vh = v_[i] / bc2;
        theta[i] -= static_cast<T>(lr * mh / (std::sqrt(vh) + cfg_.eps));
    }
}
template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

}  // namespace lwdinv::nn
