#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "lwdinv/core/errors.hpp"
#include "lwdinv/core/rng.hpp"

namespace lwdinv::nn {

/// Dense real array with an optional same-shape gradient slot.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;
    std::vector<T> grad;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel(), T(0));
    }

    std::size_t numel() const {
        return std::accumulate(shape.begin(), shape.end(), std::size_t(1),
                               std::multiplies<>());
    }

    void alloc_grad() { grad.assign(numel(), T(0)); }

    void check() const {
        if (data.size() != numel()) throw ShapeError("tensor data/shape mismatch");
        if (!grad.empty() && grad.size() != numel())
            throw ShapeError("tensor grad/shape mismatch");
    }
};

enum class InitKind { GlorotNormal, GlorotUniform };

/// Zero-mean draws with Var = 2/(fan_in+fan_out); uniform mode uses the
/// variance-matching bounds +-sqrt(6/(fan_in+fan_out)).
template <typename T>
void glorot_fill(T* dst, std::size_t n, std::size_t fan_in, std::size_t fan_out,
                 InitKind kind, Rng& rng) {
    if (kind == InitKind::GlorotNormal) {
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < n; ++i)
            dst[i] = static_cast<T>(std * rng.normal());
    } else {
        const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < n; ++i)
            dst[i] = static_cast<T>(rng.uniform(-lim, lim));
    }
}

template <typename T>
Tensor<T> glorot_init(std::size_t fan_in, std::size_t fan_out, InitKind kind, Rng& rng) {
    Tensor<T> t({fan_out, fan_in});
    glorot_fill(t.data.data(), t.numel(), fan_in, fan_out, kind, rng);
    return t;
}

}  // namespace lwdinv::nn
