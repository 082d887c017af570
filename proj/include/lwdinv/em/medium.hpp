#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "lwdinv/core/errors.hpp"
#include "lwdinv/core/numeric.hpp"

namespace lwdinv::em {

inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double vacuum_permeability = 4.0e-7 * M_PI;     // H/m

/// Transversely isotropic medium: horizontal/vertical resistivity plus
/// scalar permittivity and permeability.
struct MediumProperties {
    double rho_h = 1.0;  // ohm*m
    double rho_v = 1.0;  // ohm*m
    double permittivity = vacuum_permittivity;
    double permeability = vacuum_permeability;

    static MediumProperties isotropic(double rho) { return {rho, rho}; }

    void validate() const {
        if (!(rho_h > 0.0) || !std::isfinite(rho_h) || !(rho_v > 0.0) ||
            !std::isfinite(rho_v))
            throw ValidationError("medium resistivities must be finite and > 0");
        if (!(permittivity >= 0.0) || !std::isfinite(permittivity))
            throw ValidationError("permittivity must be finite and >= 0");
        if (!(permeability > 0.0) || !std::isfinite(permeability))
            throw ValidationError("permeability must be finite and > 0");
    }

    bool isotropic_medium() const { return rho_h == rho_v; }
};

/// Horizontal layering along z (depth increases downward). boundaries[i]
/// separates layers[i] (above) from layers[i+1] (below).
struct LayeredMedium {
    std::vector<MediumProperties> layers;
    std::vector<double> boundaries;

    static LayeredMedium homogeneous(const MediumProperties& m) {
        return {{m}, {}};
    }

    void validate() const {
        if (layers.empty()) throw ValidationError("layer count must be >= 1");
        if (boundaries.size() + 1 != layers.size())
            throw ValidationError("boundary count must equal layer count - 1");
        for (std::size_t i = 1; i < boundaries.size(); ++i)
            if (!(boundaries[i] > boundaries[i - 1]))
                throw ValidationError("boundaries must be strictly increasing");
        for (const auto& m : layers) m.validate();
    }

    /// Index of the layer containing depth z; throws if z sits exactly on
    /// a boundary (callers nudge by 1e-6 m instead).
    std::size_t layer_of(double z) const {
        for (std::size_t i = 0; i < boundaries.size(); ++i) {
            if (z == boundaries[i])
                throw BoundaryCollisionError(
                    "point at depth " + std::to_string(z) +
                    " lies exactly on layer boundary " + std::to_string(i));
            if (z < boundaries[i]) return i;
        }
        return layers.size() - 1;
    }
};

/// Operating frequency. time_sign=-1 selects the e^{-i omega t} convention
/// (the default); +1 conjugates every coupling.
struct FrequencyConfig {
    double frequency = 0.0;  // Hz
    int time_sign = -1;

    explicit FrequencyConfig(double f = 1.0, int sign = -1)
        : frequency(f), time_sign(sign) {
        if (!(f > 0.0) || !std::isfinite(f))
            throw ValidationError("frequency must be finite and > 0");
        if (sign != -1 && sign != 1)
            throw ValidationError("time convention sign must be -1 or +1");
    }

    double angular_frequency() const { return 2.0 * M_PI * frequency; }
};

/// Principal square root by real arithmetic (Re >= 0), a few times faster
/// than std::sqrt on complex arguments.
inline cplx csqrt_pos(const cplx& z) {
    const double a = z.real(), b = z.imag();
    const double r = std::hypot(a, b);
    if (r == 0.0) return {0.0, 0.0};
    const double w = std::sqrt(0.5 * (r + std::abs(a)));
    if (a >= 0.0) return {w, b / (2.0 * w)};
    const double im = (b >= 0.0) ? w : -w;
    return {std::abs(b) / (2.0 * w), im};
}

/// Spectral-domain constants of one medium at one frequency, e^{-i omega t}
/// convention. sigma_t = sigma - i omega eps; kh^2 = i omega mu sigma_th;
/// lambda^2 = sigma_th / sigma_tv; kv = kh / lambda.
struct MediumWavenumbers {
    cplx sigma_th, sigma_tv;  // complex conductivities
    cplx kh, kv, lambda;
    cplx kh2, lambda2;
    bool isotropic = false;

    MediumWavenumbers(const MediumProperties& m, double omega) {
        const cplx iwe(0.0, omega * m.permittivity);
        sigma_th = cplx(1.0 / m.rho_h, 0.0) - iwe;
        sigma_tv = cplx(1.0 / m.rho_v, 0.0) - iwe;
        const cplx iwm(0.0, omega * m.permeability);
        kh = std::sqrt(iwm * sigma_th);
        if (kh.imag() < 0.0) kh = -kh;
        lambda = std::sqrt(sigma_th / sigma_tv);
        kv = kh / lambda;
        kh2 = kh * kh;
        lambda2 = lambda * lambda;
        isotropic = (m.rho_h == m.rho_v);
    }

    /// Vertical TE decay exponent u_h(kappa) = sqrt(kappa^2 - kh^2).
    cplx u_te(double kappa) const { return csqrt_pos(cplx(kappa * kappa) - kh2); }

    /// Vertical TM decay exponent u_v(kappa) = sqrt(lambda^2 kappa^2 - kh^2).
    cplx u_tm(double kappa) const {
        return csqrt_pos(lambda2 * (kappa * kappa) - kh2);
    }
};

}  // namespace lwdinv::em
