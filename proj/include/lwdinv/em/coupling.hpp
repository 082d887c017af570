#pragma once

#include <array>
#include <complex>

#include "lwdinv/em/medium.hpp"

namespace lwdinv::em {

/// 3x3 magnetic coupling, A/m per unit dipole moment (1 A*m^2).
/// Rows index the receiver field component, columns the transmitter
/// orientation: h(i,j) is the i-component of H produced by a j-oriented
/// unit dipole.
struct CouplingTensor {
    std::array<std::array<cplx, 3>, 3> h{};

    cplx& operator()(int row, int col) { return h[row][col]; }
    const cplx& operator()(int row, int col) const { return h[row][col]; }

    CouplingTensor transposed() const {
        CouplingTensor t;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t.h[i][j] = h[j][i];
        return t;
    }

    CouplingTensor conjugated() const {
        CouplingTensor t;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t.h[i][j] = std::conj(h[i][j]);
        return t;
    }

    bool all_finite() const {
        for (const auto& row : h)
            for (const auto& v : row)
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }
};

/// Closed-form coupling tensor for a point dipole in a homogeneous TI
/// full space. Reduces to the textbook dipole solution for isotropic media.
CouplingTensor full_space_coupling(const MediumProperties& medium,
                                   const std::array<double, 3>& offset,
                                   const FrequencyConfig& freq);

/// Similarity transform R * H * R^T where R rotates by `relative_dip_deg`
/// about the strike (y) axis. Maps formation-frame couplings to tool frame.
CouplingTensor rotate_coupling(const CouplingTensor& t, double relative_dip_deg);

}  // namespace lwdinv::em
