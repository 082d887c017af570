#pragma once

#include <array>

#include "lwdinv/em/coupling.hpp"
#include "lwdinv/em/hankel.hpp"
#include "lwdinv/em/medium.hpp"

namespace lwdinv::em {

enum class QuadMethod {
    Filter,         // fixed digital filter (default, fast)
    Adaptive,       // partition-extrapolation quadrature
    FilterChecked,  // filter cross-checked against adaptive; throws on mismatch
};

struct QuadratureConfig {
    QuadMethod method = QuadMethod::Filter;
    double rel_tol = 1e-11;       // adaptive target
    double check_tol = 1e-5;      // filter-vs-adaptive mismatch threshold
    int max_panels = 400;
    bool split_direct = true;     // same-layer direct term in closed form
    bool fast_filter = false;     // lighter filter (~3e-7) for bulk work
};

/// Semi-analytic coupling tensor for a dipole in an N-layer TI medium.
/// Converges to full_space_coupling as all boundaries recede. Positions
/// exactly on a layer boundary are rejected (nudge by 1e-6 m).
CouplingTensor layered_coupling(const LayeredMedium& medium,
                                const std::array<double, 3>& tx_pos,
                                const std::array<double, 3>& rx_pos,
                                const FrequencyConfig& freq,
                                const QuadratureConfig& quad = {});

}  // namespace lwdinv::em
