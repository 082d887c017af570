#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "lwdinv/core/errors.hpp"
#include "lwdinv/core/rng.hpp"
#include "lwdinv/em/medium.hpp"

namespace lwdinv::formation {

/// Local three-layer description around one logging position: host layer
/// resistivities (rho_h, rho_v), isotropic shoulder resistivities
/// (rho_u, rho_l), true-vertical distances to the bed boundaries
/// (d_u, d_l) and the common formation dip beta.
struct FormationModel {
    double rho_h = 1.0;
    double rho_v = 1.0;
    double rho_u = 1.0;
    double rho_l = 1.0;
    double d_u = 1.0;
    double d_l = 1.0;
    double beta_deg = 0.0;

    double anisotropy() const { return rho_v / rho_h; }

    void validate() const {
        if (!(rho_h > 0.0) || !(rho_v > 0.0))
            throw ValidationError("host resistivities must be > 0");
        if (rho_v < rho_h * (1.0 - 1e-12) || rho_v > 10.0 * rho_h * (1.0 + 1e-12))
            throw ValidationError("anisotropy constraint violated: need rho_h <= rho_v <= 10 rho_h");
        if (rho_u < 1.0 || rho_u > 1e3 || rho_l < 1.0 || rho_l > 1e3)
            throw ValidationError("shoulder resistivity outside [1, 1e3] ohm*m");
        if (d_u < 0.01 || d_u > 10.0 || d_l < 0.01 || d_l > 10.0)
            throw ValidationError("boundary distance outside [0.01, 10] m");
        if (beta_deg < -10.0 || beta_deg > 10.0)
            throw ValidationError("formation dip outside [-10, 10] degrees");
    }
};

struct TrajectoryPoint {
    double horizontal = 0.0;  // m
    double tvd = 0.0;         // m, down positive
    double dip_deg = 90.0;    // from vertical
};

struct Trajectory {
    double alpha_ini_deg = 90.0;
    double alpha_v_deg = 0.0;  // per-step dip increment
    double step = 0.3048;      // one foot
    std::vector<TrajectoryPoint> positions;

    std::size_t size() const { return positions.size(); }
    const TrajectoryPoint& anchor() const { return positions.back(); }
};

/// Dip at the i-th logging position (1-based): alpha_ini + (i-1) alpha_v.
inline double trajectory_dip(double alpha_ini_deg, double alpha_v_deg, int i) {
    if (i < 1) throw RangeError("trajectory position index must be >= 1");
    return alpha_ini_deg + (i - 1) * alpha_v_deg;
}

/// Integrates the dip sequence: position 1 at the origin, each step
/// advancing `step` meters along the departing position's dip direction.
Trajectory build_trajectory(double alpha_ini_deg, double alpha_v_deg, int t_count,
                            double step = 0.3048);

/// Bedding-frame layered medium for the local model anchored at
/// `anchor_tvd`: isotropic rho_u above, TI host between, isotropic rho_l
/// below. Boundary depths carry the cos(beta) projection of the
/// true-vertical distances onto the bedding normal.
em::LayeredMedium local_three_layer(const FormationModel& f, double anchor_tvd);

/// Sampling ranges (log10/degree scale) and the trajectory window size.
/// The ranges are fixed by the physics constraints; validate() rejects any
/// drift from them.
struct SamplerConfig {
    std::uint64_t seed = 0;
    int t_count = 65;
    double step = 0.3048;

    // log10 ranges
    double log_rho_shoulder_lo = 0.0, log_rho_shoulder_hi = 3.0;
    double log_a_lo = 0.0, log_a_hi = 1.0;
    double log_rho_h_lo = 0.0, log_rho_h_cap = 3.0;  // hi = cap - log a
    double log_d_lo = -2.0, log_d_hi = 1.0;
    double beta_lo = -10.0, beta_hi = 10.0;
    double alpha_ini_lo = 83.0, alpha_ini_hi = 97.0;
    double alpha_v_lo = -0.045, alpha_v_hi = 0.045;

    void validate() const;
};

/// Uniform draws on the log/angle scale; the anisotropy constraint holds by
/// construction (log rho_h <= 3 - log a).
FormationModel sample_formation(const SamplerConfig& cfg, Rng& rng);
Trajectory sample_trajectory(const SamplerConfig& cfg, Rng& rng);

inline constexpr int kNumTargets = 7;
extern const std::array<const char*, kNumTargets> kTargetNames;

/// Per-parameter [lo, hi] used by min-max target scaling, on the
/// log10/degree scale, ordered as kTargetNames.
std::array<std::array<double, 2>, kNumTargets> target_ranges(const SamplerConfig& cfg);

/// FormationModel -> (log rho_h, log a, log rho_u, log rho_l, log d_u,
/// log d_l, beta) on the physical log/angle scale.
std::array<double, kNumTargets> to_log_params(const FormationModel& f);
FormationModel from_log_params(const std::array<double, kNumTargets>& p);

}  // namespace lwdinv::formation
