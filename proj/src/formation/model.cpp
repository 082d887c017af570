#include "lwdinv/formation/model.hpp"

namespace lwdinv::formation {

const std::array<const char*, kNumTargets> kTargetNames = {
    "log_rho_h", "log_a", "log_rho_u", "log_rho_l", "log_d_u", "log_d_l", "beta"};

Trajectory build_trajectory(double alpha_ini_deg, double alpha_v_deg, int t_count,
                            double step) {
    if (t_count < 1) throw ValidationError("trajectory needs at least one position");
    if (!(step > 0.0)) throw ValidationError("trajectory step must be > 0");
    Trajectory tr;
    tr.alpha_ini_deg = alpha_ini_deg;
    tr.alpha_v_deg = alpha_v_deg;
    tr.step = step;
    tr.positions.resize(t_count);
    double h = 0.0, z = 0.0;
    for (int i = 0; i < t_count; ++i) {
        const double dip = trajectory_dip(alpha_ini_deg, alpha_v_deg, i + 1);
        tr.positions[i] = {h, z, dip};
        const double rad = dip * M_PI / 180.0;
        h += step * std::sin(rad);
        z += step * std::cos(rad);
    }
    return tr;
}

em::LayeredMedium local_three_layer(const FormationModel& f, double anchor_tvd) {
    f.validate();
    const double cb = std::cos(f.beta_deg * M_PI / 180.0);
    em::LayeredMedium med;
    med.layers = {em::MediumProperties::isotropic(f.rho_u),
                  {f.rho_h, f.rho_v, em::vacuum_permittivity, em::vacuum_permeability},
                  em::MediumProperties::isotropic(f.rho_l)};
    med.boundaries = {anchor_tvd - f.d_u * cb, anchor_tvd + f.d_l * cb};
    med.validate();
    return med;
}

void SamplerConfig::validate() const {
    if (t_count < 1) throw ValidationError("sampler t_count must be >= 1");
    if (!(step > 0.0)) throw ValidationError("sampler step must be > 0");
    const bool ok = log_rho_shoulder_lo == 0.0 && log_rho_shoulder_hi == 3.0 &&
                    log_a_lo == 0.0 && log_a_hi == 1.0 && log_rho_h_lo == 0.0 &&
                    log_rho_h_cap == 3.0 && log_d_lo == -2.0 && log_d_hi == 1.0 &&
                    beta_lo == -10.0 && beta_hi == 10.0 && alpha_ini_lo == 83.0 &&
                    alpha_ini_hi == 97.0 && alpha_v_lo == -0.045 && alpha_v_hi == 0.045;
    if (!ok)
        throw ValidationError("sampler ranges drifted from the physical constraints");
}

FormationModel sample_formation(const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    const double log_a = rng.uniform(cfg.log_a_lo, cfg.log_a_hi);
    const double log_rho_h = rng.uniform(cfg.log_rho_h_lo, cfg.log_rho_h_cap - log_a);
    const double log_rho_u = rng.uniform(cfg.log_rho_shoulder_lo, cfg.log_rho_shoulder_hi);
    const double log_rho_l = rng.uniform(cfg.log_rho_shoulder_lo, cfg.log_rho_shoulder_hi);
    const double log_d_u = rng.uniform(cfg.log_d_lo, cfg.log_d_hi);
    const double log_d_l = rng.uniform(cfg.log_d_lo, cfg.log_d_hi);
    const double beta = rng.uniform(cfg.beta_lo, cfg.beta_hi);
    FormationModel f;
    f.rho_h = std::pow(10.0, log_rho_h);
    f.rho_v = std::pow(10.0, log_rho_h + log_a);
    f.rho_u = std::pow(10.0, log_rho_u);
    f.rho_l = std::pow(10.0, log_rho_l);
    f.d_u = std::pow(10.0, log_d_u);
    f.d_l = std::pow(10.0, log_d_l);
    f.beta_deg = beta;
    return f;
}

Trajectory sample_trajectory(const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    const double a0 = rng.uniform(cfg.alpha_ini_lo, cfg.alpha_ini_hi);
    const double av = rng.uniform(cfg.alpha_v_lo, cfg.alpha_v_hi);
    return build_trajectory(a0, av, cfg.t_count, cfg.step);
}

std::array<std::array<double, 2>, kNumTargets> target_ranges(const SamplerConfig& cfg) {
    return {{{cfg.log_rho_h_lo, cfg.log_rho_h_cap},
             {cfg.log_a_lo, cfg.log_a_hi},
             {cfg.log_rho_shoulder_lo, cfg.log_rho_shoulder_hi},
             {cfg.log_rho_shoulder_lo, cfg.log_rho_shoulder_hi},
             {cfg.log_d_lo, cfg.log_d_hi},
             {cfg.log_d_lo, cfg.log_d_hi},
             {cfg.beta_lo, cfg.beta_hi}}};
}

std::array<double, kNumTargets> to_log_params(const FormationModel& f) {
    return {std::log10(f.rho_h), std::log10(f.rho_v / f.rho_h), std::log10(f.rho_u),
            std::log10(f.rho_l), std::log10(f.d_u),  std::log10(f.d_l),
            f.beta_deg};
}

FormationModel from_log_params(const std::array<double, kNumTargets>& p) {
    FormationModel f;
    f.rho_h = std::pow(10.0, p[0]);
    f.rho_v = std::pow(10.0, p[0] + p[1]);
    f.rho_u = std::pow(10.0, p[2]);
    f.rho_l = std::pow(10.0, p[3]);
    f.d_u = std::pow(10.0, p[4]);
    f.d_l = std::pow(10.0, p[5]);
    f.beta_deg = p[6];
    return f;
}

}  // namespace lwdinv::formation
