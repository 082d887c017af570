#include "lwdinv/instrument/tool.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace lwdinv::instrument {

namespace {

constexpr double kBoundaryNudge = 1e-6;  // m

// Keeps a depth off layer boundaries, preserving which side it is on.
double nudge_off_boundaries(double z, const std::vector<double>& zb, double eps) {
    for (double b : zb) {
        if (std::abs(z - b) < eps) return (z >= b) ? b + eps : b - eps;
    }
    return z;
}

struct BeddingFrame {
    double cb, sb;        // cos/sin beta
    double ah, atvd;      // rotation center, earth frame
    double z_off;         // bedding-frame depth of the rotation center
    double beta_deg;

    // Earth (h, tvd) -> bedding frame (x, z).
    std::array<double, 3> to_bed(double h, double tvd) const {
        const double dx = h - ah, dz = tvd - atvd;
        return {cb * dx - sb * dz, 0.0, sb * dx + cb * dz + z_off};
    }
};

// Tool-frame axial/cross couplings for one Tx-Rx pair. theta is the tool
// axis angle from the bedding normal.
struct PairCoupling {
    cplx hzz;  // tool-axis transmitter, tool-axis receiver
    cplx hzx;  // tool-axis transmitter, tool-x receiver
};

PairCoupling pair_coupling(const em::LayeredMedium& med, const BeddingFrame& bed,
                           const ToolState& st, double tx_off, double rx_off,
                           double freq_hz, const em::QuadratureConfig& quad) {
    const double theta = st.dip_deg - bed.beta_deg;  // relative dip
    const double rad = theta * M_PI / 180.0;
    const double ux = std::sin(rad), uz = std::cos(rad);

    auto center = bed.to_bed(st.horizontal, st.tvd);
    std::array<double, 3> tx = {center[0] + tx_off * ux, 0.0, center[2] + tx_off * uz};
    std::array<double, 3> rx = {center[0] + rx_off * ux, 0.0, center[2] + rx_off * uz};
    tx[2] = nudge_off_boundaries(tx[2], med.boundaries, kBoundaryNudge);
    rx[2] = nudge_off_boundaries(rx[2], med.boundaries, kBoundaryNudge);

    const em::FrequencyConfig freq(freq_hz);
    const em::CouplingTensor bed_t = em::layered_coupling(med, tx, rx, freq, quad);
    // Formation frame -> tool frame: rotate by -theta about the strike axis.
    const em::CouplingTensor tool_t = em::rotate_coupling(bed_t, -theta);
    return {tool_t(2, 2), tool_t(0, 2)};
}

}  // namespace

namespace {

std::vector<MeasurementSample> simulate_in_frame(const ToolSpec& tool,
                                                 const em::LayeredMedium& med,
                                                 const BeddingFrame& bed,
                                                 const ToolState& state,
                                                 std::optional<double> freq_override,
                                                 const em::QuadratureConfig& quad) {
    const ToolState& st = state;
    const double freq = freq_override.value_or(tool.frequency);
    std::vector<MeasurementSample> out;
    try {
        if (tool.transmitters.size() == 2 && tool.receivers.size() == 2) {
            // Borehole-compensated attenuation/phase: near/far receiver ratio
            // for each transmitter, averaged.
            double att = 0.0, ph = 0.0;
            for (double txo : tool.transmitters) {
                double near_o = tool.receivers[0], far_o = tool.receivers[1];
                if (std::abs(txo - near_o) > std::abs(txo - far_o)) std::swap(near_o, far_o);
                const cplx h_near =
                    pair_coupling(med, bed, st, txo, near_o, freq, quad).hzz;
                const cplx h_far =
                    pair_coupling(med, bed, st, txo, far_o, freq, quad).hzz;
                att += 0.5 * attenuation_db(h_near, h_far);
                ph += 0.5 * phase_diff_deg(h_near, h_far);
            }
            out.push_back({att, wrap_phase_deg(ph), ChannelSet::M1});
        } else if (tool.transmitters.size() == 1 && tool.receivers.size() == 1) {
            const PairCoupling pc = pair_coupling(med, bed, st, tool.transmitters[0],
                                                  tool.receivers[0], freq, quad);
            // Single-transmitter channels: ratio against unity.
            out.push_back({attenuation_db(pc.hzz, 1.0), phase_diff_deg(pc.hzz, 1.0),
                           ChannelSet::M2});
            MeasurementSample g = geosignal(pc.hzz, pc.hzx);
            out.push_back(g);
        } else {
            throw ValidationError("unsupported tool layout: " + tool.name);
        }
    } catch (const NumericalError& e) {
        throw NumericalError("at position (h=" + std::to_string(st.horizontal) +
                             ", tvd=" + std::to_string(st.tvd) + "): " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError("at position (h=" + std::to_string(st.horizontal) +
                              ", tvd=" + std::to_string(st.tvd) + "): " + e.what());
    }
    return out;
}

}  // namespace

std::vector<MeasurementSample> simulate_position(
    const ToolSpec& tool, const formation::FormationModel& f, const ToolState& state,
    double anchor_h, double anchor_tvd, std::optional<double> freq_override,
    const em::QuadratureConfig& quad) {
    const em::LayeredMedium med = formation::local_three_layer(f, anchor_tvd);
    const BeddingFrame bed{std::cos(f.beta_deg * M_PI / 180.0),
                           std::sin(f.beta_deg * M_PI / 180.0), anchor_h, anchor_tvd,
                           anchor_tvd, f.beta_deg};
    return simulate_in_frame(tool, med, bed, state, freq_override, quad);
}

std::vector<MeasurementSample> simulate_position_global(
    const ToolSpec& tool, const em::LayeredMedium& med, double beta_deg,
    const ToolState& state, std::optional<double> freq_override,
    const em::QuadratureConfig& quad) {
    med.validate();
    const BeddingFrame bed{std::cos(beta_deg * M_PI / 180.0),
                           std::sin(beta_deg * M_PI / 180.0), 0.0, 0.0, 0.0, beta_deg};
    return simulate_in_frame(tool, med, bed, state, freq_override, quad);
}

std::vector<double> simulate_log_global(const em::LayeredMedium& med, double beta_deg,
                                        const std::vector<formation::TrajectoryPoint>& positions,
                                        const std::vector<ChannelSet>& sets,
                                        int threads, const em::QuadratureConfig& quad) {
    if (sets.empty()) throw ValidationError("at least one channel set required");
    std::vector<ChannelSet> s(sets);
    std::sort(s.begin(), s.end());
    const bool want_m1 = std::find(s.begin(), s.end(), ChannelSet::M1) != s.end();
    const bool want_m2 = std::find(s.begin(), s.end(), ChannelSet::M2) != s.end();
    const bool want_m3 = std::find(s.begin(), s.end(), ChannelSet::M3) != s.end();
    const ToolSpec coax = ToolSpec::conventional_lwd();
    const ToolSpec deep = ToolSpec::deep_azimuthal();
    const std::size_t n = positions.size();
    const std::size_t nc = 2 * s.size();
    std::vector<double> out(n * nc);
    std::vector<std::string> errors(n);
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(nthreads)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        try {
            const auto& p = positions[i];
            const ToolState st{p.horizontal, p.tvd, p.dip_deg};
            std::size_t c = 0;
            if (want_m1) {
                const auto m1 = simulate_position_global(coax, med, beta_deg, st,
                                                         std::nullopt, quad);
                out[i * nc + c++] = m1[0].attenuation_db;
                out[i * nc + c++] = m1[0].phase_deg;
            }
            if (want_m2 || want_m3) {
                const auto dd = simulate_position_global(deep, med, beta_deg, st,
                                                         std::nullopt, quad);
                if (want_m2) {
                    out[i * nc + c++] = dd[0].attenuation_db;
                    out[i * nc + c++] = dd[0].phase_deg;
                }
                if (want_m3) {
                    out[i * nc + c++] = dd[1].attenuation_db;
                    out[i * nc + c++] = dd[1].phase_deg;
                }
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw NumericalError("forward simulation failed: " + e);
    return out;
}

std::vector<std::string> channel_names(const std::vector<ChannelSet>& sets) {
    std::vector<ChannelSet> s(sets);
    std::sort(s.begin(), s.end());
    std::vector<std::string> names;
    for (ChannelSet cs : s) {
        const std::string tag = cs == ChannelSet::M1 ? "M1" : cs == ChannelSet::M2 ? "M2" : "M3";
        names.push_back(tag + ".att");
        names.push_back(tag + ".phase");
    }
    return names;
}

std::vector<double> simulate_window(const formation::FormationModel& f,
                                    const formation::Trajectory& traj,
                                    const std::vector<ChannelSet>& sets,
                                    const em::QuadratureConfig& quad) {
    if (sets.empty()) throw ValidationError("at least one channel set required");
    std::vector<ChannelSet> s(sets);
    std::sort(s.begin(), s.end());
    const bool want_m1 = std::find(s.begin(), s.end(), ChannelSet::M1) != s.end();
    const bool want_m2 = std::find(s.begin(), s.end(), ChannelSet::M2) != s.end();
    const bool want_m3 = std::find(s.begin(), s.end(), ChannelSet::M3) != s.end();

    const auto& anchor = traj.anchor();
    const ToolSpec coax = ToolSpec::conventional_lwd();
    const ToolSpec deep = ToolSpec::deep_azimuthal();

    const std::size_t t_count = traj.size();
    const std::size_t n_ch = 2 * s.size();
    std::vector<double> out(t_count * n_ch);
    for (std::size_t i = 0; i < t_count; ++i) {
        const auto& p = traj.positions[i];
        const ToolState st{p.horizontal, p.tvd, p.dip_deg};
        std::size_t c = 0;
        if (want_m1) {
            const auto m1 = simulate_position(coax, f, st, anchor.horizontal,
                                              anchor.tvd, std::nullopt, quad);
            out[i * n_ch + c++] = m1[0].attenuation_db;
            out[i * n_ch + c++] = m1[0].phase_deg;
        }
        if (want_m2 || want_m3) {
            const auto deep_samples = simulate_position(deep, f, st, anchor.horizontal,
                                                        anchor.tvd, std::nullopt, quad);
            if (want_m2) {
                out[i * n_ch + c++] = deep_samples[0].attenuation_db;
                out[i * n_ch + c++] = deep_samples[0].phase_deg;
            }
            if (want_m3) {
                out[i * n_ch + c++] = deep_samples[1].attenuation_db;
                out[i * n_ch + c++] = deep_samples[1].phase_deg;
            }
        }
    }
    return out;
}

}  // namespace lwdinv::instrument
