#pragma once

#include <optional>
#include <vector>

#include "lwdinv/em/layered.hpp"
#include "lwdinv/formation/model.hpp"
#include "lwdinv/instrument/channels.hpp"

namespace lwdinv::instrument {

/// Axial tool description; offsets are signed distances from tool center
/// along the tool axis, in meters.
struct ToolSpec {
    std::string name;
    double frequency = 0.0;  // Hz
    std::vector<double> transmitters;
    std::vector<double> receivers;

    /// 500 kHz co-axial tool: Tx at +-0.9 m, Rx at +-0.20 m.
    static ToolSpec conventional_lwd() {
        return {"conventional_lwd", 5.0e5, {-0.9, 0.9}, {-0.2, 0.2}};
    }

    /// 10 kHz deep azimuthal tool: one Tx and one Rx 12 m apart.
    static ToolSpec deep_azimuthal() {
        return {"deep_azimuthal", 1.0e4, {-6.0}, {6.0}};
    }
};

struct ToolState {
    double horizontal = 0.0;  // m
    double tvd = 0.0;         // m, down positive
    double dip_deg = 90.0;    // tool dip from vertical
};

/// Channels measured at one position of one tool in the local formation
/// model anchored at (anchor_h, anchor_tvd). The co-axial tool yields one
/// borehole-compensated M1 sample; the deep tool yields M2 and the M3
/// geosignal.
std::vector<MeasurementSample> simulate_position(
    const ToolSpec& tool, const formation::FormationModel& f, const ToolState& state,
    double anchor_h, double anchor_tvd,
    std::optional<double> freq_override = std::nullopt,
    const em::QuadratureConfig& quad = {});

/// Same measurement in a global layered model: `med` holds bedding-frame
/// boundary depths (the frame is the earth frame rotated by -beta about
/// the origin), shared by every logging position.
std::vector<MeasurementSample> simulate_position_global(
    const ToolSpec& tool, const em::LayeredMedium& med, double beta_deg,
    const ToolState& state, std::optional<double> freq_override = std::nullopt,
    const em::QuadratureConfig& quad = {});

/// Whole measurement log of the selected channel sets along a trajectory
/// through a global layered model.
std::vector<double> simulate_log_global(const em::LayeredMedium& med, double beta_deg,
                                        const std::vector<formation::TrajectoryPoint>& positions,
                                        const std::vector<ChannelSet>& sets,
                                        int threads = 0,
                                        const em::QuadratureConfig& quad = {});

/// Channel names for a channel-set selection, in feature order.
std::vector<std::string> channel_names(const std::vector<ChannelSet>& sets);

/// Simulates a full trajectory window against the formation anchored at the
/// last position. Returns positions x channels, row-major, two channels
/// (attenuation, phase) per requested set in M1 < M2 < M3 order.
std::vector<double> simulate_window(const formation::FormationModel& f,
                                    const formation::Trajectory& traj,
                                    const std::vector<ChannelSet>& sets,
                                    const em::QuadratureConfig& quad = {});

}  // namespace lwdinv::instrument
