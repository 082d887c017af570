#pragma once

#include <cmath>
#include <complex>

#include "lwdinv/core/errors.hpp"
#include "lwdinv/core/numeric.hpp"

namespace lwdinv::instrument {

enum class ChannelSet { M1 = 0, M2 = 1, M3 = 2 };

struct MeasurementSample {
    double attenuation_db = 0.0;
    double phase_deg = 0.0;
    ChannelSet channel_set = ChannelSet::M1;
};

/// Wraps an angle in degrees to (-180, 180].
inline double wrap_phase_deg(double deg) {
    double x = std::fmod(deg, 360.0);
    if (x > 180.0) x -= 360.0;
    if (x <= -180.0) x += 360.0;
    return x;
}

/// 20 log10(e) * ln(|h1|/|h2|)  ==  20 log10(|h1|/|h2|), in dB.
inline double attenuation_db(cplx h1, cplx h2) {
    const double a1 = std::abs(h1), a2 = std::abs(h2);
    if (a1 == 0.0 || a2 == 0.0)
        throw SingularFieldError("attenuation of a zero-magnitude field");
    return 20.0 * std::log10(a1 / a2);
}

/// (ph(h1) - ph(h2)) * 180/pi, wrapped to (-180, 180].
inline double phase_diff_deg(cplx h1, cplx h2) {
    if (std::abs(h1) == 0.0 || std::abs(h2) == 0.0)
        throw SingularFieldError("phase of a zero-magnitude field");
    const double d = (std::arg(h1) - std::arg(h2)) * 180.0 / M_PI;
    return wrap_phase_deg(d);
}

/// Geosignal g = ln((Hzz - Hzx)/(Hzz + Hzx)), split into attenuation and
/// phase like the other channels.
inline MeasurementSample geosignal(cplx hzz, cplx hzx) {
    const cplx num = hzz - hzx, den = hzz + hzx;
    if (std::abs(num) == 0.0 || std::abs(den) == 0.0)
        throw SingularFieldError("degenerate geosignal ratio");
    return {attenuation_db(num, den), phase_diff_deg(num, den), ChannelSet::M3};
}

}  // namespace lwdinv::instrument
