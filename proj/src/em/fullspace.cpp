#include <cmath>

#include "lwdinv/core/numeric.hpp"
#include "lwdinv/em/coupling.hpp"

namespace lwdinv::em {

// TE/TM split of the whole-space dipole field in a TI medium. The vertical
// dipole only excites the TE mode and sees kh alone; horizontal dipoles mix
// a TE part built on the spherical wave exp(i kh R)/R with a TM part on the
// scaled wave exp(i kv A)/A, A = sqrt(rho^2 + lambda^2 z^2). The transverse
// block is assembled from the radial derivative V = dW/drho of the
// "in-plane integrated" potentials, which obey dV/drho = -V/rho - g, so
// only V itself and the two spherical kernels are ever needed.
CouplingTensor full_space_coupling(const MediumProperties& medium,
                                   const std::array<double, 3>& offset,
                                   const FrequencyConfig& freq) {
    medium.validate();
    for (double c : offset)
        if (!std::isfinite(c)) throw ValidationError("offset has non-finite component");
    const double x = offset[0], y = offset[1], z = offset[2];
    const double rho2 = x * x + y * y;
    const double r2 = rho2 + z * z;
    if (r2 == 0.0) throw DegenerateGeometryError("zero transmitter-receiver offset");

    const double omega = freq.angular_frequency();
    const MediumWavenumbers wn(medium, omega);
    const cplx k = wn.kh;
    const cplx k2 = k * k;
    const cplx lam = wn.lambda;

    const double R = std::sqrt(r2);
    const double az = std::abs(z);
    const double rho = std::sqrt(rho2);
    const cplx i1(0.0, 1.0);

    const cplx ez = std::exp(i1 * k * az);
    const cplx gh = std::exp(i1 * k * R) / (4.0 * M_PI * R);

    // TM scaled distance and kernel.
    const cplx lam_az = lam * az;
    const cplx A = std::sqrt(cplx(rho2) + lam_az * lam_az);
    const cplx gv = std::exp(i1 * wn.kv * A) / (4.0 * M_PI * lam * A);

    // d^2/dz^2 of gh, and the radial-vertical coefficient shared by zx/xz.
    const cplx z2R2 = cplx(z * z / r2);
    const cplx rho2R3 = cplx(rho2 / (r2 * R));
    const cplx gzz =
        gh * (z2R2 * (-k2 - 2.0 * i1 * k / R + 2.0 / r2) + rho2R3 * (i1 * k - 1.0 / R));

    CouplingTensor out;
    out(2, 2) = k2 * gh + gzz;

    const cplx t_cross = gh * (3.0 / r2 - 3.0 * i1 * k / R - k2);
    out(0, 2) = out(2, 0) = cplx(x * z / r2) * t_cross;
    out(1, 2) = out(2, 1) = cplx(y * z / r2) * t_cross;

    if (rho2 < 1e-24 * r2) {
        // On-axis limit: the transverse block is isotropic in (x,y).
        const cplx gv0 = ez / (4.0 * M_PI * lam * lam * az);
        const cplx gzz0 = ez / (4.0 * M_PI * az) * (-k2 - 2.0 * i1 * k / az + 2.0 / (z * z));
        const cplx hxx = 0.5 * (k2 * gv0 - gzz0);
        out(0, 0) = out(1, 1) = hxx;
    } else {
        // Stable small-rho evaluation through expm1-type differences.
        const double dlt = rho2 / (R + az);            // R - |z|
        const cplx w_h = i1 * k * dlt;                 // phase excess, TE
        const cplx c1h = cexpm1_over(w_h);             // (e^w - 1)/w
        const cplx eikd = 1.0 + w_h * c1h;             // e^{i k (R-|z|)}
        const cplx chi = wn.kv * cplx(rho2) / (A + lam_az);  // kv A - k |z|
        const cplx c1v = cexpm1_over(i1 * chi);

        // P = d^2/dz^2 V_h and Q = kh^2 V_v, both O(rho).
        const cplx P = -(ez * rho / (4.0 * M_PI)) *
                       (eikd / (r2 * R) - k2 * c1h * cplx(z * z) / ((R + az) * r2) -
                        i1 * k / r2);
        const cplx Q = -k2 * ez * rho * c1v / (4.0 * M_PI * lam * (A + lam_az));

        const cplx pq_r3 = (P + Q) / (rho2 * rho);
        const cplx k2gv = k2 * gv;
        out(0, 0) = cplx(y * y - x * x) * pq_r3 - cplx(x * x / rho2) * gzz +
                    cplx(y * y / rho2) * k2gv;
        out(1, 1) = cplx(x * x - y * y) * pq_r3 - cplx(y * y / rho2) * gzz +
                    cplx(x * x / rho2) * k2gv;
        out(0, 1) = out(1, 0) =
            -cplx(x * y / rho2) * (2.0 * (P + Q) / rho + gzz + k2gv);
    }

    if (freq.time_sign == 1) return out.conjugated();
    return out;
}

CouplingTensor rotate_coupling(const CouplingTensor& t, double relative_dip_deg) {
    const double g = relative_dip_deg * M_PI / 180.0;
    const double c = std::cos(g), s = std::sin(g);
    // R_y(g): x' = c x + s z, y' = y, z' = -s x + c z
    const double rot[3][3] = {{c, 0.0, s}, {0.0, 1.0, 0.0}, {-s, 0.0, c}};
    CouplingTensor tmp, out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            cplx acc = 0.0;
            for (int m = 0; m < 3; ++m) acc += rot[i][m] * t(m, j);
            tmp(i, j) = acc;
        }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            cplx acc = 0.0;
            for (int m = 0; m < 3; ++m) acc += tmp(i, m) * rot[j][m];
            out(i, j) = acc;
        }
    return out;
}

}  // namespace lwdinv::em
