#include "lwdinv/em/layered.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lwdinv/core/errors.hpp"

namespace lwdinv::em {

namespace {

// Spectral-domain two-point solver for one transverse wavenumber. The TE
// potential is H_z with (psi, psi') continuous across interfaces; the TM
// potential is phi = sigma_tv * E_z with (phi, phi'/sigma_th) continuous.
// Within each layer psi'' = u^2 psi, u = u_te or u_tm. Wave coefficients
// are referenced to the layer's own boundaries so every stored exponential
// decays: layer j carries D_j e^{-u_j (z - top_j)} + U_j e^{+u_j (z - bot_j)}.
//
// Unit sources at z_s in layer s (amplitude factors carried by the caller):
//   TE even (vertical dipole):   psi_p =  kappa^2/(2 u_s) e^{-u_s|z-z_s|}
//   TE odd (horizontal dipole):  psi_p = -1/2 sign(z-z_s) e^{-u_s|z-z_s|}
//   TM even (horizontal dipole): phi_p =  kh_s^2/(2 u_s^tm) e^{-u_s^tm|z-z_s|}

struct KernelValues {
    cplx psiV, dpsiV;  // TE, vertical-dipole source: value and d/dz at receiver
    cplx psiH, dpsiH;  // TE, horizontal-dipole (odd) source
    cplx phiM;         // TM, horizontal-dipole source
};

struct LayerStackCtx {
    const LayeredMedium* med = nullptr;
    std::vector<MediumWavenumbers> wn;
    std::vector<double> thick;  // interior layer thicknesses
    int n = 0;
    int src_layer = 0, rx_layer = 0;
    double z_src = 0.0, z_rx = 0.0;
    bool include_direct = false;  // add the particular field when rx_layer == src_layer
    double kappa_cut = 1e300;     // kernels negligible beyond this wavenumber

    // scratch reused across kappa evaluations
    mutable std::vector<cplx> u, eh, mat, rhs, u_te_cache;
    mutable double cache_kappa = -1.0;
    mutable std::vector<int> piv;
};

// Dense complex LU with partial pivoting; dim is small (2n-2).
void lu_factor(std::vector<cplx>& a, std::vector<int>& piv, int dim) {
    for (int c = 0; c < dim; ++c) {
        int p = c;
        double best = std::abs(a[c * dim + c]);
        for (int r = c + 1; r < dim; ++r) {
            const double v = std::abs(a[r * dim + c]);
            if (v > best) {
                best = v;
                p = r;
            }
        }
        if (best == 0.0) throw NumericalError("layered solver: singular spectral system");
        piv[c] = p;
        if (p != c)
            for (int k = 0; k < dim; ++k) std::swap(a[c * dim + k], a[p * dim + k]);
        const cplx inv = 1.0 / a[c * dim + c];
        for (int r = c + 1; r < dim; ++r) {
            const cplx f = a[r * dim + c] * inv;
            a[r * dim + c] = f;
            if (f != cplx(0.0))
                for (int k = c + 1; k < dim; ++k) a[r * dim + k] -= f * a[c * dim + k];
        }
    }
}

void lu_solve(const std::vector<cplx>& a, const std::vector<int>& piv, int dim,
              cplx* b) {
    // all row interchanges first, then clean triangular solves
    for (int c = 0; c < dim; ++c)
        if (piv[c] != c) std::swap(b[c], b[piv[c]]);
    for (int c = 0; c < dim; ++c)
        for (int r = c + 1; r < dim; ++r) b[r] -= a[r * dim + c] * b[c];
    for (int r = dim - 1; r >= 0; --r) {
        for (int k = r + 1; k < dim; ++k) b[r] -= a[r * dim + k] * b[k];
        b[r] /= a[r * dim + r];
    }
}

// Column index of D_j / U_j in the unknown vector
// [U_0, D_1, U_1, ..., D_{n-2}, U_{n-2}, D_{n-1}].
inline int col_D(int j) { return 2 * j - 1; }
inline int col_U(int j) { return 2 * j; }

// One mode solve: fills value/derivative at the receiver for each of the
// given source parities. `tm` switches the vertical wavenumber and the
// derivative continuity weight. Exponentials are hoisted: the particular
// field of every source parity shares e^{-u_s |z - z_s|}.
void solve_mode(const LayerStackCtx& s, double kappa, bool tm, int n_src,
                const bool* odd_src, const cplx* amp, cplx* val_out, cplx* dval_out) {
    const int n = s.n;
    const auto& zb = s.med->boundaries;
    auto& u = s.u;
    auto& eh = s.eh;
    u.resize(n);
    eh.assign(n, cplx(0.0));
    if (!tm) {
        for (int j = 0; j < n; ++j) u[j] = s.wn[j].u_te(kappa);
        s.u_te_cache = u;
        s.cache_kappa = kappa;
    } else {
        const bool cached = (s.cache_kappa == kappa);
        for (int j = 0; j < n; ++j)
            u[j] = (cached && s.wn[j].isotropic) ? s.u_te_cache[j] : s.wn[j].u_tm(kappa);
    }
    for (int j = 1; j + 1 < n; ++j) eh[j] = std::exp(-u[j] * s.thick[j - 1]);

    auto weight = [&](int j) -> cplx {
        return tm ? cplx(1.0) / s.wn[j].sigma_th : cplx(1.0);
    };

    const int dim = 2 * (n - 1);
    auto& mat = s.mat;
    auto& rhs = s.rhs;
    mat.assign(static_cast<std::size_t>(dim) * dim, cplx(0.0));
    rhs.assign(static_cast<std::size_t>(dim) * n_src, cplx(0.0));

    const int sl = s.src_layer;
    const cplx us = u[sl];

    // Particular field at depth z given the shared exponential e(z).
    auto part_val = [&](int q, double z, const cplx& e) -> cplx {
        return odd_src[q] ? amp[q] * ((z >= s.z_src) ? e : -e) : amp[q] * e;
    };
    auto part_der = [&](int q, double z, const cplx& e) -> cplx {
        return odd_src[q] ? -amp[q] * us * e
                          : -amp[q] * us * ((z >= s.z_src) ? e : -e);
    };

    for (int i = 0; i + 1 < n; ++i) {  // boundary between layer i and i+1
        const double z = zb[i];
        const int rv = 2 * i, rd = 2 * i + 1;
        const cplx wi = weight(i), wj = weight(i + 1);
        // layer i evaluated at its bottom boundary
        if (i == 0) {
            mat[rv * dim + col_U(0)] += 1.0;
            mat[rd * dim + col_U(0)] += wi * u[0];
        } else {
            mat[rv * dim + col_D(i)] += eh[i];
            mat[rv * dim + col_U(i)] += 1.0;
            mat[rd * dim + col_D(i)] += -wi * u[i] * eh[i];
            mat[rd * dim + col_U(i)] += wi * u[i];
        }
        // layer i+1 evaluated at its top boundary (negated)
        if (i + 1 == n - 1) {
            mat[rv * dim + col_D(n - 1)] -= 1.0;
            mat[rd * dim + col_D(n - 1)] -= -wj * u[n - 1];
        } else {
            mat[rv * dim + col_D(i + 1)] -= 1.0;
            mat[rv * dim + col_U(i + 1)] -= eh[i + 1];
            mat[rd * dim + col_D(i + 1)] -= -wj * u[i + 1];
            mat[rd * dim + col_U(i + 1)] -= wj * u[i + 1] * eh[i + 1];
        }
        // source contributions move to the right-hand side
        if (sl == i || sl == i + 1) {
            const cplx e_src = std::exp(-us * std::abs(z - s.z_src));
            for (int q = 0; q < n_src; ++q) {
                if (sl == i) {
                    rhs[q * dim + rv] -= part_val(q, z, e_src);
                    rhs[q * dim + rd] -= wi * part_der(q, z, e_src);
                } else {
                    rhs[q * dim + rv] += part_val(q, z, e_src);
                    rhs[q * dim + rd] += wj * part_der(q, z, e_src);
                }
            }
        }
    }

    auto& piv = s.piv;
    piv.resize(dim);
    lu_factor(mat, piv, dim);
    for (int q = 0; q < n_src; ++q) lu_solve(mat, piv, dim, &rhs[q * dim]);

    // Evaluate homogeneous (plus optional particular) field at the receiver.
    const int r = s.rx_layer;
    const double zr = s.z_rx;
    const cplx e_top = (r > 0) ? std::exp(-u[r] * (zr - zb[r - 1])) : cplx(0.0);
    const cplx e_bot = (r < n - 1) ? std::exp(u[r] * (zr - zb[r])) : cplx(0.0);
    const cplx e_rx = (s.include_direct && r == sl)
                          ? std::exp(-us * std::abs(zr - s.z_src))
                          : cplx(0.0);
    for (int q = 0; q < n_src; ++q) {
        cplx v = 0.0, dv = 0.0;
        if (r > 0) {
            const cplx D = rhs[q * dim + col_D(r)];
            v += D * e_top;
            dv += -u[r] * D * e_top;
        }
        if (r < n - 1) {
            const cplx U = rhs[q * dim + col_U(r)];
            v += U * e_bot;
            dv += u[r] * U * e_bot;
        }
        if (s.include_direct && r == sl) {
            v += part_val(q, zr, e_rx);
            dv += part_der(q, zr, e_rx);
        }
        val_out[q] = v;
        dval_out[q] = dv;
    }
}

void eval_kernels(const LayerStackCtx& s, double kappa, KernelValues& kv) {
    const cplx u_te_s = s.wn[s.src_layer].u_te(kappa);
    const cplx u_tm_s = s.wn[s.src_layer].u_tm(kappa);
    const cplx kh2_s = s.wn[s.src_layer].kh * s.wn[s.src_layer].kh;

    // TE: vertical-dipole (even) and horizontal-dipole (odd) sources share
    // one factorization.
    const bool odd_te[2] = {false, true};
    const cplx amp_te[2] = {cplx(kappa * kappa) / (2.0 * u_te_s), cplx(-0.5)};
    cplx val[2], dval[2];
    solve_mode(s, kappa, false, 2, odd_te, amp_te, val, dval);
    kv.psiV = val[0];
    kv.dpsiV = dval[0];
    kv.psiH = val[1];
    kv.dpsiH = dval[1];

    const bool odd_tm[1] = {false};
    const cplx amp_tm[1] = {kh2_s / (2.0 * u_tm_s)};
    solve_mode(s, kappa, true, 1, odd_tm, amp_tm, val, dval);
    kv.phiM = val[0];
}

enum KernelId { K_ZZ = 0, K_RZ, K_ZR, K_GPSI, K_GPHI, K_VPSI, K_VPHI, K_COUNT };
constexpr int kOrders[K_COUNT] = {0, 1, 1, 0, 0, 1, 1};

void eval_integrands(const LayerStackCtx& s, double kappa, cplx* out) {
    if (kappa > s.kappa_cut) {
        for (int k = 0; k < K_COUNT; ++k) out[k] = 0.0;
        return;
    }
    KernelValues kv;
    eval_kernels(s, kappa, kv);
    out[K_ZZ] = kv.psiV * kappa;
    out[K_RZ] = kv.dpsiV;
    out[K_ZR] = kv.psiH * kappa * kappa;
    out[K_GPSI] = kv.dpsiH * kappa;
    out[K_GPHI] = kv.phiM * kappa;
    out[K_VPSI] = kv.dpsiH;
    out[K_VPHI] = kv.phiM;
}

void integrals_filter(const LayerStackCtx& s, double rho, bool fast, cplx* vals) {
    hankel_filter_transform(
        fast ? HankelFilter::fast() : HankelFilter::standard(), rho,
        [&](double kappa, cplx* out) { eval_integrands(s, kappa, out); }, K_COUNT,
        kOrders, vals);
}

void integrals_adaptive(const LayerStackCtx& s, double rho, double decay,
                        const QuadratureConfig& quad, cplx* vals) {
    for (int k = 0; k < K_COUNT; ++k) {
        vals[k] = hankel_adaptive_transform(
            [&, k](double kappa) {
                cplx out[K_COUNT];
                eval_integrands(s, kappa, out);
                return out[k];
            },
            kOrders[k], rho, decay, quad.rel_tol, quad.max_panels);
    }
}

}  // namespace

CouplingTensor layered_coupling(const LayeredMedium& medium,
                                const std::array<double, 3>& tx_pos,
                                const std::array<double, 3>& rx_pos,
                                const FrequencyConfig& freq,
                                const QuadratureConfig& quad) {
    medium.validate();
    for (int i = 0; i < 3; ++i)
        if (!std::isfinite(tx_pos[i]) || !std::isfinite(rx_pos[i]))
            throw ValidationError("non-finite transmitter/receiver position");
    const double dx = rx_pos[0] - tx_pos[0];
    const double dy = rx_pos[1] - tx_pos[1];
    const double dz = rx_pos[2] - tx_pos[2];
    if (dx == 0.0 && dy == 0.0 && dz == 0.0)
        throw DegenerateGeometryError("transmitter and receiver coincide");

    if (medium.layers.size() == 1)
        return full_space_coupling(medium.layers[0], {dx, dy, dz}, freq);

    LayerStackCtx s;
    s.med = &medium;
    s.n = static_cast<int>(medium.layers.size());
    const double omega = freq.angular_frequency();
    s.wn.reserve(s.n);
    for (const auto& m : medium.layers) s.wn.emplace_back(m, omega);
    for (int j = 1; j + 1 < s.n; ++j)
        s.thick.push_back(medium.boundaries[j] - medium.boundaries[j - 1]);
    s.z_src = tx_pos[2];
    s.z_rx = rx_pos[2];
    s.src_layer = static_cast<int>(medium.layer_of(s.z_src));
    s.rx_layer = static_cast<int>(medium.layer_of(s.z_rx));

    const bool same_layer = s.src_layer == s.rx_layer;
    const bool split = quad.split_direct && same_layer;
    s.include_direct = same_layer && !split;

    // Kernel decay scale: shortest vertical bounce path for the reflected
    // part, direct separation otherwise.
    double decay;
    if (split) {
        decay = 1e300;
        const auto& zb = medium.boundaries;
        if (s.src_layer > 0)
            decay = std::min(decay, (s.z_src - zb[s.src_layer - 1]) +
                                        (s.z_rx - zb[s.src_layer - 1]));
        if (s.src_layer < s.n - 1)
            decay = std::min(decay,
                             (zb[s.src_layer] - s.z_src) + (zb[s.src_layer] - s.z_rx));
    } else {
        decay = std::max(std::abs(dz), 1e-9);
    }

    double kmax = 0.0;
    for (const auto& w : s.wn) kmax = std::max(kmax, std::abs(w.kh) * std::abs(w.lambda));
    s.kappa_cut = 60.0 / std::max(decay, 1e-12) + 6.0 * kmax;

    const double rho = std::hypot(dx, dy);
    cplx vals[K_COUNT];
    const bool axial = rho < 1e-7;

    if (axial) {
        // Only the J0 integrals survive on the axis.
        for (int k : {K_ZZ, K_GPSI, K_GPHI})
            vals[k] = hankel_adaptive_transform(
                [&, k](double kappa) {
                    cplx out[K_COUNT];
                    eval_integrands(s, kappa, out);
                    return out[k];
                },
                0, 0.0, decay, quad.rel_tol, quad.max_panels);
        vals[K_RZ] = vals[K_ZR] = vals[K_VPSI] = vals[K_VPHI] = 0.0;
    } else if (quad.method == QuadMethod::Adaptive) {
        integrals_adaptive(s, rho, decay, quad, vals);
    } else {
        integrals_filter(s, rho, quad.fast_filter, vals);
        if (quad.method == QuadMethod::FilterChecked) {
            cplx ref[K_COUNT];
            integrals_adaptive(s, rho, decay, quad, ref);
            double scale = 0.0;
            for (int k = 0; k < K_COUNT; ++k) scale = std::max(scale, std::abs(ref[k]));
            for (int k = 0; k < K_COUNT; ++k) {
                const double diff = std::abs(vals[k] - ref[k]);
                if (diff > quad.check_tol * std::max(std::abs(ref[k]), 1e-2 * scale))
                    throw NumericalError(
                        "layered_coupling: filter/adaptive quadrature mismatch (kernel " +
                        std::to_string(k) + ", rel " +
                        std::to_string(diff / std::max(std::abs(ref[k]), 1e-300)) + ")");
            }
        }
    }

    const double inv2pi = 1.0 / (2.0 * M_PI);
    CouplingTensor out;
    out(2, 2) = vals[K_ZZ] * inv2pi;
    if (!axial) {
        const double cx = dx / rho, cy = dy / rho;
        out(0, 2) = -cx * vals[K_RZ] * inv2pi;
        out(1, 2) = -cy * vals[K_RZ] * inv2pi;
        out(2, 0) = -cx * vals[K_ZR] * inv2pi;
        out(2, 1) = -cy * vals[K_ZR] * inv2pi;
        const cplx Vps = -vals[K_VPSI] * inv2pi;
        const cplx Vph = -vals[K_VPHI] * inv2pi;
        const cplx Gps = vals[K_GPSI] * inv2pi;
        const cplx Gph = vals[K_GPHI] * inv2pi;
        const double rho2 = rho * rho;
        const cplx sum_r3 = (Vps + Vph) / (rho2 * rho);
        out(0, 0) = (dy * dy - dx * dx) * sum_r3 - (dx * dx / rho2) * Gps +
                    (dy * dy / rho2) * Gph;
        out(1, 1) = (dx * dx - dy * dy) * sum_r3 - (dy * dy / rho2) * Gps +
                    (dx * dx / rho2) * Gph;
        out(0, 1) = out(1, 0) =
            -(dx * dy / rho2) * (2.0 * (Vps + Vph) / rho + Gps + Gph);
    } else {
        const cplx Gps = vals[K_GPSI] * inv2pi;
        const cplx Gph = vals[K_GPHI] * inv2pi;
        out(0, 0) = out(1, 1) = 0.5 * (Gph - Gps);
    }

    if (split) {
        const CouplingTensor direct = full_space_coupling(
            medium.layers[s.src_layer], {dx, dy, dz},
            FrequencyConfig(freq.frequency, -1));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) out(i, j) += direct(i, j);
    }

    if (freq.time_sign == 1) return out.conjugated();
    if (!out.all_finite())
        throw NumericalError("layered_coupling produced non-finite values");
    return out;
}

}  // namespace lwdinv::em


