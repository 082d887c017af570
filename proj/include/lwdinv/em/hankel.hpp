#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "lwdinv/core/errors.hpp"
#include "lwdinv/core/numeric.hpp"

namespace lwdinv::em {

/// Integrand for a Hankel transform: f(kappa), complex-valued.
using HankelKernel = std::function<cplx(double kappa)>;

/// Log-spaced digital filter for J0 and J1 Hankel transforms sharing one
/// set of abscissae, so one kernel evaluation pass serves both orders.
///
///   integral_0^inf f(kappa) J_nu(kappa r) dkappa
///     ~= (1/r) sum_i w_nu[i] * f(b[i]/r)
///
/// Weights are fitted at startup by regularized least squares against
/// analytic transform pairs and validated on held-out pairs.
struct HankelFilter {
    std::vector<double> base;  // abscissae b_i (log-spaced)
    std::vector<double> w0;    // J0 weights
    std::vector<double> w1;    // J1 weights

    /// Largest relative error over held-out validation pairs (per order).
    double validation_error_j0 = 0.0;
    double validation_error_j1 = 0.0;

    static const HankelFilter& standard();  // 577-point, built once
    static const HankelFilter& fast();      // 337-point, ~3e-7 grade
};

/// Fixed-filter evaluation of several kernels at once. `values[k]` receives
/// the order-`orders[k]` transform of `kernels[k]` at radius r > 0.
void hankel_filter_transform(const HankelFilter& filt, double r,
                             const std::function<void(double kappa, cplx* out)>& eval_all,
                             int n_kernels, const int* orders, cplx* values);

/// Adaptive partition-extrapolation quadrature (panels between Bessel
/// zeros, Gauss-Legendre inside, Wynn-epsilon acceleration of the tail).
/// Works for any r >= 0 (J0 at r=0 integrates without oscillation).
/// `decay_scale` > 0 hints the e^{-kappa*D} falloff of the kernel.
/// Throws NumericalError if the panel budget is exhausted.
cplx hankel_adaptive_transform(const HankelKernel& f, int order, double r,
                               double decay_scale, double rel_tol = 1e-11,
                               int max_panels = 400);

}  // namespace lwdinv::em
