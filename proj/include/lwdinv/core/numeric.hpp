#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace lwdinv {

using cplx = std::complex<double>;

/// exp(w) - 1 without cancellation for small |w|.
inline cplx cexpm1(const cplx& w) {
    const double a = w.real(), b = w.imag();
    if (std::abs(a) > 0.5 || std::abs(b) > 0.5) return std::exp(w) - 1.0;
    const double ea = std::expm1(a);
    const double sb = std::sin(b);
    const double s2 = std::sin(0.5 * b);
    // e^a cos b - 1 = expm1(a) cos b - 2 sin^2(b/2)
    return {ea * std::cos(b) - 2.0 * s2 * s2, (ea + 1.0) * sb};
}

/// (exp(w) - 1) / w, continuous through w = 0.
inline cplx cexpm1_over(const cplx& w) {
    if (std::abs(w.real()) + std::abs(w.imag()) < 1e-20) return {1.0, 0.0};
    return cexpm1(w) / w;
}

/// Gauss-Legendre nodes/weights on [-1,1], generated by Newton iteration
/// on the Legendre recurrence.
struct GaussLegendre {
    std::vector<double> x, w;

    explicit GaussLegendre(int n) : x(n), w(n) {
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = xi;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n * (xi * p1 - p0) / (xi * xi - 1.0);
                double dx = p1 / pp;
                xi -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            x[i] = -xi;
            x[n - 1 - i] = xi;
            w[i] = w[n - 1 - i] = 2.0 / ((1.0 - xi * xi) * pp * pp);
        }
    }
};

/// Wynn epsilon table for accelerating a sequence of partial sums.
/// Returns the best extrapolated value; `err` gets a crude error estimate.
/// Only the trailing 41 sums are used, which bounds the cost and is ample
/// depth for the alternating Bessel tails this serves.
inline cplx wynn_epsilon(const std::vector<cplx>& sums, double* err = nullptr) {
    const std::size_t take = std::min<std::size_t>(sums.size(), 41);
    std::vector<cplx> cur(sums.end() - take, sums.end());
    std::vector<cplx> prev(take, cplx(0.0));
    cplx best = cur.back();
    double best_step = (take >= 2) ? std::abs(cur[take - 1] - cur[take - 2]) : 1e300;
    const std::size_t n = take;
    for (std::size_t k = 1; k < n; ++k) {
        std::vector<cplx> next(n - k);
        bool stalled = false;
        for (std::size_t i = 0; i + k < n; ++i) {
            const cplx diff = cur[i + 1] - cur[i];
            if (std::abs(diff) <= 1e-16 * (std::abs(cur[i]) + std::abs(cur[i + 1]))) {
                // In an even (sum-like) column a vanishing difference means
                // convergence; in an odd auxiliary column the table is
                // exhausted and the best estimate so far stands.
                if ((k - 1) % 2 == 0) {
                    if (err) *err = std::abs(diff);
                    return cur[i + 1];
                }
                stalled = true;
                break;
            }
            next[i] = prev[i + 1] + 1.0 / diff;
        }
        if (stalled) break;
        prev.swap(cur);
        cur.swap(next);
        if (k % 2 == 0 && !cur.empty()) {
            const cplx cand = cur.back();
            const double step = std::abs(cand - best);
            if (std::isfinite(step) && step < best_step) {
                best_step = step;
                best = cand;
            }
        }
    }
    if (err) *err = best_step;
    return best;
}

}  // namespace lwdinv
