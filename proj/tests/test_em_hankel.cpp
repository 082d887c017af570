#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "lwdinv/em/hankel.hpp"

using namespace lwdinv;
using namespace lwdinv::em;

namespace {

cplx filter_one(const HankelKernel& f, int order, double r) {
    cplx out;
    const int orders[1] = {order};
    hankel_filter_transform(
        HankelFilter::standard(), r,
        [&](double kappa, cplx* v) { v[0] = f(kappa); }, 1, orders, &out);
    return out;
}

double rel(const cplx& got, const cplx& want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace

TEST_CASE("filter design validates below 1e-7 on held-out pairs") {
    const auto& filt = HankelFilter::standard();
    CAPTURE(filt.validation_error_j0);
    CAPTURE(filt.validation_error_j1);
    CHECK(filt.validation_error_j0 < 1e-7);
    CHECK(filt.validation_error_j1 < 1e-7);
}

TEST_CASE("Sommerfeld identity with complex wavenumber, filter and adaptive") {
    // int_0^inf (kappa/u) e^{-u|z|} J0(kappa r) dkappa = e^{ikR}/R
    // |Im k| R is kept moderate, as tool geometries keep it in practice;
    // beyond a few skin depths the integral is cancellation-dominated for
    // any quadrature in double precision.
    for (double r : {0.4, 1.8, 12.0}) {
        for (double z : {0.05, 1.0, 4.0}) {
            const double R = std::hypot(r, z);
            const cplx k = cplx(1.1, 1.0) * (2.0 / R);
            auto f = [&](double kap) {
                const cplx u = std::sqrt(cplx(kap * kap) - k * k);
                return std::exp(-u * z) / u * kap;
            };
            const cplx want = std::exp(cplx(0, 1) * k * R) / R;
            CHECK(rel(filter_one(f, 0, r), want) < 1e-7);
            CHECK(rel(hankel_adaptive_transform(f, 0, r, z, 1e-12), want) < 1e-9);
        }
    }
}

TEST_CASE("J1 companion identity") {
    // int_0^inf (1/u) e^{-u|z|} J1(kappa r) dkappa = (e^{ikR} - e^{ik|z|})/(i k r)
    for (double r : {0.7, 5.0}) {
        for (double z : {0.2, 2.0}) {
            const double R = std::hypot(r, z);
            const cplx k = cplx(1.2, 1.0) * (2.0 / R);
            auto f = [&](double kap) {
                const cplx u = std::sqrt(cplx(kap * kap) - k * k);
                return std::exp(-u * z) / u;
            };
            const cplx i1(0, 1);
            const cplx want =
                (std::exp(i1 * k * R) - std::exp(i1 * k * z)) / (i1 * k * r);
            CHECK(rel(filter_one(f, 1, r), want) < 3e-7);
            CHECK(rel(hankel_adaptive_transform(f, 1, r, z, 1e-12), want) < 1e-9);
        }
    }
}

TEST_CASE("adaptive quadrature copes with slow decay via tail extrapolation") {
    // Near-boundary style kernel: decay scale 1 mm, r of a real tool.
    const double a = 1e-3, r = 1.8;
    auto f = [&](double kap) { return cplx(std::exp(-a * kap)); };
    const double want = 1.0 / std::sqrt(a * a + r * r);
    const cplx got = hankel_adaptive_transform(f, 0, r, a, 1e-11, 400);
    CHECK(rel(got, want) < 1e-9);
}

TEST_CASE("adaptive quadrature integrates without oscillation at r=0") {
    const double a = 0.5;
    auto f = [&](double kap) { return cplx(kap * std::exp(-a * kap * kap)); };
    // J0(0)=1: integral = 1/(2a)
    const cplx got = hankel_adaptive_transform(f, 0, 0.0, std::sqrt(a), 1e-12);
    CHECK(rel(got, 1.0 / (2.0 * a)) < 1e-11);
}

TEST_CASE("exhausted panel budget raises a numerical error") {
    auto f = [](double) { return cplx(1.0); };  // non-decaying, non-integrable
    CHECK_THROWS_AS(hankel_adaptive_transform(f, 0, 0.0, 1e9, 1e-14, 16),
                    NumericalError);
}
