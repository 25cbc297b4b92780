#include <doctest.h>

#include <cmath>
#include <vector>

#include "lssm/errors.hpp"
#include "lssm/quadrature.hpp"
#include "lssm/specfun.hpp"

using namespace lssm::specfun;

namespace {

// Independent oracle: K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.
double oracle_bessel_k(double nu, double x) {
    auto f = [nu, x](double t) {
        const double e = -x * std::cosh(t);
        if (e < -700.0) return 0.0;
        return std::exp(e) * std::cosh(nu * t);
    };
    auto r = lssm::quad::integrate_to_inf(f, 0.0, 1e-14, 1e-12, 20000);
    REQUIRE(r.converged);
    return r.value;
}

// Independent oracle: Gamma(x) = int_0^inf t^{x-1} e^{-t} dt, evaluated after
// the substitution u = t^x which removes the endpoint singularity:
//   Gamma(x) = (1/x) int_0^inf exp(-u^{1/x}) du   (x > 0).
double oracle_gamma(double x) {
    auto f = [x](double u) { return std::exp(-std::pow(u, 1.0 / x)); };
    auto r = lssm::quad::integrate_to_inf(f, 0.0, 1e-14, 1e-12, 20000);
    REQUIRE(r.converged);
    return r.value / x;
}

} // namespace

TEST_CASE("bessel_k agrees with the integral-representation oracle") {
    const std::vector<double> nus = {0.0, 0.172, 0.5, 1.0, 1.5, 2.3, 5.0};
    const std::vector<double> xs = {0.1, 0.5, 1.0, 2.0, 2.5, 5.0, 10.0};
    for (double nu : nus)
        for (double x : xs) {
            const double got = bessel_k(nu, x);
            const double want = oracle_bessel_k(nu, x);
            CHECK(got == doctest::Approx(want).epsilon(5e-10));
        }
}

TEST_CASE("bessel_k closed forms and frozen oracle values") {
    // K_{1/2}(x) = sqrt(pi/(2x)) e^{-x}.
    CHECK(bessel_k(0.5, 1.0) ==
          doctest::Approx(std::sqrt(M_PI / 2.0) * std::exp(-1.0))
              .epsilon(1e-12));
    CHECK(bessel_k(-0.5, 1.0) == doctest::Approx(bessel_k(0.5, 1.0)));

    // Oracle-derived reference points (quadrature of the integral
    // representation, cross-checked against an independent multiprecision
    // evaluation during development).
    CHECK(bessel_k(1.0, 2.0) ==
          doctest::Approx(0.13986588181652243).epsilon(1e-11));
    CHECK(bessel_k(0.172, 0.1) ==
          doctest::Approx(2.5467882828677503).epsilon(1e-11));
    CHECK(bessel_k(2.3, 7.5) ==
          doctest::Approx(3.466160469587404e-4).epsilon(1e-11));
    CHECK(bessel_k(5.0, 0.3) ==
          doctest::Approx(157139.12337121668).epsilon(1e-11));
}

TEST_CASE("bessel_k symmetry and recurrence invariants") {
    const std::vector<double> nus = {0.05, 0.172, 0.5, 0.9, 1.3, 2.0, 3.7};
    const std::vector<double> xs = {0.05, 0.3, 1.0, 2.0, 3.0, 8.0, 20.0};
    for (double nu : nus)
        for (double x : xs) {
            const double kp = bessel_k(nu, x);
            const double km = bessel_k(-nu, x);
            CHECK(std::fabs(kp - km) <= 1e-12 * std::fabs(kp));
            // K_{nu+1} = K_{nu-1} + (2 nu / x) K_nu
            const double lhs = bessel_k(nu + 1.0, x);
            const double rhs = bessel_k(nu - 1.0, x) + (2.0 * nu / x) * kp;
            CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::fabs(lhs));
        }
}

TEST_CASE("scaled and log variants of bessel_k") {
    for (double nu : {0.0, 0.672, 1.5}) {
        for (double x : {0.2, 1.0, 5.0, 30.0}) {
            const double k = bessel_k(nu, x);
            CHECK(bessel_k_scaled(nu, x) ==
                  doctest::Approx(k * std::exp(x)).epsilon(1e-12));
            CHECK(log_bessel_k(nu, x) ==
                  doctest::Approx(std::log(k)).epsilon(1e-12));
        }
    }
    // Far tail where the unscaled value underflows to ~0.
    CHECK(bessel_k_scaled(1.0, 50.0) ==
          doctest::Approx(0.17856655855881557).epsilon(1e-11));
    CHECK(log_bessel_k(1.0, 800.0) ==
          doctest::Approx(std::log(bessel_k_scaled(1.0, 800.0)) - 800.0)
              .epsilon(1e-12));
    // Small-x regime where the unscaled value overflows: log stays finite and
    // decreasing in x.
    const double l1 = log_bessel_k(5.0, 1e-70);
    const double l2 = log_bessel_k(5.0, 1e-60);
    CHECK(std::isfinite(l1));
    CHECK(l1 > l2);
    CHECK(log_bessel_k(5.0, 1e-4) ==
          doctest::Approx(std::log(bessel_k(5.0, 1e-4))).epsilon(1e-10));
}

TEST_CASE("bessel_k rejects nonpositive arguments") {
    CHECK_THROWS_AS(bessel_k(1.0, 0.0), lssm::MathError);
    CHECK_THROWS_AS(bessel_k(1.0, -2.0), lssm::MathError);
}

TEST_CASE("gamma_fn: classical values, oracle, recurrence, poles") {
    CHECK(gamma_fn(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(gamma_fn(0.5) == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-13));
    CHECK(gamma_fn(5.0) == doctest::Approx(24.0).epsilon(1e-13));

    // 2 nu - 1 with nu = 0.672 -> Gamma(0.344): oracle-derived frozen value.
    CHECK(gamma_fn(0.344) ==
          doctest::Approx(2.5923783107173176).epsilon(1e-12));
    CHECK(gamma_fn(0.344) ==
          doctest::Approx(oracle_gamma(0.344)).epsilon(1e-9));
    CHECK(gamma_fn(1.7) == doctest::Approx(oracle_gamma(1.7)).epsilon(1e-9));

    for (double x : {0.11, 0.344, 0.9, 1.5, 3.25, 7.5}) {
        CHECK(gamma_fn(x + 1.0) ==
              doctest::Approx(x * gamma_fn(x)).epsilon(1e-12));
    }
    // Reflection region.
    CHECK(gamma_fn(-0.5) ==
          doctest::Approx(-2.0 * std::sqrt(M_PI)).epsilon(1e-12));

    CHECK_THROWS_AS(gamma_fn(0.0), lssm::MathError);
    CHECK_THROWS_AS(gamma_fn(-3.0), lssm::MathError);
}

TEST_CASE("lgamma_fn matches log of gamma_fn and scales to large x") {
    for (double x : {0.05, 0.344, 1.0, 2.5, 10.0}) {
        CHECK(lgamma_fn(x) ==
              doctest::Approx(std::log(gamma_fn(x))).epsilon(1e-12));
    }
    CHECK(lgamma_fn(150.5) ==
          doctest::Approx(std::lgamma(150.5)).epsilon(1e-13));
    CHECK_THROWS_AS(lgamma_fn(0.0), lssm::MathError);
}

TEST_CASE("gamma_density: closed forms and unit mass") {
    CHECK(gamma_density(0.0, 1.0, 2.0) == doctest::Approx(2.0));
    CHECK(gamma_density(1.0, 1.0, 2.0) ==
          doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-13));
    CHECK(std::isinf(gamma_density(0.0, 0.5, 1.0)));
    CHECK(gamma_density(0.0, 2.0, 1.0) == doctest::Approx(0.0));

    // Unit normalization for the spec'd parameter grid.  For nu < 1 the
    // substitution u = t^nu removes the origin singularity:
    //   int ga(t; nu, lam) dt = int lam^nu/(nu Gamma(nu)) e^{-lam u^{1/nu}} du.
    for (double nu : {0.3, 0.5, 1.0, 2.0}) {
        for (double lam : {0.055, 1.0, 2.0}) {
            double mass;
            if (nu < 1.0) {
                auto f = [nu, lam](double u) {
                    return std::exp(-lam * std::pow(u, 1.0 / nu));
                };
                auto r =
                    lssm::quad::integrate_to_inf(f, 0.0, 1e-13, 1e-11, 20000);
                REQUIRE(r.converged);
                mass = r.value * std::exp(nu * std::log(lam) - lgamma_fn(nu)) /
                       nu;
            } else {
                auto f = [nu, lam](double t) {
                    return gamma_density(t, nu, lam);
                };
                auto r =
                    lssm::quad::integrate_to_inf(f, 0.0, 1e-13, 1e-11, 20000);
                REQUIRE(r.converged);
                mass = r.value;
            }
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
        }
    }

    CHECK_THROWS_AS(gamma_density(1.0, 0.0, 1.0), lssm::MathError);
    CHECK_THROWS_AS(gamma_density(1.0, 1.0, -1.0), lssm::MathError);
}

TEST_CASE("bessel_k spot-check against the standard library") {
    CHECK(bessel_k(0.0, 1.0) ==
          doctest::Approx(std::cyl_bessel_k(0.0, 1.0)).epsilon(1e-9));
    CHECK(bessel_k(1.0, 3.0) ==
          doctest::Approx(std::cyl_bessel_k(1.0, 3.0)).epsilon(1e-9));
    CHECK(bessel_k(2.5, 0.7) ==
          doctest::Approx(std::cyl_bessel_k(2.5, 0.7)).epsilon(1e-9));
}
