#include <doctest.h>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "lssm/errors.hpp"
#include "lssm/levy.hpp"
#include "lssm/quadrature.hpp"
#include "lssm/rng.hpp"
#include "lssm/specfun.hpp"

using namespace lssm;

namespace {

// Oracle: NIG density via the Bessel representation (independent of the
// cumulant formula under test).
double nig_density(double x, double a, double b, double mu, double del) {
    const double g0 = std::sqrt(a * a - b * b);
    const double s = std::sqrt(del * del + (x - mu) * (x - mu));
    return a * del / M_PI * std::exp(del * g0 + b * (x - mu)) *
           specfun::bessel_k(1.0, a * s) / s;
}

// Oracle: E[e^{x L_1}] by direct quadrature against the density.
double mgf_quadrature(const LevyModel& m, double x) {
    if (m.family == LevyFamily::GammaSubordinator) {
        auto r = quad::integrate_to_inf(
            [&](double z) {
                return std::exp(x * z) * specfun::gamma_density(z, m.p1, m.p2);
            },
            0.0, 1e-13, 1e-11, 40000);
        REQUIRE(r.converged);
        return r.value;
    }
    REQUIRE(m.family == LevyFamily::Nig);
    auto f = [&](double z) {
        return std::exp(x * z) * nig_density(z, m.p1, m.p2, m.p3, m.p4);
    };
    auto right = quad::integrate_to_inf(f, m.p3, 1e-13, 1e-11, 40000);
    auto left = quad::integrate_to_inf([&](double u) { return f(2.0 * m.p3 - u); },
                                       m.p3, 1e-13, 1e-11, 40000);
    REQUIRE(right.converged);
    REQUIRE(left.converged);
    return right.value + left.value;
}

std::complex<double> cf_quadrature(const LevyModel& m, double u) {
    auto dens = [&](double z) {
        if (m.family == LevyFamily::Nig)
            return nig_density(z, m.p1, m.p2, m.p3, m.p4);
        return specfun::gamma_density(z, m.p1, m.p2);
    };
    const double center = m.family == LevyFamily::Nig ? m.p3 : 0.0;
    auto part = [&](auto g) {
        auto right = quad::integrate_to_inf(
            [&](double z) { return g(z) * dens(z); }, center, 1e-13, 1e-11, 40000);
        double left = 0.0;
        if (m.family == LevyFamily::Nig) {
            auto l = quad::integrate_to_inf(
                [&](double uu) {
                    const double z = 2.0 * center - uu;
                    return g(z) * dens(z);
                },
                center, 1e-13, 1e-11, 40000);
            left = l.value;
        }
        return right.value + left;
    };
    return {part([&](double z) { return std::cos(u * z); }),
            part([&](double z) { return std::sin(u * z); })};
}

} // namespace

TEST_CASE("cumulant: closed forms against quadrature oracles") {
    CHECK(cumulant(LevyModel::brownian(0.0, 1.0), 2.0) ==
          doctest::Approx(2.0).epsilon(1e-14));
    const auto gs = LevyModel::gamma_subordinator(1.0, 2.0);
    CHECK(cumulant(gs, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-13));
    CHECK(cumulant(gs, 1.0) ==
          doctest::Approx(std::log(mgf_quadrature(gs, 1.0))).epsilon(1e-9));
    CHECK(cumulant(LevyModel::nig(1.0, 0.0, 0.0, 1.0), 0.0) == 0.0);

    const auto n = LevyModel::nig(1.2, 0.4, 0.1, 0.8);
    for (double x : {-0.9, -0.2, 0.5}) {
        CHECK(cumulant(n, x) ==
              doctest::Approx(std::log(mgf_quadrature(n, x))).epsilon(1e-8));
    }
    const auto ig = LevyModel::ig_subordinator(1.5, 2.0);
    // IG cumulant by the known transform of the sampled density: check the
    // defining property phi(x) = log E e^{xL} with a Monte Carlo fallback at
    // modest precision plus exact value at x = 0.
    CHECK(cumulant(ig, 0.0) == 0.0);
    CHECK(cumulant(LevyModel::compound_poisson_normal(2.0, 0.3, 0.5), 0.0) ==
          0.0);
}

TEST_CASE("cumulant: strips, convexity and derivative identities") {
    const std::vector<LevyModel> models = {
        LevyModel::brownian(0.3, 1.7),
        LevyModel::nig(1.2, 0.4, 0.1, 0.8),
        LevyModel::compound_poisson_normal(2.0, 0.3, 0.5),
        LevyModel::gamma_subordinator(3.0, 2.0),
        LevyModel::ig_subordinator(1.5, 2.0),
    };
    for (const auto& m : models) {
        CAPTURE(m.family_name());
        // kappa1 = phi'(0), kappa2 = phi''(0) by central differences.
        const double h = 1e-5;
        const double d1 = (cumulant(m, h) - cumulant(m, -h)) / (2.0 * h);
        const double d2 =
            (cumulant(m, h) - 2.0 * cumulant(m, 0.0) + cumulant(m, -h)) /
            (h * h);
        CHECK(d1 == doctest::Approx(m.kappa1()).epsilon(1e-6));
        CHECK(d2 == doctest::Approx(m.kappa2()).epsilon(1e-5));

        // Convexity on an interior grid of the strip.
        auto [lo, hi] = m.strip();
        const double a = std::max(lo, -3.0) * 0.8;
        const double b = std::min(hi, 3.0) * 0.8;
        const double step = (b - a) / 20.0;
        for (int i = 1; i < 20; ++i) {
            const double x = a + i * step;
            const double second = cumulant(m, x + step) - 2.0 * cumulant(m, x) +
                                  cumulant(m, x - step);
            CHECK(second >= -1e-9);
        }
    }
    // Strip violations carry the admissible interval in the message.
    const auto gs = LevyModel::gamma_subordinator(1.0, 2.0);
    CHECK_THROWS_AS(cumulant(gs, 2.0), MathError);
    try {
        cumulant(gs, 2.5);
    } catch (const MathError& e) {
        CHECK(std::string(e.what()).find("strip") != std::string::npos);
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(cumulant(LevyModel::ig_subordinator(1.0, 1.0), 0.5001),
                    MathError);
}

TEST_CASE("complex cumulant: characteristic function oracle") {
    const auto n = LevyModel::nig(1.2, 0.4, 0.1, 0.8);
    const auto gs = LevyModel::gamma_subordinator(1.3, 2.0);
    for (double u : {0.4, 0.9}) {
        const auto want_n = cf_quadrature(n, u);
        const auto got_n = std::exp(cumulant(n, std::complex<double>(0.0, u)));
        CHECK(std::abs(got_n - want_n) < 1e-6);
        const auto want_g = cf_quadrature(gs, u);
        const auto got_g = std::exp(cumulant(gs, std::complex<double>(0.0, u)));
        CHECK(std::abs(got_g - want_g) < 1e-6);
    }
    // Real axis consistency.
    for (const auto& m : {n, gs}) {
        const auto z = cumulant(m, std::complex<double>(0.4, 0.0));
        CHECK(z.imag() == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(z.real() == doctest::Approx(cumulant(m, 0.4)).epsilon(1e-14));
    }
}

TEST_CASE("esscher cumulant: normalization and the corrected shift formula") {
    const auto b = LevyModel::brownian(0.0, 1.0);
    CHECK(esscher_cumulant(b, 1.0, 1.0) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(esscher_cumulant(b, 1.0, 2.0) == doctest::Approx(4.0).epsilon(1e-14));
    for (const auto& m :
         {b, LevyModel::nig(1.2, 0.4, 0.1, 0.8),
          LevyModel::gamma_subordinator(3.0, 2.0)}) {
        CHECK(esscher_cumulant(m, 0.3, 0.0) == doctest::Approx(0.0));
    }

    // Monte Carlo importance-weight check of phi_theta(x) = phi(x+theta) -
    // phi(theta): estimate log E_Q[e^{xL}] with weights e^{theta L - phi(theta)}
    // and confirm it matches the corrected formula, not phi(x+theta) - phi(x).
    const double theta = 0.6, x = 0.8;
    Rng rng(99);
    const int n = 1000000;
    double s = 0.0, s2 = 0.0;
    const double ph = cumulant(b, theta);
    for (int i = 0; i < n; ++i) {
        const double l = rng.normal();
        const double v = std::exp(x * l) * std::exp(theta * l - ph);
        s += v;
        s2 += v * v;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    const double corrected = esscher_cumulant(b, theta, x);
    const double misprint = cumulant(b, x + theta) - cumulant(b, x);
    CHECK(std::fabs(mean - std::exp(corrected)) < 4.0 * se);
    CHECK(std::fabs(mean - std::exp(misprint)) > 10.0 * se);
}

TEST_CASE("esscher_triplet: closed-family shifts") {
    const auto b = esscher_triplet(LevyModel::brownian(0.0, 1.0), 0.5);
    CHECK(b.p1 == doctest::Approx(0.5));
    CHECK(b.p2 == doctest::Approx(1.0));

    const auto n = esscher_triplet(LevyModel::nig(1.0, 0.0, 0.0, 1.0), 0.3);
    CHECK(n.p2 == doctest::Approx(0.3));

    const std::vector<LevyModel> models = {
        LevyModel::brownian(0.3, 1.7),
        LevyModel::nig(1.2, 0.4, 0.1, 0.8),
        LevyModel::compound_poisson_normal(2.0, 0.3, 0.5),
        LevyModel::gamma_subordinator(3.0, 2.0),
        LevyModel::ig_subordinator(1.5, 2.0),
    };
    for (const auto& m : models) {
        CAPTURE(m.family_name());
        const double theta = 0.25;
        const auto mt = esscher_triplet(m, theta);
        // Tilted cumulant equals the shift formula pointwise.
        auto [lo, hi] = mt.strip();
        for (int i = 1; i <= 9; ++i) {
            const double x =
                std::max(lo, -2.0) + i * (std::min(hi, 2.0) - std::max(lo, -2.0)) / 10.0;
            CHECK(cumulant(mt, x) ==
                  doctest::Approx(esscher_cumulant(m, theta, x)).epsilon(1e-10));
        }
        // Round trip with -theta restores the parameters.
        const auto back = esscher_triplet(mt, -theta);
        CHECK(back.p1 == doctest::Approx(m.p1).epsilon(1e-12));
        CHECK(back.p2 == doctest::Approx(m.p2).epsilon(1e-12));
        CHECK(back.p3 == doctest::Approx(m.p3).epsilon(1e-12));
        CHECK(back.p4 == doctest::Approx(m.p4).epsilon(1e-12));
        // theta = 0 is the identity.
        const auto same = esscher_triplet(m, 0.0);
        CHECK(same.p1 == m.p1);
        CHECK(same.p2 == m.p2);
    }
    CHECK_THROWS_AS(esscher_triplet(LevyModel::gamma_subordinator(1.0, 2.0), 2.0),
                    MathError);
}

TEST_CASE("esscher density normalizes: E[e^{theta L - phi(theta)}] = 1") {
    struct Case {
        LevyModel m;
        double theta;
    };
    const Case cases[] = {
        {LevyModel::brownian(0.0, 1.0), 0.5},
        {LevyModel::nig(1.2, 0.0, 0.0, 0.8), 0.3},
        {LevyModel::gamma_subordinator(1.0, 2.0), 0.8},
    };
    for (const auto& c : cases) {
        CAPTURE(c.m.family_name());
        Rng rng(512);
        const int n = 1000000;
        const double ph = cumulant(c.m, c.theta);
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v =
                std::exp(c.theta * sample_increment(c.m, 1.0, rng) - ph);
            s += v;
            s2 += v * v;
        }
        const double mean = s / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        CHECK(std::fabs(mean - 1.0) < 4.0 * se);
    }
}

TEST_CASE("sample_increments: moments, positivity, determinism") {
    // Brownian CLT band at dt = 1.
    auto bs = sample_increments(LevyModel::brownian(0.0, 1.0), 1.0, 1000000, 7);
    double s = 0.0;
    for (double v : bs) s += v;
    CHECK(std::fabs(s / 1e6) < 4e-3);

    // Subordinator positivity.
    for (const auto& m : {LevyModel::gamma_subordinator(0.7, 2.0),
                          LevyModel::ig_subordinator(1.5, 2.0)}) {
        auto xs = sample_increments(m, 0.1, 20000, 11);
        double mn = 1e300;
        for (double v : xs) mn = std::min(mn, v);
        CHECK(mn >= 0.0);
    }

    // Empirical mean/variance match kappa1/kappa2 within 4 standard errors.
    const std::vector<LevyModel> models = {
        LevyModel::nig(1.2, 0.4, 0.1, 0.8),
        LevyModel::compound_poisson_normal(2.0, 0.3, 0.5),
        LevyModel::gamma_subordinator(3.0, 2.0),
        LevyModel::ig_subordinator(1.5, 2.0),
    };
    for (const auto& m : models) {
        CAPTURE(m.family_name());
        const int n = 400000;
        auto xs = sample_increments(m, 1.0, n, 23);
        double s1 = 0.0, s2 = 0.0, s4 = 0.0;
        for (double v : xs) {
            s1 += v;
            s2 += v * v;
        }
        const double mean = s1 / n;
        const double var = s2 / n - mean * mean;
        for (double v : xs) s4 += std::pow((v - mean) * (v - mean) - var, 2);
        const double se_mean = std::sqrt(var / n);
        const double se_var = std::sqrt(s4 / n / n);
        CHECK(std::fabs(mean - m.kappa1()) < 4.0 * se_mean);
        CHECK(std::fabs(var - m.kappa2()) < 4.0 * se_var);
    }

    // Same seed, same draws.
    auto a = sample_increments(LevyModel::nig(1.2, 0.4, 0.1, 0.8), 0.5, 100, 3);
    auto b = sample_increments(LevyModel::nig(1.2, 0.4, 0.1, 0.8), 0.5, 100, 3);
    CHECK(a == b);

    // Quadratic-variation draws: compound Poisson squared jumps are
    // nonnegative and Brownian carries the continuous part.
    Rng rng(4);
    const auto cp = LevyModel::compound_poisson_normal(5.0, 0.3, 0.5);
    for (int i = 0; i < 200; ++i) {
        const auto inc = sample_increment_qv(cp, 0.5, rng);
        CHECK(inc.d_qv >= 0.0);
    }
    const auto bqv =
        sample_increment_qv(LevyModel::brownian(0.1, 2.0), 0.25, rng);
    CHECK(bqv.d_qv == doctest::Approx(0.5));
    CHECK_THROWS_AS(
        sample_increment_qv(LevyModel::nig(1.0, 0.0, 0.0, 1.0), 0.1, rng),
        MathError);
}

TEST_CASE("levy model JSON round trip and validation") {
    const std::vector<LevyModel> models = {
        LevyModel::brownian(0.3, 1.7),
        LevyModel::nig(1.2, 0.4, 0.1, 0.8),
        LevyModel::compound_poisson_normal(2.0, 0.3, 0.5),
        LevyModel::gamma_subordinator(3.0, 2.0),
        LevyModel::ig_subordinator(1.5, 2.0),
    };
    for (const auto& m : models) {
        const auto back = LevyModel::from_json(m.to_json());
        CHECK(back.family == m.family);
        CHECK(back.p1 == m.p1);
        CHECK(back.p2 == m.p2);
        CHECK(back.p3 == m.p3);
        CHECK(back.p4 == m.p4);
    }
    CHECK_THROWS_AS(LevyModel::nig(1.0, 1.2, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(LevyModel::gamma_subordinator(-1.0, 2.0), ConfigError);
    CHECK_THROWS_AS(LevyModel::from_json({{"family", "stable"}}), ConfigError);
    CHECK_THROWS_AS(LevyModel::from_json({{"family", "nig"}, {"alpha", 1.0}}),
                    ConfigError);
}
