#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lssm/rng.hpp"

// Driving Lévy processes and subordinators: closed-form cumulant (log moment
// generating) functions, exponential-moment strips, exponential tilting
// (Esscher transform) and exact sampling of increments.  All five families
// stay closed under tilting, so the transformed process is again a member of
// the same family with shifted parameters.

namespace lssm {

enum class LevyFamily {
    Brownian,              // drift d, variance b
    Nig,                   // normal inverse Gaussian (alpha, beta, mu, delta)
    CompoundPoissonNormal, // rate, jump_mean, jump_sd
    GammaSubordinator,     // shape rate a, rate c (L_t ~ Gamma(a t, c))
    IgSubordinator,        // delta, gamma (L_t ~ IG(delta t, gamma))
};

struct LevyModel {
    LevyFamily family = LevyFamily::Brownian;
    double p1 = 0.0; // Brownian: d,     Nig: alpha, CPN: rate,      Gamma: a,  IG: delta
    double p2 = 1.0; // Brownian: b,     Nig: beta,  CPN: jump_mean, Gamma: c,  IG: gamma
    double p3 = 0.0; // Nig: mu,  CPN: jump_sd
    double p4 = 0.0; // Nig: delta

    static LevyModel brownian(double drift, double variance);
    static LevyModel nig(double alpha, double beta, double mu, double delta);
    static LevyModel compound_poisson_normal(double rate, double jump_mean,
                                             double jump_sd);
    static LevyModel gamma_subordinator(double shape, double rate);
    static LevyModel ig_subordinator(double delta, double gamma);

    // Mean and variance of L_1.
    double kappa1() const;
    double kappa2() const;

    // Open interval of x for which E[e^{x L_1}] is finite.
    std::pair<double, double> strip() const;

    bool is_subordinator() const;
    std::string family_name() const;

    nlohmann::json to_json() const;
    static LevyModel from_json(const nlohmann::json& j);
};

// log E[e^{x L_1}].  Throws MathError when x is outside the strip (the
// admissible interval is attached to the message).
double cumulant(const LevyModel& m, double x);

// Analytic continuation to complex arguments with Re(z) inside the strip.
std::complex<double> cumulant(const LevyModel& m, std::complex<double> z);

// Cumulant of L_1 under the exponentially tilted measure with density process
// exp(theta L_t - t cumulant(theta)):  phi_theta(x) = phi(x+theta) - phi(theta).
double esscher_cumulant(const LevyModel& m, double theta, double x);
std::complex<double> esscher_cumulant(const LevyModel& m, double theta,
                                      std::complex<double> z);

// The law of L under the tilted measure: same family, shifted parameters.
LevyModel esscher_triplet(const LevyModel& m, double theta);

// One increment L_{dt} (exact in law).
double sample_increment(const LevyModel& m, double dt, Rng& rng);

// Increment together with its squared-jump contribution to the quadratic
// variation over the step: Brownian -> b dt (continuous part); compound
// Poisson -> sum of squared jumps.  Unsupported for the other families.
struct IncrementQv {
    double dl;
    double d_qv;
};
IncrementQv sample_increment_qv(const LevyModel& m, double dt, Rng& rng);

// n i.i.d. draws of L_{dt}; deterministic given seed.
std::vector<double> sample_increments(const LevyModel& m, double dt, int n,
                                      std::uint64_t seed);

} // namespace lssm
