#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lssm/lss.hpp"
#include "lssm/spot.hpp"

// Forward prices F_t(T) = E_Q[S_T | F_t] for spot models built on a
// moving-average core, under two families of equivalent pricing measures:
//
//   - GeneralEsscher: exponential tilt of the driving process L by a constant
//     theta (applied from time 0 on) and of the volatility subordinator by
//     eta.  The forward is the realized weighted integral times a conditional
//     expectation over the future volatility, evaluated by quadrature
//     (constant volatility) or Monte Carlo (OU volatility).
//
//   - BrownianGirsanov: for Brownian drivers, a drift shift of the Wiener
//     process by theta(s)/omega_{s-} so that the kernel-weighted drift added
//     to the log forward is G(T,s) theta(s); the volatility subordinator is
//     tilted by eta.  Geometric forwards are then exponentially affine in the
//     OU volatility state, giving closed formulas up to one-dimensional
//     quadratures.
//
// Both measures leave the pre-zero history untouched (the tilt parameters
// vanish on s < 0), so realized windows simulated under the physical measure
// feed the pricing formulas unchanged.
//
// The geometric constant-volatility forward includes the variance half-term
// (1/2) int_t^T G^2(T,s) omega^2 ds of the lognormal conditional expectation;
// this is what makes t -> F_t(T) a martingale (verified by the paired
// Monte Carlo drift tests).

namespace lssm {

struct EsscherParams {
    double theta = 0.0;  // tilt of the driver (Girsanov drift scale for mode
                         // BrownianGirsanov)
    double eta = 0.0;    // tilt of the volatility subordinator
};

enum class MeasureMode { GeneralEsscher, BrownianGirsanov };

std::string to_string(MeasureMode m);
MeasureMode measure_mode_from_string(const std::string& s);

struct PricingMeasure {
    EsscherParams esscher;
    MeasureMode mode = MeasureMode::GeneralEsscher;

    // Structural admissibility for the given core process: BrownianGirsanov
    // requires a Brownian driver; theta must lie inside the driver cumulant
    // strip (GeneralEsscher); eta must lie inside the cumulant strip of the
    // volatility subordinator when the volatility is of OU type.  Throws
    // ConfigError.
    void validate(const LssProcess& p) const;

    nlohmann::json to_json() const;
    static PricingMeasure from_json(const nlohmann::json& j);
};

// Sufficient-condition report for the Girsanov density to be a true
// martingale.  With an exponentially factorizing volatility intensity the
// envelope j(t) = e^{-lambda t} is exact and the criterion reads
//   (1/2) int_0^T theta^2 / j(s) ds  <  C,
// where E[exp(u / omega_0^2)] must be finite for u in [0, C).  The report is
// advisory: `sufficient == false` means the criterion is inconclusive, not
// that the measure change is invalid.
struct NovikovReport {
    bool applies = false;     // theta != 0 and a positive envelope j exists
    double bound = 0.0;       // (1/2) int_0^T theta^2 / j
    double mgf_limit = 0.0;   // C above; +infinity when omega is bounded away
                              // from zero, 0 when no positive limit is known
    bool sufficient = false;  // bound < mgf_limit
    std::string note;
};
NovikovReport novikov_check(const LssProcess& p, double theta, double horizon);

// Realized state of the filtration at time t, extracted from a simulated
// path: the volatility-weighted driver increments over the truncation window
// (cell m counted backwards from t covers (t - m dt, t - (m-1) dt]), the
// squared volatility and the core value at t.
struct ForwardState {
    double t = 0.0;
    double dt = 0.0;
    // omega_{s-} dL per cell, oldest first; at most `window_cells` of them
    // enter any weighted integral (the simulation truncation window).
    std::vector<double> weighted_increments;
    std::size_t window_cells = 0;
    double z = 0.0;  // squared volatility at t
    double y = 0.0;  // core value Y_t
    bool z_is_stationary_mean = false;  // z was filled from the stationary
                                        // mean instead of a realized value
};

struct ForwardSurface {
    SpotModel model;
    PricingMeasure measure;
    ForwardState state;

    // State at path cell k (time k dt); k defaults to the end of the path.
    // The core process must not use the drift channel (q, a).  Throws
    // ConfigError on structural violations.
    static ForwardSurface from_path(const SpotModel& m, const PricingMeasure& q,
                                    const PathDetail& pd, std::size_t k);
    static ForwardSurface from_path(const SpotModel& m, const PricingMeasure& q,
                                    const PathDetail& pd);
};

// Realized weighted integral M_t(T) = int_{-inf}^t G(T,s) omega_{s-} dL_s
// evaluated on the stored window with the same cell weights as the path
// simulation (first cell at lag T-t averaged, later cells right-point), so
// that M_t(t) reproduces Y_t - mu exactly.  Requires T >= t.
double realized_weighted_integral(const ForwardSurface& fs, double T);

// Geometric forward under BrownianGirsanov (driftless Brownian driver with
// variance b enforced):
//   F_t(T) = Lambda(T) exp( mu + M_t(T) + theta int_t^T G(T,s) ds + V ),
// where for constant volatility c
//   V = (1/2) b c int_t^T G^2(T,s) ds,
// and for OU volatility with rate lambda, state Z_t and process-time
// subordinator V (cumulant phi),
//   V = (1/2) b Z_t H(t) + int_t^T phi^eta((1/2) b H(v)) dv,
//   H(v) = int_v^T G^2(T,s) e^{-lambda(s-v)} ds.
// The theta drift covers the remaining window (t, T] only: the realized
// window enters as observed data, which also makes F_T(T) = S_T exact for
// any theta.
// Throws ConfigError for unsupported volatility families (the OU formulas
// need a Markov volatility state) and MathError on exponential-moment
// failures.
double forward_geometric_gaussian(const ForwardSurface& fs, double T);

// Same value written as an explicit function of (Y_t, Z_t) through the
// exponential factorization of the kernel; requires affinity_check to pass.
double forward_geometric_gaussian_affine(const ForwardSurface& fs, double T);

// Geometric forward under a general Esscher pair (theta, eta):
//   F_t(T) = Lambda(T) exp(mu + M_t(T)) *
//            E_eta[ exp( int_t^T phi_L^theta(G(T,s) omega_s) ds ) | F_t ],
// with phi_L^theta(x) = phi_L(x + theta) - phi_L(theta).  The conditional
// expectation collapses to a quadrature for constant volatility and is
// estimated by n_mc Monte Carlo paths of the tilted OU volatility otherwise
// (started from the current state; `seed` derives the streams).  Strip
// violations of the driver cumulant raise MathError annotated with the
// offending argument (and, for the MC branch, the sample quantile at which
// the strip was exited).
double forward_geometric_esscher(const ForwardSurface& fs, double T,
                                 int n_mc = 10000, std::uint64_t seed = 1);

// Arithmetic forward:
//   F_t(T) = Lambda(T) + mu + M_t(T)
//          + E_theta[L_1] int_t^T G(T,s) E_eta[omega_s | F_t] ds
// in GeneralEsscher mode (E_eta[omega_s|F_t] closed for constant volatility,
// Monte Carlo otherwise), and
//   F_t(T) = Lambda(T) + mu + M_t(T) + theta int_t^T G(T,s) ds
// in BrownianGirsanov mode (no dependence on the volatility).
double forward_arithmetic(const ForwardSurface& fs, double T,
                          int n_mc = 10000, std::uint64_t seed = 1);

// --- affinity ---------------------------------------------------------------

// A stationary kernel makes the geometric forward an explicit function of
// (Y_t, Z_t) exactly when it factorizes as G(t,s) = g1(t) g2(s), and the only
// stationary kernels with that property are the exponential ones g(x) =
// c e^{-alpha x}.  The check probes the ratio g(x + d)/g(x) at several x and
// returns the factorization g1(t) = c e^{-alpha t}, g2(s) = e^{alpha s} when
// it is constant.
struct AffinityResult {
    bool affine = false;
    double alpha = 0.0;  // decay rate of the exponential factorization
    double scale = 0.0;  // c = g(x) e^{alpha x}
    std::function<double(double)> g1, g2;  // set when affine
    std::string note;
};
AffinityResult affinity_check(const Kernel& k);

// A two-argument product kernel is affine by construction; the factorization
// is recovered from sections through a base point (G(*, s0), G(t0, *)),
// normalized so g1(t) g2(s) == G(t,s).
AffinityResult affinity_check(const SeparableKernel& k, double t0 = 0.0,
                              double s0 = 0.0);

// Stochastic part of the log forward for a separable kernel: with
// Y_t = g1(t) X_t realized, M_t(T) = (g1(T)/g1(t)) Y_t; as T grows this
// converges to g1(inf)/g1(t) Y_t (a randomly fluctuating long end when
// g1(inf) != 0).
double separable_forward_log_stochastic(const SeparableKernel& k, double t,
                                        double T,
                                        double log_spot_over_seasonal);

// --- risk-neutral dynamics --------------------------------------------------

// Instantaneous lognormal volatility of dF/F at time t for maturity T:
// sigma_F(t,T) = G(T,t) sqrt(b) omega_{t-}, with omega taken from the
// surface state (frozen-volatility curve in T) and b the driver variance.
// Requires BrownianGirsanov mode and t <= T.
double forward_vol_term_structure(const ForwardSurface& fs, double T, double t);

// Correlation between the stochastic parts of the log forward and the log
// spot in the Gaussian constant-volatility setting:
//   rho(t,T) = int_{-inf}^t G(T,s) G(t,s) ds /
//              sqrt(int G^2(T,s) ds int G^2(t,s) ds)
//            = overlap(T-t) / sqrt(l2_tail_sq(T-t) l2_norm_sq).
double forward_spot_correlation(const Kernel& k, double t, double T);

// One Euler step of the risk-neutral forward dynamics
//   dF/F_{t-} = G(T,t) omega_{t-} dW + int (e^{(1/2) H_T(t,t) z} - 1) dN~,
// with H_T(t,t) = int_t^T G^2(T,s) e^{-lambda(s-t)} ds and the jump measure
// compensated under the eta-tilted subordinator.  The sampled relative
// increment uses the subordinator increment over dt in place of the
// individual jumps, recentred with its exact exponential moment, so the step
// has mean zero exactly.
struct ForwardStepModel {
    double diffusion = 0.0;   // G(T,t) omega_{t-}
    double jump_scale = 0.0;  // (1/2) H_T(t,t)
    bool has_jumps = false;
    LevyModel tilted_subordinator;      // process-time, eta-tilted
    double compensator_cumulant = 0.0;  // phi^eta(jump_scale)
    double dt = 0.0;

    // One draw of F_{t+dt}/F_t - 1.
    double sample_relative_increment(Rng& rng) const;
};
ForwardStepModel risk_neutral_forward_step(const ForwardSurface& fs, double T,
                                           double dt);

// Forward curve row emitted by the command-line tools.
struct ForwardCurvePoint {
    double maturity = 0.0;
    double price = 0.0;
    double sigma_f = 0.0;
};
std::vector<ForwardCurvePoint> forward_curve(const ForwardSurface& fs,
                                             const std::vector<double>& maturities,
                                             int n_mc = 10000,
                                             std::uint64_t seed = 1);

} // namespace lssm
