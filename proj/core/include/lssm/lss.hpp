#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lssm/kernels.hpp"
#include "lssm/levy.hpp"
#include "lssm/volatility.hpp"

// Lévy semistationary processes
//
//   Y_t = mu + int_{-inf}^t g(t-s) omega_{s-} dL_s + int_{-inf}^t q(t-s) a_s ds
//
// with a memory kernel g, stochastic volatility omega (independent of the
// driver L) and an optional drift channel (q, a).  This header provides
// integrability diagnostics, path simulation (left-point scheme over a
// truncated window, two-sided via an independent pre-zero stream), the
// conditional and stationary second-order structure, the semimartingale
// decomposition and the quadratic variation, plus superpositions of
// independent factors.

namespace lssm {

// Probability-density drift kernel q(x) = rate^shape/Gamma(shape) *
// x^{shape-1} e^{-rate x}.  Integrates to one; square-integrable only for
// shape > 1/2; singular at zero for shape < 1.  truncation_horizon uses the
// L1 tail mass (the natural notion for a drift kernel).
std::shared_ptr<const Kernel> make_gamma_density_kernel(double shape,
                                                        double rate);

struct LssProcess {
    double mu = 0.0;
    std::shared_ptr<const Kernel> g;  // memory kernel (required)
    std::shared_ptr<const Kernel> q;  // optional drift kernel
    LevyModel driver = LevyModel::brownian(0.0, 1.0);
    VolatilityModel vol = VolatilityModel::constant(1.0);

    // Wired drift choice a_s = gamma_skew * omega_s^2 (reuses the volatility
    // path).  Other drift processes are accepted only as user-supplied paths
    // in simulate_detail.
    bool drift_from_vol = false;
    double gamma_skew = 0.0;

    bool has_drift() const { return static_cast<bool>(q); }
    void validate() const;  // throws ConfigError

    nlohmann::json to_json() const;
    static LssProcess from_json(const nlohmann::json& j);
};

struct SimConfig {
    double dt = 0.01;
    double horizon = 1.0;
    double truncation_eps = 1e-6;  // L2 tail mass kept outside the window
    int n_paths = 1;
    std::uint64_t seed = 1;

    void validate() const;  // dt > 0, dt < horizon, eps in (0,1), n_paths >= 1
};

// Discretization geometry implied by (process, config): number of post-zero
// steps, window cells m_w (so a user drift path must supply m_w + n_steps
// left-endpoint values) and the truncation horizon actually used.
struct GridInfo {
    std::size_t n_steps = 0;
    std::size_t window_cells = 0;
    double t_tr = 0.0;
};
GridInfo sim_grid(const LssProcess& p, const SimConfig& c);

struct SimResult {
    std::vector<double> times;               // 0, dt, ..., n_steps*dt
    std::vector<std::vector<double>> paths;  // n_paths rows
    double dt = 0.0;
};

// Matrix simulation, parallel across paths with per-path derived streams.
// Supports the no-drift and drift_from_vol configurations.
SimResult simulate(const LssProcess& p, const SimConfig& c);

// Single path retaining the ingredients of the discretized integral: the
// volatility and driver increments per cell (cells j = -pre_steps ..
// n_steps-1, stored at index j + pre_steps).  d_qv holds the increments of
// [L] when the driver supports them (Brownian, compound Poisson), else it is
// empty.  Uses the same streams as path 0 of simulate(); for drivers whose
// quadratic variation requires resolving individual jumps the draws (and
// hence the path) may differ from simulate().
struct PathDetail {
    std::vector<double> times;
    std::vector<double> y;
    double dt = 0.0;
    std::size_t pre_steps = 0;
    std::vector<double> omega_sq;
    std::vector<double> dl;
    std::vector<double> d_qv;
};
PathDetail simulate_detail(const LssProcess& p, const SimConfig& c,
                           const std::vector<double>* a_path = nullptr);

// --- integrability -------------------------------------------------------

struct IntegrabilityCondition {
    bool applies = true;
    bool pass = false;
    double value = 0.0;  // the computed integral (may be +infinity)
    std::string label;
};

// Report-only diagnostics: (a) Gaussian-part integrability b*int g^2*E[w^2],
// (b) square-integrability int g^2 * E[w^2] < inf, (c) for drift kernels the
// split-exponent sufficient condition (int q^{2a} < inf and
// int q^{2(1-a)} E[a_s^2] < inf for some a in (0,1)).
struct IntegrabilityReport {
    IntegrabilityCondition gaussian_part;
    IntegrabilityCondition square_integrability;
    IntegrabilityCondition drift_split;
    bool pass() const {
        return (!gaussian_part.applies || gaussian_part.pass) &&
               (!square_integrability.applies || square_integrability.pass) &&
               (!drift_split.applies || drift_split.pass);
    }
};
IntegrabilityReport check_integrability(const LssProcess& p);

// --- second-order structure ----------------------------------------------

// Conditional moments given a discrete volatility window: omega_sq_path[i] is
// omega^2 at time t - (M-1-i)*dt (last entry = "now").  The window must cover
// the truncation horizon for eps.  mean includes the drift_from_vol channel
// when configured.
struct ConditionalMoments {
    double mean = 0.0;
    double var = 0.0;
    std::function<double(double)> cov;  // lag h >= 0
};
ConditionalMoments moments_conditional(const LssProcess& p,
                                       const std::vector<double>& omega_sq_path,
                                       double dt,
                                       double truncation_eps = 1e-6);

// Stationary mean/variance and autocorrelation.  When kappa1 != 0 and the
// volatility is stochastic, E[omega] and the autocovariance of omega have no
// closed form and are estimated from an internal (deterministically seeded)
// long volatility path; used_mc_vol_stats flags that.
struct StationaryMoments {
    double mean = 0.0;
    double var = 0.0;
    std::function<double(double)> acf;  // correlation at lag h >= 0
    bool used_mc_vol_stats = false;
};
StationaryMoments moments_stationary(const LssProcess& p);

// Same with user-supplied volatility statistics (stationary E[omega] and the
// autocovariance function of omega; E[omega^2] still comes from p.vol).
struct VolOmegaStats {
    double mean_omega = 0.0;
    std::function<double(double)> acvf_omega;  // gamma(h), h >= 0
};
StationaryMoments moments_stationary(const LssProcess& p,
                                     const VolOmegaStats& stats);

// --- semimartingale structure --------------------------------------------

// Sufficient-condition check: finite-mean driver; g(0+), q(0+) finite; g
// absolutely continuous with square-integrable derivative.  When true, Y_t =
// Y_0 + g(0+) int_0^t omega_{s-} d(L_s - kappa1 s) + int_0^t A_s ds, and
// drift_at evaluates A on a simulated PathDetail cell.
struct SemimartingaleReport {
    bool is_semimartingale = false;
    double g0 = 0.0;  // +infinity when g(0+) diverges
    double q0 = 0.0;
    bool driver_mean_finite = true;
    bool kernel_smooth = false;
    bool drift_smooth = true;
    std::string reason;  // first failed condition; empty when none

    // A_{t_k} for k = 0 .. n_steps-1 (post-zero cells of the detail path);
    // only valid when is_semimartingale.
    std::function<double(const PathDetail&, std::size_t)> drift_at;
};
SemimartingaleReport semimartingale_decompose(const LssProcess& p);

// Analytic quadratic variation g(0+)^2 sum omega^2 d[L] accumulated along a
// detailed path versus the realized sum of squared increments.
struct QvResult {
    std::vector<double> times;     // grid of the path (post-zero)
    std::vector<double> analytic;  // [Y]_t along the path
    std::vector<double> realized;  // sum (Y_{k} - Y_{k-1})^2 up to t
};
QvResult quadratic_variation(const PathDetail& path, const LssProcess& p);

// --- superposition ---------------------------------------------------------

struct SuperposedLss {
    std::vector<LssProcess> factors;
    std::vector<double> weights;
};

// Validates: same nonzero length, nonnegative weights summing to one; the
// factors are simulated with independent derived streams.
SuperposedLss superpose(const std::vector<LssProcess>& factors,
                        const std::vector<double>& weights);

SimResult simulate(const SuperposedLss& sp, const SimConfig& c);

// mean = sum w_i mean_i, var = sum w_i^2 var_i,
// acf = sum w_i^2 var_i acf_i / sum w_i^2 var_i.
StationaryMoments moments_stationary(const SuperposedLss& sp);

} // namespace lssm
