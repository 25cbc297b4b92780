#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lssm/distributions.hpp"
#include "lssm/levy.hpp"
#include "lssm/rng.hpp"

// Stationary squared-volatility processes omega^2 modulating the LSS noise:
//
//   - Constant: omega^2 = c.
//   - BnsOu:    OU process driven by a Levy subordinator U, run in the time
//               scale that makes the stationary law independent of the
//               mean-reversion rate lambda (Barndorff-Nielsen/Shephard
//               convention):  omega_s^2 = int_{-inf}^s e^{-lambda(s-u)} dU_{lambda u}.
//   - GigOu:    gamma-kernel construction with a prescribed generalised
//               inverse Gaussian stationary law.  The exposed path is the OU
//               mixing state sigma^2 (exact GIG marginals, e^{-lambda h}
//               autocorrelation); the instantaneous intensity entering the
//               LSS integrals is the convolution of the driving subordinator
//               with a gamma-density smoothing kernel and is available from
//               VolPathSampler::sample_detail.
//
// OU-type models share the closed-form autocovariance Var * e^{-lambda h} of
// the squared process; the autocovariance of omega itself has no closed form
// and is estimated by Monte Carlo (vol_acvf_omega_mc).

namespace lssm {

// Scaled gamma density  scale * rate^shape t^{shape-1} e^{-rate t} / Gamma(shape)
// used as a convolution kernel; antiderivatives are regularised incomplete
// gamma functions, so exact cell masses are cheap.
struct GammaDensityKernel {
    double shape = 1.0; // > 0
    double rate = 1.0;  // > 0
    double scale = 1.0; // total integral over (0, inf)

    double operator()(double t) const;
    // int_a^b of the kernel; b may be +inf.
    double integral(double a, double b) const;
    // Smallest T with int_T^inf <= eps * scale.
    double truncation_horizon(double eps) const;
};

// The two gamma-density kernels of the GIG OU construction with shape nu in
// (1/2, 1) and rate lambda: `smoothing` (total mass 1/lambda) maps the
// driving subordinator to the instantaneous squared volatility, and `drift`
// equals the square of the Gamma(nu, lambda) simulation kernel.  Both
// convolve with the smoothing kernel to e^{-lambda t}:
//   (drift * smoothing)(t) = e^{-lambda t}.
struct GigOuKernels {
    GammaDensityKernel smoothing; // shape 2 - 2 nu, rate lambda, mass 1/lambda
    GammaDensityKernel drift;     // shape 2 nu - 1, rate lambda, mass 1
};
GigOuKernels gig_ou_kernels(double nu, double lambda);

// Levy density w1 of the unit-rate background driving subordinator whose
// OU stationary law is the given GIG law: w1(y) = -(d/dy)[y * u(y)] with u
// the Levy density of the (self-decomposable) GIG law, evaluated through its
// Bessel integral representation (closed form when chi = 0).
double bdlp_levy_density(const GigParams& target, double y);

// Exact-in-law increments of the background driving subordinator of a GIG OU
// process, per unit of *effective* time (the subordinator clock in which the
// stationary law is rate-free).  Three branches:
//   - gamma marginal (chi = 0):          compound Poisson with exponential jumps;
//   - inverse-Gaussian marginal (-1/2):  IG subordinator part plus compound
//                                        Poisson gamma(1/2) jumps (exact);
//   - general:                           compound Poisson approximation from the
//                                        numerically inverted Levy measure with
//                                        drift-compensated small jumps and
//                                        relative tail-mass cutoff 1e-8.
class BdlpSampler {
  public:
    // force_numeric bypasses the closed-form branches (diagnostic hook used
    // to validate the numeric inversion against the exact special cases).
    explicit BdlpSampler(const GigParams& target, bool force_numeric = false);

    // One increment over effective time h >= 0.
    double sample(double h, Rng& rng) const;

    // E[U_1] per unit effective time (equals the mean of the target law).
    double mean_rate() const;
    bool uses_table() const;

  private:
    enum class Branch { GammaMarginal, IgMarginal, Numeric };

    void build_table();

    GigParams target_;
    Branch branch_ = Branch::Numeric;
    double mean_rate_ = 0.0;
    // gamma branch: jump rate lambda, jump rate parameter psi/2
    // IG branch: delta, gam, compound rate delta*gam/2
    double delta_ = 0.0;
    double gam_ = 0.0;
    // numeric branch
    double jump_rate_ = 0.0;  // jumps above the small-jump cutoff, per unit time
    double drift_ = 0.0;      // compensates the dropped small-jump mean
    // jump sizes (log-spaced) with the tail jump rate above each; sampling
    // inverts the tail-rate function by binary search + linear interpolation
    std::vector<double> jump_x_;
    std::vector<double> jump_tail_;
};

std::vector<double> sample_bdlp_increments(const GigParams& target, std::size_t n,
                                           double h, std::uint64_t seed);

enum class VolFamily { Constant, BnsOu, GigOu };

struct VolatilityModel {
    VolFamily family = VolFamily::Constant;
    double c = 1.0;          // Constant: level of omega^2 (>= 0)
    double lambda = 1.0;     // BnsOu / GigOu: mean-reversion rate (> 0)
    LevyModel subordinator;  // BnsOu: driving subordinator U (unit time scale)
    double nu = 0.75;        // GigOu: gamma-kernel shape, 1/2 < nu < 1
    GigParams target;        // GigOu: stationary law of the mixing process

    static VolatilityModel constant(double c);
    static VolatilityModel bns_ou(double lambda, const LevyModel& subordinator);
    static VolatilityModel gig_ou(double nu, double lambda, const GigParams& target);

    // Stationary mean / variance of the exposed squared-volatility process.
    // Throws MathError when the target law has an infinite moment.
    double stationary_mean() const;
    double stationary_var() const;

    void validate() const; // throws ConfigError
    std::string family_name() const;

    nlohmann::json to_json() const;
    static VolatilityModel from_json(const nlohmann::json& j);
};

// Stationary E[omega^2].
double vol_mean(const VolatilityModel& v);

// Autocovariance at lag h >= 0.  For Constant the value is the (identically
// zero) autocovariance of omega itself; for OU-type models the closed form
// covers the *squared* process, gamma_{omega^2}(h) = Var[omega^2] e^{-lambda h},
// and `of_squared` flags which quantity is reported.
struct VolAcvf {
    double value = 0.0;
    bool of_squared = false;
};
VolAcvf vol_acvf(const VolatilityModel& v, double h);

// The subordinator V driving the OU recursion in process time, phi_V(x) =
// lambda * phi_U(x); closed within the family by scaling its time-rate
// parameter.  Defined for BnsOu only (ConfigError otherwise).
LevyModel effective_subordinator(const VolatilityModel& v);

// One discretized stationary path on a uniform grid.
struct VolPathDetail {
    // Instantaneous squared volatility at the grid points (enters the LSS
    // integrals); equals `mixing` except for GigOu.
    std::vector<double> omega_sq;
    // OU state path: BnsOu omega^2 recursion, GigOu mixing process sigma^2
    // with exact GIG marginals.  Constant: filled with c.
    std::vector<double> mixing;
    // Increments of the background driving subordinator over each grid step
    // (effective-time increments; empty for Constant), size n - 1.
    std::vector<double> du;
};

// Reusable sampler: precomputes the jump table (GigOu general targets) and
// the smoothing-kernel cell weights for the given step size.  Immutable
// after construction; sample calls are const and may run concurrently on
// disjoint Rng streams.
class VolPathSampler {
  public:
    VolPathSampler(const VolatilityModel& v, double dt);

    VolPathDetail sample_detail(std::size_t n, Rng& rng) const;
    std::vector<double> sample(std::size_t n, Rng& rng) const;

    double dt() const { return dt_; }

  private:
    VolatilityModel v_;
    double dt_ = 0.0;
    double decay_ = 1.0;               // e^{-lambda dt}
    std::size_t burn_steps_ = 0;       // BnsOu
    std::shared_ptr<const BdlpSampler> bdlp_; // GigOu
    std::vector<double> smooth_w_;     // GigOu: smoothing-kernel cell weights
};

// Convenience wrappers (exact stationary start for GigOu, 20/lambda burn-in
// from the stationary mean for BnsOu, per the path-sampling contract).
std::vector<double> sample_vol_path(const VolatilityModel& v, std::size_t n,
                                    double dt, std::uint64_t seed);
VolPathDetail sample_vol_detail(const VolatilityModel& v, std::size_t n,
                                double dt, std::uint64_t seed);

// Monte Carlo estimate of the autocovariance of omega = sqrt(omega^2) at
// lags {0, dt, ..., n_lags dt} from one long stationary path of n_steps
// points (no closed form exists for subordinator-driven volatility).
std::vector<double> vol_acvf_omega_mc(const VolatilityModel& v, int n_lags,
                                      double dt, std::size_t n_steps,
                                      std::uint64_t seed);

} // namespace lssm
