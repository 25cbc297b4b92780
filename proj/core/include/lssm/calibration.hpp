#pragma once

// Empirical pipeline for daily energy spot prices: robust removal of the
// seasonal log-trend, generalized-hyperbolic marginal fitting ranked by AIC,
// and memory-kernel estimation from the sample autocorrelation function
// (gamma-density kernel via its closed-form ACF, CARMA(2,1) via the
// closed-form stationary covariance of the state-space representation).

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lssm/distributions.hpp"
#include "lssm/io.hpp"
#include "lssm/kernels.hpp"
#include "lssm/spot.hpp"

namespace lssm {

// Result of the Huber-weighted iterated reweighted least-squares fit of the
// seasonal log-trend (see Seasonality for the functional form).
struct SeasonalFit {
    Seasonality seasonality;
    std::vector<double> residuals;  // log S_t - log Lambda_hat(t)
    std::vector<double> time;       // business-day index 0..n-1
    int iterations = 0;             // IRLS sweeps actually performed
    double huber_c = 0.0;           // final Huber threshold (1.345 * scale)
    bool collinear = false;         // design matrix rank-deficient
    std::string note;
};

// Fits the seasonal log-trend to log prices by IRLS with Huber weights
// (threshold 1.345 times the MAD-based scale estimate, re-estimated each
// sweep).  Requires n >= 100 (ConfigError) and positive prices.  Collinear
// designs (e.g. weekly-aggregated data where the weekly harmonic is constant)
// are reported via the collinear flag rather than an exception.
SeasonalFit deseasonalize(const PriceSeries& s, int robust_iters = 20);

// Sample autocorrelation with biased (1/n) normalization; result has
// max_lag + 1 entries and result[0] = 1.  Requires max_lag >= 1 and
// max_lag < n/2 (ConfigError); zero-variance input raises MathError.
std::vector<double> empirical_acf(const std::vector<double>& x,
                                  std::size_t max_lag);

// Closed-form stationary autocorrelation at lag h >= 0 of an LSS process
// with the gamma-density kernel g(t) ~ t^{nu-1} e^{-lambda t}:
//   Cor(h) = (x^m K_m(x)) / (2^{nu-3/2} Gamma(nu-1/2)),
//   x = lambda h / 2,  m = nu - 1/2,
// evaluated in log space through the modified Bessel function of the second
// kind.  Requires nu > 1/2, lambda > 0, h >= 0 (ConfigError); the h = 0
// value is 1 by continuity.  For nu = 1 the formula collapses to
// exp(-lambda h / 2), the OU autocorrelation in this kernel's convention.
double gamma_acf_theoretical(double nu, double lambda, double h);

// Kernel families available to the ACF least-squares fit.
enum class AcfKernelFamily { Gamma, Carma21 };

std::string to_string(AcfKernelFamily f);
AcfKernelFamily acf_kernel_family_from_string(const std::string& s);

struct AcfFitResult {
    std::shared_ptr<const Kernel> kernel;  // fitted kernel, ready to use
    double sse = 0.0;                      // sum of squared acf errors
    std::size_t lags_used = 0;
    std::vector<double> empirical;  // emp[0..lags_used], as supplied
    std::vector<double> fitted;     // model acf at lags 0..lags_used
    bool converged = false;
    std::string note;  // "underdetermined" / "parameter at bound" warnings
};

// Least-squares fit of a kernel family's stationary ACF to an empirical ACF:
// minimizes sum_{h=1..lags} (emp[h] - model_acf(h))^2 over the family's
// parameters by deterministic multi-start Nelder-Mead (no randomness, so
// repeated calls are bitwise reproducible).  emp must contain at least
// lags + 1 entries (emp[0] at lag zero).  lags >= 1; fits with lags < 5 are
// returned with an "underdetermined" note.  Non-stationary CARMA proposals
// are rejected inside the objective, never constructed.
AcfFitResult fit_kernel_acf(const std::vector<double>& emp,
                            AcfKernelFamily family, std::size_t lags);

// --- full pipeline -----------------------------------------------------------

struct PipelineConfig {
    int robust_iters = 20;      // IRLS sweeps for deseasonalize
    std::size_t acf_lags = 0;   // 0 -> floor(sqrt(n))
    int threads = 0;            // 0 -> library default (marginal fits)
    std::string out_dir;        // when nonempty, write report.json + tables/
};

struct PipelineReport {
    SeasonalFit seasonal;
    std::vector<FittedModel> marginals;  // all 11 configurations, AIC-ranked
    std::vector<double> acf;             // empirical acf, lags 0..L
    AcfFitResult gamma_fit;
    AcfFitResult carma_fit;

    nlohmann::json to_json() const;
};

// Runs the five pipeline stages in order: input validation, deseasonalize,
// marginal fitting (five GH families in symmetric and asymmetric variants
// plus Gaussian, fitted concurrently and ranked by AIC), empirical ACF of
// the residuals, and the two kernel fits; when out_dir is set a sixth stage
// writes report.json and tables/*.csv.  Errors propagate with their original
// type, prefixed "pipeline stage k (<name>): ".
PipelineReport run_pipeline(const PriceSeries& s,
                            const PipelineConfig& cfg = {});

} // namespace lssm
