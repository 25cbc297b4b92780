#pragma once

#include <string>
#include <vector>

#include "lssm/rng.hpp"

// Generalised inverse Gaussian (GIG) and generalised hyperbolic (GH)
// distributions: densities, the (lambda, alpha_bar) normalised
// parametrisation with E[W] = 1 for the GIG mixing variable, exact samplers,
// and maximum-likelihood fitting of the GH subfamilies with AIC ranking.
//
// GH variables arise as normal mean-variance mixtures
//   X = mu + W gamma + sqrt(W) sigma Z,   W ~ GIG(lambda, chi, psi).

namespace lssm {

struct GigParams {
    double lambda = 0.0;
    double chi = 0.0;
    double psi = 0.0;

    // Admissible regions: (chi>0, psi>=0, lambda<0), (chi>0, psi>0,
    // lambda=0), or (chi>=0, psi>0, lambda>0).  Throws ConfigError otherwise.
    void validate() const;
};

enum class GhFamily { Ghyp, Nig, StudentT, Hyp, Vg, Gaussian };

std::string to_string(GhFamily f);

struct GhParams {
    double lambda = -0.5;    // GIG shape
    double alpha_bar = 1.0;  // >= 0; 0 only for the VG / Student-t boundaries
    double mu = 0.0;         // location
    double sigma = 1.0;      // dispersion (> 0)
    double gamma = 0.0;      // symmetry (0 = symmetric)
};

struct FittedModel {
    GhParams params;
    GhFamily family = GhFamily::Gaussian;
    bool symmetric = true;
    double log_likelihood = 0.0;
    double aic = 0.0;
    int n_params = 0;
    bool converged = false;
};

// --- GIG -------------------------------------------------------------------

// Density of GIG(lambda, chi, psi); boundary regions evaluate the gamma
// (chi = 0) and inverse-gamma (psi = 0) limits.  Throws MathError for x <= 0.
double gig_density(double x, const GigParams& p);
double log_gig_density(double x, const GigParams& p);

// E[W^k] for k = 1, 2 (closed Bessel-ratio forms, boundary aware).
double gig_moment(const GigParams& p, int k);

// One exact draw; lambda = -1/2 uses the inverse-Gaussian sampler, boundary
// regions use gamma / inverse-gamma draws, the general case a cached
// ratio-of-uniforms envelope (see GigSampler for bulk use).
double gig_sample(Rng& rng, const GigParams& p);

// Reusable sampler: precomputes the mode-shifted ratio-of-uniforms envelope.
class GigSampler {
  public:
    explicit GigSampler(const GigParams& p);
    double operator()(Rng& rng) const;
    const GigParams& params() const { return p_; }

  private:
    GigParams p_;
    int branch_;  // 0 RoU, 1 gamma, 2 inv-gamma, 3 inverse-Gaussian
    double mode_ = 0.0, logh_mode_ = 0.0, vminus_ = 0.0, vplus_ = 0.0;
};

// --- (lambda, alpha_bar) parametrisation ------------------------------------

// chi/psi of the E[W] = 1 normalised GIG: psi = abar K_{l+1}(abar)/K_l(abar),
// chi = abar^2/psi.  Throws MathError when alpha_bar = 0 (boundary families
// carry their own normalisation, see mixing_gig).
GigParams alphabar_to_chipsi(double lambda, double alpha_bar);

// Mixing law of a GH family member including the alpha_bar = 0 boundaries:
// Student-t (lambda < -1): chi = 2(-lambda-1), psi = 0; VG (lambda > 0):
// chi = 0, psi = 2 lambda.  Gaussian has no mixing law (throws).
GigParams mixing_gig(const GhParams& p, GhFamily family);

// --- GH ----------------------------------------------------------------------

double gh_density(double x, const GhParams& p, GhFamily family);
double log_gh_density(double x, const GhParams& p, GhFamily family);

// Mean mu + gamma and variance sigma^2 + gamma^2 Var[W] (E[W] = 1 by
// normalisation).
double gh_mean(const GhParams& p, GhFamily family);
double gh_variance(const GhParams& p, GhFamily family);

double gh_sample(Rng& rng, const GhParams& p, GhFamily family);

// --- fitting -----------------------------------------------------------------

// Maximum likelihood over the family's free parameters (Nelder-Mead from
// moment-matched starts).  data.size() >= 50 required; zero-variance data
// rejected (MathError).
FittedModel fit_gh_family(const std::vector<double>& data, GhFamily family,
                          bool symmetric);

// Ascending AIC; ties broken by fewer parameters, then family order.
std::vector<FittedModel> rank_by_aic(std::vector<FittedModel> models);

} // namespace lssm
