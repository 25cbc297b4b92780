#include "lssm/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lssm/errors.hpp"
#include "lssm/optim.hpp"
#include "lssm/specfun.hpp"

namespace lssm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.837877066409345483560659472811;

using specfun::bessel_k_scaled;
using specfun::lgamma_fn;
using specfun::log_bessel_k;

// log of the unnormalised GIG density x^{lambda-1} e^{-(chi/x + psi x)/2}.
double log_gig_kernel(double x, const GigParams& p) {
    return (p.lambda - 1.0) * std::log(x) -
           0.5 * (p.chi / x + p.psi * x);
}

// log [ 2 (A/B)^{nu/2} K_nu(sqrt(AB)) ] for A >= 0, B > 0; the A -> 0 limit
// is finite for nu > 0 and +infinity otherwise (density spike).
double log_bessel_term(double nu, double A, double B) {
    if (A == 0.0) {
        if (nu > 0.0)
            return nu * std::log(2.0) + lgamma_fn(nu) - nu * std::log(B);
        return kInf;
    }
    const double u = std::sqrt(A * B);
    return std::log(2.0) + 0.5 * nu * (std::log(A) - std::log(B)) +
           log_bessel_k(nu, u);
}

} // namespace

void GigParams::validate() const {
    if (!(chi >= 0.0) || !(psi >= 0.0))
        throw ConfigError("gig params: chi and psi must be nonnegative");
    const bool ok = (lambda < 0.0 && chi > 0.0) ||
                    (lambda == 0.0 && chi > 0.0 && psi > 0.0) ||
                    (lambda > 0.0 && psi > 0.0);
    if (!ok)
        throw ConfigError("gig params: (lambda, chi, psi) outside the "
                          "admissible regions");
}

std::string to_string(GhFamily f) {
    switch (f) {
        case GhFamily::Ghyp: return "ghyp";
        case GhFamily::Nig: return "nig";
        case GhFamily::StudentT: return "student_t";
        case GhFamily::Hyp: return "hyp";
        case GhFamily::Vg: return "vg";
        case GhFamily::Gaussian: return "gaussian";
    }
    return "unknown";
}

// --- GIG ---------------------------------------------------------------------

double log_gig_density(double x, const GigParams& p) {
    if (!(x > 0.0)) throw MathError("gig_density: requires x > 0");
    p.validate();
    if (p.chi == 0.0) {
        // Gamma(lambda, psi/2) limit.
        const double beta = 0.5 * p.psi;
        return p.lambda * std::log(beta) - lgamma_fn(p.lambda) +
               (p.lambda - 1.0) * std::log(x) - beta * x;
    }
    if (p.psi == 0.0) {
        // Inverse-gamma(-lambda, chi/2) limit.
        const double a = -p.lambda, beta = 0.5 * p.chi;
        return a * std::log(beta) - lgamma_fn(a) +
               (p.lambda - 1.0) * std::log(x) - beta / x;
    }
    const double eta = std::sqrt(p.chi * p.psi);
    return 0.5 * p.lambda * (std::log(p.psi) - std::log(p.chi)) -
           std::log(2.0) - log_bessel_k(p.lambda, eta) + log_gig_kernel(x, p);
}

double gig_density(double x, const GigParams& p) {
    return std::exp(log_gig_density(x, p));
}

double gig_moment(const GigParams& p, int k) {
    if (k != 1 && k != 2)
        throw MathError("gig_moment: only k = 1, 2 supported");
    p.validate();
    if (p.chi == 0.0) {
        const double beta = 0.5 * p.psi;
        return k == 1 ? p.lambda / beta
                      : p.lambda * (p.lambda + 1.0) / (beta * beta);
    }
    if (p.psi == 0.0) {
        const double a = -p.lambda, beta = 0.5 * p.chi;
        if (a <= static_cast<double>(k))
            throw MathError("gig_moment: moment does not exist for this "
                            "inverse-gamma boundary");
        return k == 1 ? beta / (a - 1.0)
                      : beta * beta / ((a - 1.0) * (a - 2.0));
    }
    const double eta = std::sqrt(p.chi * p.psi);
    const double ratio =
        bessel_k_scaled(p.lambda + k, eta) / bessel_k_scaled(p.lambda, eta);
    return std::pow(p.chi / p.psi, 0.5 * k) * ratio;
}

GigSampler::GigSampler(const GigParams& p) : p_(p) {
    p_.validate();
    if (p_.chi == 0.0) {
        branch_ = 1;
        return;
    }
    if (p_.psi == 0.0) {
        branch_ = 2;
        return;
    }
    if (p_.lambda == -0.5) {
        branch_ = 3;
        return;
    }
    branch_ = 0;
    // Ratio-of-uniforms with mode shift: sample (u, v) uniform on
    // [0,1] x [vminus, vplus]; accept x = mode + v/u when
    // u^2 <= h(x)/h(mode) with h the unnormalised density.
    const double lm1 = p_.lambda - 1.0;
    mode_ = (lm1 + std::sqrt(lm1 * lm1 + p_.chi * p_.psi)) / p_.psi;
    logh_mode_ = log_gig_kernel(mode_, p_);
    auto phi = [this](double y) {  // log of |y| sqrt(h(mode+y)/h(mode))
        const double x = mode_ + y;
        if (x <= 0.0 || y == 0.0) return -kInf;
        return std::log(std::fabs(y)) +
               0.5 * (log_gig_kernel(x, p_) - logh_mode_);
    };
    // sup of phi over a log-spaced grid, refined by golden section between
    // the best grid point's neighbours (guards against local maxima).
    auto log_sup = [&phi](double lo, double hi) {
        const int n = 400;
        const double llo = std::log(lo), lhi = std::log(hi);
        int best = 0;
        double best_val = -kInf;
        std::vector<double> ys(n);
        for (int i = 0; i < n; ++i) {
            ys[static_cast<size_t>(i)] =
                std::exp(llo + (lhi - llo) * i / (n - 1.0));
            const double v = phi(ys[static_cast<size_t>(i)]);
            if (v > best_val) {
                best_val = v;
                best = i;
            }
        }
        const double a = ys[static_cast<size_t>(std::max(0, best - 1))];
        const double b = ys[static_cast<size_t>(std::min(n - 1, best + 1))];
        const double ystar = optim::golden_min(
            [&phi](double y) { return -phi(y); }, a, b, 1e-12 * b);
        return std::max(best_val, phi(ystar));
    };
    // Right branch: y > 0, bracket by doubling until phi decays well below
    // its running maximum.
    double yhi = mode_ + 1.0 / p_.psi;
    double run_max = log_sup(1e-12 * mode_, yhi);
    while (phi(yhi) > run_max - 40.0 && yhi < 1e14) {
        yhi *= 2.0;
        run_max = std::max(run_max, phi(yhi));
    }
    vplus_ = std::exp(log_sup(1e-12 * mode_, yhi));
    // Left branch: x = mode - z with z in (0, mode).
    auto phi_left = [&phi](double z) { return phi(-z); };
    const int n = 400;
    double best_val = -kInf;
    double best_z = mode_ * 0.5;
    for (int i = 1; i < n; ++i) {
        const double z = mode_ * i / static_cast<double>(n);
        const double v = phi_left(z);
        if (v > best_val) {
            best_val = v;
            best_z = z;
        }
    }
    const double zs = optim::golden_min(
        [&phi_left](double z) { return -phi_left(z); },
        std::max(mode_ * 1e-14, best_z - mode_ / n), best_z + mode_ / n,
        mode_ * 1e-12);
    vminus_ = -std::exp(std::max(best_val, phi_left(zs)));
}

double GigSampler::operator()(Rng& rng) const {
    switch (branch_) {
        case 1: return rng.gamma(p_.lambda, 0.5 * p_.psi);
        case 2: return 0.5 * p_.chi / rng.gamma(-p_.lambda, 1.0);
        case 3:
            return rng.inverse_gaussian(std::sqrt(p_.chi), std::sqrt(p_.psi));
        default: break;
    }
    for (int it = 0; it < 100000; ++it) {
        const double u = rng.uniform();
        const double v = vminus_ + (vplus_ - vminus_) * rng.uniform();
        const double x = mode_ + v / u;
        if (x <= 0.0) continue;
        if (2.0 * std::log(u) <= log_gig_kernel(x, p_) - logh_mode_) return x;
    }
    throw MathError("gig sampler: envelope rejection failed to accept");
}

double gig_sample(Rng& rng, const GigParams& p) {
    return GigSampler(p)(rng);
}

// --- parametrisation ----------------------------------------------------------

GigParams alphabar_to_chipsi(double lambda, double alpha_bar) {
    if (!(alpha_bar > 0.0))
        throw MathError("alphabar_to_chipsi: alpha_bar must be > 0 (boundary "
                        "subfamilies use their own normalisation)");
    const double psi = alpha_bar * bessel_k_scaled(lambda + 1.0, alpha_bar) /
                       bessel_k_scaled(lambda, alpha_bar);
    GigParams g{lambda, alpha_bar * alpha_bar / psi, psi};
    g.validate();
    return g;
}

GigParams mixing_gig(const GhParams& p, GhFamily family) {
    switch (family) {
        case GhFamily::Nig: return alphabar_to_chipsi(-0.5, p.alpha_bar);
        case GhFamily::Hyp: return alphabar_to_chipsi(1.0, p.alpha_bar);
        case GhFamily::Ghyp: return alphabar_to_chipsi(p.lambda, p.alpha_bar);
        case GhFamily::StudentT: {
            if (!(p.lambda < -1.0))
                throw ConfigError("student-t: requires lambda < -1");
            // chi = 2(-lambda-1) makes E[W] = 1.
            return GigParams{p.lambda, 2.0 * (-p.lambda - 1.0), 0.0};
        }
        case GhFamily::Vg: {
            if (!(p.lambda > 0.0)) throw ConfigError("vg: requires lambda > 0");
            // psi = 2 lambda makes E[W] = 1.
            return GigParams{p.lambda, 0.0, 2.0 * p.lambda};
        }
        case GhFamily::Gaussian:
            throw MathError("gaussian family has no mixing law");
    }
    throw ConfigError("mixing_gig: unknown family");
}

// --- GH ------------------------------------------------------------------------

namespace {

// x-independent parts of the GH log density, reused across data points.
struct GhDensityCache {
    GhParams p;
    GhFamily fam = GhFamily::Gaussian;
    GigParams mix;
    double log_pref = 0.0;  // includes -log(sqrt(2 pi) sigma)
    double B = 0.0;         // psi + (gamma/sigma)^2
    double nu = 0.0;        // lambda - 1/2

    GhDensityCache(const GhParams& params, GhFamily family)
        : p(params), fam(family) {
        if (!(p.sigma > 0.0)) throw ConfigError("gh params: sigma must be > 0");
        if (fam == GhFamily::Gaussian) return;
        mix = mixing_gig(p, fam);
        nu = mix.lambda - 0.5;
        B = mix.psi + (p.gamma / p.sigma) * (p.gamma / p.sigma);
        double log_c;
        if (mix.chi == 0.0) {  // VG
            log_c = mix.lambda * std::log(0.5 * mix.psi) -
                    lgamma_fn(mix.lambda);
        } else if (mix.psi == 0.0) {  // Student-t
            log_c = -mix.lambda * std::log(0.5 * mix.chi) -
                    lgamma_fn(-mix.lambda);
        } else {
            const double eta = std::sqrt(mix.chi * mix.psi);
            log_c = 0.5 * mix.lambda *
                        (std::log(mix.psi) - std::log(mix.chi)) -
                    std::log(2.0) - log_bessel_k(mix.lambda, eta);
        }
        log_pref = log_c - 0.5 * (kLog2Pi + 2.0 * std::log(p.sigma));
    }

    double eval_log(double x) const {
        const double z = (x - p.mu) / p.sigma;
        if (fam == GhFamily::Gaussian)
            return -0.5 * (kLog2Pi + 2.0 * std::log(p.sigma)) - 0.5 * z * z;
        const double A = mix.chi + z * z;
        if (B == 0.0) {
            // Symmetric Student-t: closed form of the w-integral.
            return log_pref + lgamma_fn(0.5 - mix.lambda) +
                   (mix.lambda - 0.5) * std::log(0.5 * A);
        }
        return log_pref + p.gamma * (x - p.mu) / (p.sigma * p.sigma) +
               log_bessel_term(nu, A, B);
    }
};

} // namespace

double log_gh_density(double x, const GhParams& p, GhFamily family) {
    return GhDensityCache(p, family).eval_log(x);
}

double gh_density(double x, const GhParams& p, GhFamily family) {
    return std::exp(log_gh_density(x, p, family));
}

double gh_mean(const GhParams& p, GhFamily family) {
    if (family == GhFamily::Gaussian) return p.mu;
    return p.mu + p.gamma;  // E[W] = 1 by normalisation
}

double gh_variance(const GhParams& p, GhFamily family) {
    if (family == GhFamily::Gaussian) return p.sigma * p.sigma;
    const GigParams mix = mixing_gig(p, family);
    double var_w;
    try {
        var_w = gig_moment(mix, 2) - 1.0;
    } catch (const MathError&) {
        return kInf;  // heavy-tailed Student-t
    }
    return p.sigma * p.sigma + p.gamma * p.gamma * var_w;
}

double gh_sample(Rng& rng, const GhParams& p, GhFamily family) {
    if (family == GhFamily::Gaussian) return rng.normal(p.mu, p.sigma);
    const double w = gig_sample(rng, mixing_gig(p, family));
    return p.mu + w * p.gamma + std::sqrt(w) * p.sigma * rng.normal();
}

// --- fitting ---------------------------------------------------------------------

namespace {

struct Moments {
    double mean = 0.0, var = 0.0, skew = 0.0, exkurt = 0.0;
};

Moments sample_moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    Moments m;
    for (double v : x) m.mean += v;
    m.mean /= n;
    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (double v : x) {
        const double d = v - m.mean;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    m.var = s2 / n;
    const double sd = std::sqrt(m.var);
    if (m.var > 0.0) {
        m.skew = (s3 / n) / (sd * sd * sd);
        m.exkurt = (s4 / n) / (m.var * m.var) - 3.0;
    }
    return m;
}

// Free-parameter encoding per family (unconstrained Nelder-Mead space):
//   shape block + [mu, log sigma] + optional gamma.
struct FamilyCodec {
    GhFamily fam;
    bool symmetric;

    int shape_dim() const {
        switch (fam) {
            case GhFamily::Ghyp: return 2;     // lambda, log alpha_bar
            case GhFamily::Nig:
            case GhFamily::Hyp:
            case GhFamily::StudentT:
            case GhFamily::Vg: return 1;
            case GhFamily::Gaussian: return 0;
        }
        return 0;
    }
    int dim() const { return shape_dim() + 2 + (symmetric ? 0 : 1); }

    GhParams decode(const std::vector<double>& t) const {
        GhParams p;
        size_t i = 0;
        switch (fam) {
            case GhFamily::Ghyp:
                p.lambda = t[i++];
                p.alpha_bar = std::exp(t[i++]);
                break;
            case GhFamily::Nig:
                p.lambda = -0.5;
                p.alpha_bar = std::exp(t[i++]);
                break;
            case GhFamily::Hyp:
                p.lambda = 1.0;
                p.alpha_bar = std::exp(t[i++]);
                break;
            case GhFamily::StudentT:
                p.lambda = -1.0 - std::exp(t[i++]);
                p.alpha_bar = 0.0;
                break;
            case GhFamily::Vg:
                // Shape kept above 1/2 so the likelihood stays bounded.
                p.lambda = 0.5 + std::exp(t[i++]);
                p.alpha_bar = 0.0;
                break;
            case GhFamily::Gaussian:
                break;
        }
        p.mu = t[i++];
        p.sigma = std::exp(t[i++]);
        p.gamma = symmetric ? 0.0 : t[i++];
        return p;
    }

    std::vector<double> encode_start(const Moments& m) const {
        std::vector<double> t;
        const double exk = std::max(m.exkurt, 0.3);
        switch (fam) {
            case GhFamily::Ghyp:
                t.push_back(-0.5);
                t.push_back(std::log(std::clamp(3.0 / exk, 0.05, 50.0)));
                break;
            case GhFamily::Nig:
            case GhFamily::Hyp:
                t.push_back(std::log(std::clamp(3.0 / exk, 0.05, 50.0)));
                break;
            case GhFamily::StudentT: {
                const double df = 4.0 + 6.0 / exk;  // exkurt = 6/(df-4)
                t.push_back(std::log(0.5 * df - 1.0));
                break;
            }
            case GhFamily::Vg:
                t.push_back(std::log(std::max(3.0 / exk, 0.2)));
                break;
            case GhFamily::Gaussian:
                break;
        }
        const double sd = std::sqrt(m.var);
        double gamma0 = 0.0;
        if (!symmetric) gamma0 = std::clamp(0.3 * m.skew * sd, -sd, sd);
        t.push_back(m.mean - gamma0);           // mu
        t.push_back(std::log(0.9 * sd));        // log sigma
        if (!symmetric) t.push_back(gamma0);
        return t;
    }
};

} // namespace

FittedModel fit_gh_family(const std::vector<double>& data, GhFamily family,
                          bool symmetric) {
    if (data.size() < 50)
        throw ConfigError("fit_gh_family: need at least 50 observations");
    const Moments m = sample_moments(data);
    if (!(m.var > 0.0))
        throw MathError("fit_gh_family: data has zero variance");

    FittedModel out;
    out.family = family;
    out.symmetric = family == GhFamily::Gaussian ? true : symmetric;

    if (family == GhFamily::Gaussian) {
        const double n = static_cast<double>(data.size());
        out.params.lambda = 0.0;
        out.params.alpha_bar = 0.0;
        out.params.mu = m.mean;
        out.params.sigma = std::sqrt(m.var);
        out.params.gamma = 0.0;
        out.log_likelihood =
            -0.5 * n * (kLog2Pi + std::log(m.var) + 1.0);
        out.n_params = 2;
        out.aic = 2.0 * out.n_params - 2.0 * out.log_likelihood;
        out.converged = true;
        return out;
    }

    const FamilyCodec codec{family, out.symmetric};
    auto neg_loglik = [&](const std::vector<double>& t) -> double {
        GhParams p;
        try {
            p = codec.decode(t);
            const GhDensityCache cache(p, family);
            double ll = 0.0;
            for (double x : data) {
                const double l = cache.eval_log(x);
                if (!std::isfinite(l)) return kInf;
                ll += l;
            }
            return -ll;
        } catch (const std::exception&) {
            return kInf;
        }
    };

    optim::NmOptions opt;
    opt.max_iter = 4000;
    opt.f_tol = 1e-10;
    opt.x_tol = 1e-8;
    auto res =
        optim::nelder_mead_restarted(neg_loglik, codec.encode_start(m), 3, opt);

    out.params = codec.decode(res.x);
    out.log_likelihood = -res.fval;
    out.n_params = codec.dim();
    out.aic = 2.0 * out.n_params - 2.0 * out.log_likelihood;
    out.converged = res.converged && std::isfinite(res.fval);
    return out;
}

std::vector<FittedModel> rank_by_aic(std::vector<FittedModel> models) {
    if (models.empty())
        throw ConfigError("rank_by_aic: empty model list");
    std::stable_sort(models.begin(), models.end(),
                     [](const FittedModel& a, const FittedModel& b) {
                         if (a.aic != b.aic) return a.aic < b.aic;
                         if (a.n_params != b.n_params)
                             return a.n_params < b.n_params;
                         return static_cast<int>(a.family) <
                                static_cast<int>(b.family);
                     });
    return models;
}

} // namespace lssm
