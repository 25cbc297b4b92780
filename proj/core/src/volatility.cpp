#include "lssm/volatility.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <sstream>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_gamma.h>

#include "lssm/errors.hpp"
#include "lssm/quadrature.hpp"
#include "lssm/specfun.hpp"

namespace lssm {

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kInf = std::numeric_limits<double>::infinity();

// GSL must report failures through return codes, not the aborting default
// handler; done once per process.
const bool kGslQuiet = [] {
    gsl_set_error_handler_off();
    return true;
}();

// theta(z) = [ (pi^2/2) z (J_nu^2 + Y_nu^2)(sqrt z) ]^{-1}: the weight of the
// Thorin integral representation of the GIG Levy density.  Smooth, positive,
// ~ z^{nu-1} at zero and ~ 1/(pi sqrt z) at infinity.
double thorin_theta(double nu, double z) {
    if (z <= 0.0) return 0.0;
    const double w = std::sqrt(z);
    double m2; // squared Bessel modulus J^2 + Y^2
    if (w > 50.0) {
        // large-argument expansion of the modulus, error O(w^{-6})
        const double mu = 4.0 * nu * nu;
        const double x2 = 4.0 * w * w;
        m2 = (2.0 / (kPi * w)) *
             (1.0 + (mu - 1.0) / (2.0 * x2) +
              3.0 * (mu - 1.0) * (mu - 9.0) / (8.0 * x2 * x2));
    } else {
        gsl_sf_result jr{}, yr{};
        const int sj = gsl_sf_bessel_Jnu_e(nu, w, &jr);
        const int sy = gsl_sf_bessel_Ynu_e(nu, w, &yr);
        if ((sj != 0 && !std::isfinite(jr.val)) ||
            (sy != 0 && !std::isfinite(yr.val)))
            return 0.0; // modulus overflow only happens in the z -> 0 limit
        m2 = jr.val * jr.val + yr.val * yr.val;
        if (!std::isfinite(m2) || m2 <= 0.0) return 0.0;
    }
    return 1.0 / (0.5 * kPi * kPi * z * m2);
}

// Helpers built on v(x) = x * u(x) = e^{-psi x/2} (I(x)/2 + max(lambda,0)),
// u the GIG Levy density and I(x) = int_0^inf theta(z) e^{-x z/(2 chi)} dz.
// Key identities (integration by parts, v -> 0 at both ends):
//   tail jump rate       int_x^inf w1 = v(x),
//   dropped jump mean    int_0^e y w1(y) dy = int_0^e v - e v(e),
//   dropped jump j^2     int_0^e y^2 w1(y) dy = 2 int_0^e y v(y) dy - e^2 v(e).
struct GigLevyRep {
    double chi = 0.0;
    double psi = 0.0;
    double anu = 0.0;   // |lambda|
    double lplus = 0.0; // max(lambda, 0)

    explicit GigLevyRep(const GigParams& p)
        : chi(p.chi), psi(p.psi), anu(std::abs(p.lambda)),
          lplus(std::max(p.lambda, 0.0)) {}

    // int_0^inf theta(z) z^k e^{-x z/(2 chi)} dz, k in {0, 1}
    double moment_integral(double x, int k) const {
        const double s = x / (2.0 * chi);
        auto f = [this, s, k](double z) {
            const double t = thorin_theta(anu, z);
            if (t == 0.0) return 0.0;
            return (k == 1 ? z * t : t) * std::exp(-s * z);
        };
        const auto r = quad::integrate_to_inf(f, 0.0, 1e-13, 1e-9, 20000);
        return r.value;
    }

    double v(double x) const {
        if (x <= 0.0) return kInf;
        const double damp = std::exp(-0.5 * psi * x);
        if (damp == 0.0) return 0.0;
        return damp * (0.5 * moment_integral(x, 0) + lplus);
    }

    double w1(double x) const {
        const double damp = std::exp(-0.5 * psi * x);
        if (damp == 0.0) return 0.0;
        return damp * (0.5 * psi * (0.5 * moment_integral(x, 0) + lplus) +
                       0.25 / chi * moment_integral(x, 1));
    }

    // int_0^e v(x) dx and int_0^e x v(x) dx by swapping the z-integral with
    // the (closed form) x-integral; c(z) = psi/2 + z/(2 chi).
    double int_v(double e) const {
        const double c0 = 0.5 * psi;
        double out = 0.0;
        if (lplus > 0.0)
            out += lplus * (c0 > 0.0 ? -std::expm1(-c0 * e) / c0 : e);
        auto f = [this, e](double z) {
            const double t = thorin_theta(anu, z);
            if (t == 0.0) return 0.0;
            const double c = 0.5 * psi + z / (2.0 * chi);
            return 0.5 * t * (-std::expm1(-c * e)) / c;
        };
        out += quad::integrate_to_inf(f, 0.0, 1e-13, 1e-9, 20000).value;
        return out;
    }

    double int_xv(double e) const {
        auto cell = [e](double c) {
            // int_0^e x exp(-c x) dx
            const double ce = c * e;
            if (ce < 1e-6) return 0.5 * e * e * (1.0 - 2.0 * ce / 3.0);
            return (1.0 - (1.0 + ce) * std::exp(-ce)) / (c * c);
        };
        double out = 0.0;
        if (lplus > 0.0) out += lplus * cell(0.5 * psi);
        auto f = [this, &cell](double z) {
            const double t = thorin_theta(anu, z);
            if (t == 0.0) return 0.0;
            return 0.5 * t * cell(0.5 * psi + z / (2.0 * chi));
        };
        out += quad::integrate_to_inf(f, 0.0, 1e-13, 1e-9, 20000).value;
        return out;
    }
};

double bisect_increasing(const std::function<double(double)>& f, double target,
                         double lo, double hi) {
    for (int i = 0; i < 200 && f(lo) > target; ++i) lo *= 0.25;
    for (int i = 0; i < 200 && f(hi) < target; ++i) hi *= 4.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = std::sqrt(lo * hi);
        (f(mid) < target ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

} // namespace

// --- gamma-density kernels ---------------------------------------------------

double GammaDensityKernel::operator()(double t) const {
    if (t <= 0.0) return 0.0;
    return scale * specfun::gamma_density(t, shape, rate);
}

double GammaDensityKernel::integral(double a, double b) const {
    if (shape <= 0.0 || rate <= 0.0)
        throw ConfigError("GammaDensityKernel requires shape > 0 and rate > 0");
    a = std::max(a, 0.0);
    const double pb =
        std::isinf(b) ? 1.0 : gsl_sf_gamma_inc_P(shape, rate * b);
    const double pa = a == 0.0 ? 0.0 : gsl_sf_gamma_inc_P(shape, rate * a);
    return scale * (pb - pa);
}

double GammaDensityKernel::truncation_horizon(double eps) const {
    if (!(eps > 0.0 && eps < 1.0))
        throw ConfigError("truncation_horizon requires eps in (0,1)");
    double hi = 1.0 / rate;
    while (gsl_sf_gamma_inc_Q(shape, rate * hi) > eps) hi *= 2.0;
    double lo = hi * 0.5;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gsl_sf_gamma_inc_Q(shape, rate * mid) > eps ? lo : hi) = mid;
    }
    return hi;
}

GigOuKernels gig_ou_kernels(double nu, double lambda) {
    if (!(nu > 0.5 && nu < 1.0))
        throw ConfigError("gig_ou_kernels requires nu in (1/2, 1)");
    if (!(lambda > 0.0)) throw ConfigError("gig_ou_kernels requires lambda > 0");
    GigOuKernels k;
    k.smoothing = GammaDensityKernel{2.0 - 2.0 * nu, lambda, 1.0 / lambda};
    k.drift = GammaDensityKernel{2.0 * nu - 1.0, lambda, 1.0};
    return k;
}

// --- background driving subordinator ----------------------------------------

double bdlp_levy_density(const GigParams& target, double y) {
    target.validate();
    if (y <= 0.0) return 0.0;
    if (target.chi == 0.0) // gamma marginal: finite activity, exponential jumps
        return target.lambda * 0.5 * target.psi * std::exp(-0.5 * target.psi * y);
    return GigLevyRep(target).w1(y);
}

BdlpSampler::BdlpSampler(const GigParams& target, bool force_numeric)
    : target_(target) {
    target_.validate();
    mean_rate_ = gig_moment(target_, 1); // throws when the mean is infinite
    if (!force_numeric && target_.chi == 0.0) {
        branch_ = Branch::GammaMarginal;
        return;
    }
    if (!force_numeric && target_.lambda == -0.5) {
        branch_ = Branch::IgMarginal;
        delta_ = std::sqrt(target_.chi);
        gam_ = std::sqrt(target_.psi);
        return;
    }
    if (target_.chi == 0.0)
        throw ConfigError("numeric BDLP inversion requires chi > 0");
    branch_ = Branch::Numeric;
    build_table();
}

void BdlpSampler::build_table() {
    const GigLevyRep rep(target_);
    const double m1 = mean_rate_;

    // Reference scale for the dropped small-jump variance: int y^2 w1 =
    // 2 Var(target) when finite, else the squared mean.
    double m2ref;
    try {
        const double var = gig_moment(target_, 2) - m1 * m1;
        m2ref = 2.0 * var;
    } catch (const MathError&) {
        m2ref = m1 * m1;
    }

    // Small-jump cutoff: dropped variance <= 1e-6 of the reference; the
    // dropped mean is restored exactly through the drift term.
    auto dropped_var = [&rep](double e) {
        return 2.0 * rep.int_xv(e) - e * e * rep.v(e);
    };
    const double eps =
        bisect_increasing(dropped_var, 1e-6 * m2ref, 1e-8 * m1, m1);
    drift_ = rep.int_v(eps) - eps * rep.v(eps);

    // Upper cutoff: relative tail jump mass below 1e-8.
    const double v_eps = rep.v(eps);
    double x_max = std::max(m1, 4.0 * eps);
    for (int i = 0; i < 300 && rep.v(x_max) > 1e-8 * v_eps; ++i) x_max *= 1.5;
    jump_rate_ = v_eps - rep.v(x_max);

    // Jump sizes are drawn by inverting the tail-rate function v on a fine
    // log grid: the log spacing keeps the relative size resolution uniform
    // all the way into the far tail (an equiprobable quantile table would
    // smear the topmost probability cell across the whole tail).
    const int n_grid = 2000;
    jump_x_.resize(n_grid + 1);
    jump_tail_.resize(n_grid + 1);
    const double lr = std::log(x_max / eps) / n_grid;
    for (int i = 0; i <= n_grid; ++i) {
        jump_x_[static_cast<std::size_t>(i)] = eps * std::exp(lr * i);
        jump_tail_[static_cast<std::size_t>(i)] =
            rep.v(jump_x_[static_cast<std::size_t>(i)]);
    }
    for (int i = 1; i <= n_grid; ++i)
        jump_tail_[static_cast<std::size_t>(i)] =
            std::min(jump_tail_[static_cast<std::size_t>(i)],
                     jump_tail_[static_cast<std::size_t>(i - 1)]);
}

double BdlpSampler::sample(double h, Rng& rng) const {
    if (h < 0.0) throw ConfigError("BdlpSampler::sample requires h >= 0");
    if (h == 0.0) return 0.0;
    switch (branch_) {
        case Branch::GammaMarginal: {
            const auto n = rng.poisson(target_.lambda * h);
            return n == 0 ? 0.0
                          : rng.gamma(static_cast<double>(n), 0.5 * target_.psi);
        }
        case Branch::IgMarginal: {
            double out = rng.inverse_gaussian(0.5 * delta_ * h, gam_);
            const auto n = rng.poisson(0.5 * delta_ * gam_ * h);
            for (std::uint64_t i = 0; i < n; ++i) {
                const double z = rng.normal();
                out += z * z / (gam_ * gam_);
            }
            return out;
        }
        case Branch::Numeric: {
            double out = drift_ * h;
            const auto n = rng.poisson(jump_rate_ * h);
            for (std::uint64_t i = 0; i < n; ++i) {
                const double level =
                    jump_tail_.front() - rng.uniform() * jump_rate_;
                auto it = std::lower_bound(jump_tail_.begin(), jump_tail_.end(),
                                           level, std::greater<double>());
                const auto pos = std::clamp<std::size_t>(
                    static_cast<std::size_t>(it - jump_tail_.begin()), 1,
                    jump_tail_.size() - 1);
                const double t0 = jump_tail_[pos - 1], t1 = jump_tail_[pos];
                const double f =
                    t0 > t1 ? std::clamp((t0 - level) / (t0 - t1), 0.0, 1.0)
                            : 0.0;
                out += jump_x_[pos - 1] + f * (jump_x_[pos] - jump_x_[pos - 1]);
            }
            return out;
        }
    }
    return 0.0;
}

double BdlpSampler::mean_rate() const { return mean_rate_; }

bool BdlpSampler::uses_table() const { return branch_ == Branch::Numeric; }

std::vector<double> sample_bdlp_increments(const GigParams& target, std::size_t n,
                                           double h, std::uint64_t seed) {
    const BdlpSampler sampler(target);
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = sampler.sample(h, rng);
    return out;
}

// --- volatility models -------------------------------------------------------

VolatilityModel VolatilityModel::constant(double c) {
    VolatilityModel v;
    v.family = VolFamily::Constant;
    v.c = c;
    v.validate();
    return v;
}

VolatilityModel VolatilityModel::bns_ou(double lambda, const LevyModel& sub) {
    VolatilityModel v;
    v.family = VolFamily::BnsOu;
    v.lambda = lambda;
    v.subordinator = sub;
    v.validate();
    return v;
}

VolatilityModel VolatilityModel::gig_ou(double nu, double lambda,
                                        const GigParams& target) {
    VolatilityModel v;
    v.family = VolFamily::GigOu;
    v.nu = nu;
    v.lambda = lambda;
    v.target = target;
    v.validate();
    return v;
}

void VolatilityModel::validate() const {
    switch (family) {
        case VolFamily::Constant:
            if (!(c >= 0.0))
                throw ConfigError("constant volatility requires c >= 0");
            return;
        case VolFamily::BnsOu:
            if (!(lambda > 0.0))
                throw ConfigError("BnsOu volatility requires lambda > 0");
            if (!subordinator.is_subordinator())
                throw ConfigError(
                    "BnsOu volatility requires a subordinator driver (gamma or "
                    "inverse-Gaussian family), got " + subordinator.family_name());
            return;
        case VolFamily::GigOu:
            if (!(nu > 0.5 && nu < 1.0))
                throw ConfigError("GigOu volatility requires nu in (1/2, 1)");
            if (!(lambda > 0.0))
                throw ConfigError("GigOu volatility requires lambda > 0");
            target.validate();
            return;
    }
    throw ConfigError("unknown volatility family");
}

double VolatilityModel::stationary_mean() const {
    switch (family) {
        case VolFamily::Constant: return c;
        case VolFamily::BnsOu: return subordinator.kappa1();
        case VolFamily::GigOu: return gig_moment(target, 1);
    }
    return 0.0;
}

double VolatilityModel::stationary_var() const {
    switch (family) {
        case VolFamily::Constant: return 0.0;
        case VolFamily::BnsOu: return 0.5 * subordinator.kappa2();
        case VolFamily::GigOu: {
            const double m1 = gig_moment(target, 1);
            return gig_moment(target, 2) - m1 * m1;
        }
    }
    return 0.0;
}

std::string VolatilityModel::family_name() const {
    switch (family) {
        case VolFamily::Constant: return "constant";
        case VolFamily::BnsOu: return "bns_ou";
        case VolFamily::GigOu: return "gig_ou";
    }
    return "unknown";
}

nlohmann::json VolatilityModel::to_json() const {
    switch (family) {
        case VolFamily::Constant:
            return {{"family", "constant"}, {"c", c}};
        case VolFamily::BnsOu:
            return {{"family", "bns_ou"},
                    {"lambda", lambda},
                    {"subordinator", subordinator.to_json()}};
        case VolFamily::GigOu:
            return {{"family", "gig_ou"},
                    {"nu", nu},
                    {"lambda", lambda},
                    {"target",
                     {{"lambda", target.lambda},
                      {"chi", target.chi},
                      {"psi", target.psi}}}};
    }
    throw ConfigError("unknown volatility family");
}

VolatilityModel VolatilityModel::from_json(const nlohmann::json& j) {
    try {
        const std::string fam = j.at("family").get<std::string>();
        if (fam == "constant")
            return constant(j.at("c").get<double>());
        if (fam == "bns_ou")
            return bns_ou(j.at("lambda").get<double>(),
                          LevyModel::from_json(j.at("subordinator")));
        if (fam == "gig_ou") {
            const auto& t = j.at("target");
            GigParams p{t.at("lambda").get<double>(), t.at("chi").get<double>(),
                        t.at("psi").get<double>()};
            return gig_ou(j.at("nu").get<double>(), j.at("lambda").get<double>(),
                          p);
        }
        throw ConfigError("unknown volatility family '" + fam + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid volatility JSON: ") + e.what());
    }
}

double vol_mean(const VolatilityModel& v) { return v.stationary_mean(); }

VolAcvf vol_acvf(const VolatilityModel& v, double h) {
    if (h < 0.0) throw ConfigError("vol_acvf requires h >= 0");
    switch (v.family) {
        case VolFamily::Constant: return {0.0, false};
        case VolFamily::BnsOu:
        case VolFamily::GigOu:
            return {v.stationary_var() * std::exp(-v.lambda * h), true};
    }
    return {0.0, false};
}

LevyModel effective_subordinator(const VolatilityModel& v) {
    if (v.family != VolFamily::BnsOu)
        throw ConfigError(
            "effective_subordinator is defined for BnsOu volatility only");
    const LevyModel& u = v.subordinator;
    switch (u.family) {
        case LevyFamily::GammaSubordinator:
            return LevyModel::gamma_subordinator(v.lambda * u.p1, u.p2);
        case LevyFamily::IgSubordinator:
            return LevyModel::ig_subordinator(v.lambda * u.p1, u.p2);
        default:
            throw ConfigError("BnsOu subordinator family not time-scalable: " +
                              u.family_name());
    }
}

// --- path sampling -----------------------------------------------------------

VolPathSampler::VolPathSampler(const VolatilityModel& v, double dt)
    : v_(v), dt_(dt) {
    v_.validate();
    if (!(dt > 0.0)) throw ConfigError("VolPathSampler requires dt > 0");
    if (v_.family == VolFamily::Constant) return;

    decay_ = std::exp(-v_.lambda * dt);
    if (v_.family == VolFamily::BnsOu) {
        burn_steps_ = static_cast<std::size_t>(
            std::ceil(20.0 / (v_.lambda * dt)));
        return;
    }
    bdlp_ = std::make_shared<const BdlpSampler>(v_.target);
    // Exact per-cell masses of the smoothing kernel, truncated where the
    // remaining tail mass falls below 1e-6 of the total.
    const auto kernels = gig_ou_kernels(v_.nu, v_.lambda);
    const double horizon = kernels.smoothing.truncation_horizon(1e-6);
    const std::size_t m = static_cast<std::size_t>(std::ceil(horizon / dt));
    smooth_w_.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        smooth_w_[i] = kernels.smoothing.integral(dt * static_cast<double>(i),
                                                  dt * static_cast<double>(i + 1)) /
                       dt;
}

VolPathDetail VolPathSampler::sample_detail(std::size_t n, Rng& rng) const {
    if (n == 0) throw ConfigError("sample_detail requires n >= 1");
    VolPathDetail out;
    switch (v_.family) {
        case VolFamily::Constant: {
            out.omega_sq.assign(n, v_.c);
            out.mixing = out.omega_sq;
            return out;
        }
        case VolFamily::BnsOu: {
            const double eff = v_.lambda * dt_;
            double z = v_.subordinator.kappa1();
            for (std::size_t k = 0; k < burn_steps_; ++k)
                z = decay_ * (z + sample_increment(v_.subordinator, eff, rng));
            out.mixing.resize(n);
            out.du.resize(n > 1 ? n - 1 : 0);
            out.mixing[0] = z;
            for (std::size_t k = 1; k < n; ++k) {
                const double du = sample_increment(v_.subordinator, eff, rng);
                z = decay_ * (z + du);
                out.mixing[k] = z;
                out.du[k - 1] = du;
            }
            out.omega_sq = out.mixing;
            return out;
        }
        case VolFamily::GigOu: {
            const double eff = v_.lambda * dt_;
            const std::size_t m = smooth_w_.size();
            // Increments over [t_j, t_{j+1}) for j = -m, ..., n-2.
            std::vector<double> du(m + n - 1);
            for (auto& x : du) x = bdlp_->sample(eff, rng);
            // Exact stationary start ahead of the smoothing window.
            double z = gig_sample(rng, v_.target);
            for (std::size_t j = 0; j < m; ++j) z = decay_ * (z + du[j]);
            out.mixing.resize(n);
            out.omega_sq.resize(n);
            out.mixing[0] = z;
            for (std::size_t k = 1; k < n; ++k) {
                z = decay_ * (z + du[m + k - 1]);
                out.mixing[k] = z;
            }
            for (std::size_t k = 0; k < n; ++k) {
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    acc += smooth_w_[i] * du[m + k - 1 - i];
                out.omega_sq[k] = acc;
            }
            out.du.assign(du.begin() + static_cast<std::ptrdiff_t>(m), du.end());
            return out;
        }
    }
    throw ConfigError("unknown volatility family");
}

std::vector<double> VolPathSampler::sample(std::size_t n, Rng& rng) const {
    if (v_.family != VolFamily::GigOu) return sample_detail(n, rng).mixing;
    // Mixing state only: the exact stationary draw seeds the grid start
    // directly, so no smoothing window is needed.
    if (n == 0) throw ConfigError("sample requires n >= 1");
    const double eff = v_.lambda * dt_;
    std::vector<double> out(n);
    double z = gig_sample(rng, v_.target);
    out[0] = z;
    for (std::size_t k = 1; k < n; ++k) {
        z = decay_ * (z + bdlp_->sample(eff, rng));
        out[k] = z;
    }
    return out;
}

std::vector<double> sample_vol_path(const VolatilityModel& v, std::size_t n,
                                    double dt, std::uint64_t seed) {
    const VolPathSampler sampler(v, dt);
    Rng rng(seed);
    return sampler.sample(n, rng);
}

VolPathDetail sample_vol_detail(const VolatilityModel& v, std::size_t n,
                                double dt, std::uint64_t seed) {
    const VolPathSampler sampler(v, dt);
    Rng rng(seed);
    return sampler.sample_detail(n, rng);
}

std::vector<double> vol_acvf_omega_mc(const VolatilityModel& v, int n_lags,
                                      double dt, std::size_t n_steps,
                                      std::uint64_t seed) {
    if (n_lags < 0) throw ConfigError("vol_acvf_omega_mc requires n_lags >= 0");
    if (n_steps < static_cast<std::size_t>(n_lags) + 2)
        throw ConfigError("vol_acvf_omega_mc requires n_steps > n_lags + 1");
    const VolPathSampler sampler(v, dt);
    Rng rng(seed);
    std::vector<double> omega = sampler.sample_detail(n_steps, rng).omega_sq;
    for (auto& x : omega) x = std::sqrt(std::max(x, 0.0));
    double mean = 0.0;
    for (double x : omega) mean += x;
    mean /= static_cast<double>(omega.size());
    std::vector<double> acvf(static_cast<std::size_t>(n_lags) + 1, 0.0);
    for (std::size_t l = 0; l < acvf.size(); ++l) {
        double s = 0.0;
        for (std::size_t i = 0; i + l < omega.size(); ++i)
            s += (omega[i] - mean) * (omega[i + l] - mean);
        acvf[l] = s / static_cast<double>(omega.size());
    }
    return acvf;
}

} // namespace lssm
