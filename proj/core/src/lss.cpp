#include "lssm/lss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <gsl/gsl_sf_gamma.h>

#include "lssm/errors.hpp"
#include "lssm/parallel.hpp"
#include "lssm/quadrature.hpp"
#include "lssm/rng.hpp"

namespace lssm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-path stream layout: (path, factor) pairs get disjoint stream indices,
// with three channels each (volatility, post-zero driver, pre-zero driver).
// factor_count = 1 for plain processes, so superposition with one factor is
// draw-for-draw identical to the plain simulation.
Rng channel_rng(std::uint64_t seed, std::size_t path, std::size_t factor,
                std::size_t factor_count, std::size_t channel) {
    const std::uint64_t stream =
        3 * (static_cast<std::uint64_t>(path) * factor_count + factor) + channel;
    return Rng::substream(seed, stream);
}

double kernel_truncation(const Kernel& k, double eps) {
    return k.truncation_horizon(eps);
}

// ---------------------------------------------------------------------------
// Gamma probability-density kernel (drift channel)
// ---------------------------------------------------------------------------

class GammaDensityKernelAdapter final : public Kernel {
  public:
    GammaDensityKernelAdapter(double shape, double rate)
        : shape_(shape), rate_(rate) {
        if (!(shape > 0.0) || !(rate > 0.0))
            throw ConfigError("gamma density kernel needs shape > 0, rate > 0");
        log_norm_ = shape_ * std::log(rate_) - gsl_sf_lngamma(shape_);
    }

    std::string family() const override { return "gamma_density"; }

    double eval(double x) const override {
        if (x < 0.0) throw MathError("kernel argument must be >= 0");
        if (x == 0.0) {
            if (shape_ < 1.0) return kInf;
            if (shape_ == 1.0) return rate_;
            return 0.0;
        }
        return std::exp(log_norm_ + (shape_ - 1.0) * std::log(x) - rate_ * x);
    }

    double deriv(double x) const override {
        if (!(x > 0.0)) throw MathError("kernel derivative needs x > 0");
        return eval(x) * ((shape_ - 1.0) / x - rate_);
    }

    double l2_norm_sq() const override {
        if (shape_ <= 0.5) return kInf;
        // int q^2 = rate^{2s} Gamma(2s-1) / (Gamma(s)^2 (2 rate)^{2s-1})
        const double s = shape_;
        const double logc = 2.0 * s * std::log(rate_) + gsl_sf_lngamma(2.0 * s - 1.0) -
                            2.0 * gsl_sf_lngamma(s) -
                            (2.0 * s - 1.0) * std::log(2.0 * rate_);
        return std::exp(logc);
    }

    double l2_tail_sq(double h) const override {
        if (h < 0.0) throw MathError("tail offset must be >= 0");
        const double full = l2_norm_sq();
        if (!std::isfinite(full)) return kInf;
        return full * gsl_sf_gamma_inc_Q(2.0 * shape_ - 1.0, 2.0 * rate_ * h);
    }

    double int_g(double a, double b) const override {
        if (a < 0.0 || b < a) throw MathError("invalid integration range");
        const double pa = gsl_sf_gamma_inc_P(shape_, rate_ * a);
        const double pb =
            std::isinf(b) ? 1.0 : gsl_sf_gamma_inc_P(shape_, rate_ * b);
        return pb - pa;
    }

    KernelRegularity regularity() const override {
        KernelRegularity r;
        r.g0_finite = shape_ >= 1.0;
        r.g0 = r.g0_finite ? eval(0.0) : kInf;
        r.derivative_sq_integrable = shape_ > 1.5;
        r.l2_integrable = shape_ > 0.5;
        return r;
    }

    // L1 tail mass (drift kernels act through int q * a, not int q^2).
    double truncation_horizon(double eps) const override {
        if (!(eps > 0.0) || !(eps < 1.0))
            throw ConfigError("truncation eps must lie in (0,1)");
        double lo = 0.0, hi = (shape_ + 10.0) / rate_;
        while (gsl_sf_gamma_inc_Q(shape_, rate_ * hi) > eps) hi *= 2.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (gsl_sf_gamma_inc_Q(shape_, rate_ * mid) > eps)
                lo = mid;
            else
                hi = mid;
        }
        return hi;
    }

    nlohmann::json to_json() const override {
        return {{"family", "gamma_density"}, {"shape", shape_}, {"rate", rate_}};
    }

    std::unique_ptr<Kernel> clone() const override {
        return std::make_unique<GammaDensityKernelAdapter>(shape_, rate_);
    }

  private:
    double shape_, rate_, log_norm_;
};

std::shared_ptr<const Kernel> kernel_from_json_any(const nlohmann::json& j) {
    try {
        if (j.is_object() && j.value("family", "") == "gamma_density")
            return std::make_shared<GammaDensityKernelAdapter>(
                j.at("shape").get<double>(), j.at("rate").get<double>());
        return std::shared_ptr<const Kernel>(make_kernel(j));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad kernel spec: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// discretization weights
// ---------------------------------------------------------------------------

// Left-point weights with a first-cell average to tame integrable
// singularities: w[1] = (1/dt) int_0^dt g, w[m] = g(m dt) for m >= 2.
// Stored at index m-1.
std::vector<double> cell_weights(const Kernel& k, double dt, std::size_t m_w) {
    std::vector<double> w(m_w);
    w[0] = k.int_g(0.0, dt) / dt;
    for (std::size_t m = 2; m <= m_w; ++m)
        w[m - 1] = k.eval(static_cast<double>(m) * dt);
    return w;
}

struct Discretization {
    std::size_t n_steps = 0;
    std::size_t m_w = 0;
    double t_tr = 0.0;
    std::vector<double> w_g;
    std::vector<double> w_q;  // empty without drift kernel
};

Discretization discretize(const LssProcess& p, const SimConfig& c) {
    p.validate();
    c.validate();
    Discretization d;
    const double steps = c.horizon / c.dt;
    d.n_steps = static_cast<std::size_t>(std::ceil(steps * (1.0 - 1e-12)));
    d.t_tr = kernel_truncation(*p.g, c.truncation_eps);
    if (p.q) d.t_tr = std::max(d.t_tr, p.q->truncation_horizon(c.truncation_eps));
    d.m_w = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(d.t_tr / c.dt * (1.0 - 1e-12))));
    d.w_g = cell_weights(*p.g, c.dt, d.m_w);
    if (p.q) d.w_q = cell_weights(*p.q, c.dt, d.m_w);
    return d;
}

// One path of the discretized integral.  omega_sq/dl/d_qv must have
// m_w + n_steps entries (d_qv may be empty); a may be empty (no drift).
std::vector<double> accumulate_path(const LssProcess& p,
                                    const Discretization& d, double dt,
                                    const std::vector<double>& omega_sq,
                                    const std::vector<double>& dl,
                                    const std::vector<double>& a) {
    const std::size_t n_inc = d.m_w + d.n_steps;
    std::vector<double> wl(n_inc);
    for (std::size_t i = 0; i < n_inc; ++i)
        wl[i] = std::sqrt(omega_sq[i]) * dl[i];

    std::vector<double> y(d.n_steps + 1, p.mu);
    for (std::size_t k = 0; k <= d.n_steps; ++k) {
        double acc = 0.0;
        // cell m covers increment index k - m + m_w
        const std::size_t base = k + d.m_w;
        for (std::size_t m = 1; m <= d.m_w; ++m) acc += d.w_g[m - 1] * wl[base - m];
        if (!a.empty()) {
            double drift = 0.0;
            for (std::size_t m = 1; m <= d.m_w; ++m)
                drift += d.w_q[m - 1] * a[base - m];
            acc += drift * dt;
        }
        y[k] += acc;
    }
    return y;
}

struct PathDraws {
    std::vector<double> omega_sq;
    std::vector<double> dl;
    std::vector<double> d_qv;  // empty when not requested/supported
};

PathDraws draw_path_inputs(const LssProcess& p, const Discretization& d,
                           double dt, std::uint64_t seed, std::size_t path,
                           std::size_t factor, std::size_t factor_count,
                           const VolPathSampler& vs, bool want_qv) {
    const std::size_t n_inc = d.m_w + d.n_steps;
    PathDraws out;

    // sample_detail yields the instantaneous volatility path for every
    // family (for smoothed families plain sample() returns the mixing state,
    // which has the right marginal but is not the pointwise omega^2).
    Rng vol_rng = channel_rng(seed, path, factor, factor_count, 0);
    out.omega_sq = vs.sample_detail(n_inc, vol_rng).omega_sq;

    Rng post = channel_rng(seed, path, factor, factor_count, 1);
    Rng pre = channel_rng(seed, path, factor, factor_count, 2);
    out.dl.resize(n_inc);
    const bool qv_capable = p.driver.family == LevyFamily::Brownian ||
                            p.driver.family == LevyFamily::CompoundPoissonNormal;
    if (want_qv && qv_capable) {
        out.d_qv.resize(n_inc);
        for (std::size_t i = 0; i < d.m_w; ++i) {
            const IncrementQv iq = sample_increment_qv(p.driver, dt, pre);
            out.dl[i] = iq.dl;
            out.d_qv[i] = iq.d_qv;
        }
        for (std::size_t i = d.m_w; i < n_inc; ++i) {
            const IncrementQv iq = sample_increment_qv(p.driver, dt, post);
            out.dl[i] = iq.dl;
            out.d_qv[i] = iq.d_qv;
        }
    } else {
        for (std::size_t i = 0; i < d.m_w; ++i)
            out.dl[i] = sample_increment(p.driver, dt, pre);
        for (std::size_t i = d.m_w; i < n_inc; ++i)
            out.dl[i] = sample_increment(p.driver, dt, post);
    }
    return out;
}

std::vector<double> drift_values(const LssProcess& p,
                                 const std::vector<double>& omega_sq,
                                 const std::vector<double>* a_path,
                                 std::size_t n_inc) {
    if (!p.has_drift()) {
        if (a_path)
            throw ConfigError("drift path supplied but the process has no drift kernel");
        return {};
    }
    if (p.drift_from_vol) {
        if (a_path)
            throw ConfigError(
                "drift path conflicts with the volatility-squared drift wiring");
        std::vector<double> a(n_inc);
        for (std::size_t i = 0; i < n_inc; ++i) a[i] = p.gamma_skew * omega_sq[i];
        return a;
    }
    if (!a_path)
        throw ConfigError(
            "a drift kernel without drift_from_vol needs a user drift path");
    if (a_path->size() != n_inc)
        throw ConfigError("drift path must supply window_cells + n_steps values");
    return *a_path;
}

std::vector<double> grid_times(std::size_t n_steps, double dt) {
    std::vector<double> t(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) t[k] = static_cast<double>(k) * dt;
    return t;
}

// exact mass of g over cell m: int_{(m-1)dt}^{m dt} g
double cell_mass(const Kernel& k, double dt, std::size_t m) {
    return k.int_g((static_cast<double>(m) - 1.0) * dt,
                   static_cast<double>(m) * dt);
}

// exact mass of g^2 over cell m via the L2 tails
double cell_mass_sq(const Kernel& k, double dt, std::size_t m) {
    return k.l2_tail_sq((static_cast<double>(m) - 1.0) * dt) -
           k.l2_tail_sq(static_cast<double>(m) * dt);
}

// int_{(m-1)dt}^{m dt} g(x+h) g(x) dx: adaptive on the (possibly singular)
// first cell, 6-point Gauss-Legendre elsewhere.
double cell_mass_overlap(const Kernel& k, double dt, std::size_t m, double h) {
    const double a = (static_cast<double>(m) - 1.0) * dt;
    const double b = static_cast<double>(m) * dt;
    const auto f = [&](double x) { return k.eval(x + h) * k.eval(x); };
    if (m == 1) {
        const auto r = quad::integrate(f, a, b, 1e-14, 1e-10, 2000);
        return r.value;
    }
    return quad::gauss_legendre(f, a, b, 6);
}

double driver_gaussian_variance(const LevyModel& m) {
    return m.family == LevyFamily::Brownian ? m.p2 : 0.0;
}

bool finite_integral(const std::function<double(double)>& f) {
    // Integrability probe for int f over (0, inf) by Cauchy condensation on
    // dyadic cells: cell mass ~ x f(x) at x = 2^k.  Adaptive quadrature is
    // not used here because its per-panel error estimates shrink on slowly
    // divergent (e.g. logarithmic) integrals even while the value grows.
    // f must be monotone-ish on each side away from an interior bulk, which
    // holds for the kernel powers this probe is applied to.
    const auto decays = [&](bool toward_zero) {
        double sum = 0.0, last = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double x = toward_zero ? std::ldexp(1.0, -k)
                                         : std::ldexp(1.0, k);
            const double t = x * f(x);
            if (!std::isfinite(t)) return false;
            sum += t;
            last = t;
        }
        return last <= 1e-10 * (sum + 1e-300);
    };
    return decays(true) && decays(false) && std::isfinite(f(1.0));
}

} // namespace

// ---------------------------------------------------------------------------
// types
// ---------------------------------------------------------------------------

std::shared_ptr<const Kernel> make_gamma_density_kernel(double shape,
                                                        double rate) {
    return std::make_shared<GammaDensityKernelAdapter>(shape, rate);
}

void LssProcess::validate() const {
    if (!g) throw ConfigError("LssProcess needs a memory kernel g");
    vol.validate();
    if (drift_from_vol && !q)
        throw ConfigError("drift_from_vol requires a drift kernel q");
    if (!std::isfinite(mu) || !std::isfinite(gamma_skew))
        throw ConfigError("mu and gamma_skew must be finite");
}

nlohmann::json LssProcess::to_json() const {
    if (!g) throw ConfigError("LssProcess needs a memory kernel g");
    nlohmann::json j{{"mu", mu},
                     {"kernel", g->to_json()},
                     {"driver", driver.to_json()},
                     {"vol", vol.to_json()}};
    if (q) {
        j["drift_kernel"] = q->to_json();
        j["drift_from_vol"] = drift_from_vol;
        j["gamma_skew"] = gamma_skew;
    }
    return j;
}

LssProcess LssProcess::from_json(const nlohmann::json& j) {
    try {
        LssProcess p;
        p.mu = j.value("mu", 0.0);
        p.g = kernel_from_json_any(j.at("kernel"));
        p.driver = LevyModel::from_json(j.at("driver"));
        p.vol = VolatilityModel::from_json(j.at("vol"));
        if (j.contains("drift_kernel")) {
            p.q = kernel_from_json_any(j.at("drift_kernel"));
            p.drift_from_vol = j.value("drift_from_vol", false);
            p.gamma_skew = j.value("gamma_skew", 0.0);
        }
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad LSS process spec: ") + e.what());
    }
}

void SimConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
    if (!(horizon > dt))
        throw ConfigError("horizon must exceed dt");
    if (!(truncation_eps > 0.0) || !(truncation_eps < 1.0))
        throw ConfigError("truncation_eps must lie in (0,1)");
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
}

GridInfo sim_grid(const LssProcess& p, const SimConfig& c) {
    const Discretization d = discretize(p, c);
    return GridInfo{d.n_steps, d.m_w, d.t_tr};
}

// ---------------------------------------------------------------------------
// integrability
// ---------------------------------------------------------------------------

IntegrabilityReport check_integrability(const LssProcess& p) {
    p.validate();
    IntegrabilityReport r;
    const double ew2 = vol_mean(p.vol);
    const double l2 = p.g->l2_norm_sq();

    r.gaussian_part.applies = true;
    r.gaussian_part.value = driver_gaussian_variance(p.driver) * l2 * ew2;
    r.gaussian_part.pass = std::isfinite(r.gaussian_part.value);
    r.gaussian_part.label = "b * int g^2 * E[omega^2]";

    r.square_integrability.applies = true;
    r.square_integrability.value = l2 * ew2;
    r.square_integrability.pass = std::isfinite(r.square_integrability.value);
    r.square_integrability.label = "int g^2 * E[omega^2]";

    r.drift_split.applies = p.has_drift();
    r.drift_split.label = "int q^{2a} and int q^{2(1-a)} finite, some a in (0,1)";
    if (r.drift_split.applies) {
        const Kernel& q = *p.q;
        for (const double a : {0.5, 0.25, 0.75, 0.1, 0.9}) {
            const auto pow1 = [&](double x) {
                return std::pow(q.eval(x), 2.0 * a);
            };
            const auto pow2 = [&](double x) {
                return std::pow(q.eval(x), 2.0 * (1.0 - a));
            };
            if (finite_integral(pow1) && finite_integral(pow2)) {
                r.drift_split.pass = true;
                r.drift_split.value = a;
                break;
            }
        }
    } else {
        r.drift_split.pass = true;
    }
    return r;
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

SimResult simulate(const LssProcess& p, const SimConfig& c) {
    const Discretization d = discretize(p, c);
    if (p.has_drift() && !p.drift_from_vol)
        throw ConfigError(
            "matrix simulation supports the volatility-squared drift wiring "
            "only; supply user drift paths via simulate_detail");
    const auto rep = check_integrability(p);
    if (!rep.pass()) throw MathError("process fails the integrability conditions");

    const VolPathSampler vs(p.vol, c.dt);
    const std::size_t n_inc = d.m_w + d.n_steps;

    SimResult out;
    out.dt = c.dt;
    out.times = grid_times(d.n_steps, c.dt);
    out.paths.assign(static_cast<std::size_t>(c.n_paths), {});

    parallel_for(static_cast<std::size_t>(c.n_paths), [&](std::size_t i) {
        const PathDraws draws =
            draw_path_inputs(p, d, c.dt, c.seed, i, 0, 1, vs, false);
        const std::vector<double> a =
            drift_values(p, draws.omega_sq, nullptr, n_inc);
        out.paths[i] = accumulate_path(p, d, c.dt, draws.omega_sq, draws.dl, a);
    });
    return out;
}

PathDetail simulate_detail(const LssProcess& p, const SimConfig& c,
                           const std::vector<double>* a_path) {
    const Discretization d = discretize(p, c);
    const auto rep = check_integrability(p);
    if (!rep.pass()) throw MathError("process fails the integrability conditions");

    const VolPathSampler vs(p.vol, c.dt);
    const std::size_t n_inc = d.m_w + d.n_steps;

    PathDetail out;
    out.dt = c.dt;
    out.pre_steps = d.m_w;
    out.times = grid_times(d.n_steps, c.dt);

    PathDraws draws = draw_path_inputs(p, d, c.dt, c.seed, 0, 0, 1, vs, true);
    const std::vector<double> a = drift_values(p, draws.omega_sq, a_path, n_inc);
    out.y = accumulate_path(p, d, c.dt, draws.omega_sq, draws.dl, a);
    out.omega_sq = std::move(draws.omega_sq);
    out.dl = std::move(draws.dl);
    out.d_qv = std::move(draws.d_qv);
    return out;
}

// ---------------------------------------------------------------------------
// conditional moments
// ---------------------------------------------------------------------------

ConditionalMoments moments_conditional(const LssProcess& p,
                                       const std::vector<double>& omega_sq_path,
                                       double dt, double truncation_eps) {
    p.validate();
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (!(truncation_eps > 0.0) || !(truncation_eps < 1.0))
        throw ConfigError("truncation_eps must lie in (0,1)");
    if (p.has_drift() && !p.drift_from_vol)
        throw ConfigError(
            "conditional moments support the volatility-squared drift wiring only");

    double t_tr = kernel_truncation(*p.g, truncation_eps);
    if (p.q) t_tr = std::max(t_tr, p.q->truncation_horizon(truncation_eps));
    const std::size_t m_w = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(t_tr / dt * (1.0 - 1e-12))));
    if (omega_sq_path.size() < m_w + 1)
        throw ConfigError("volatility window too short for the truncation horizon");

    const std::size_t last = omega_sq_path.size() - 1;  // index of time t
    const double k1 = p.driver.kappa1();
    const double k2 = p.driver.kappa2();
    const std::shared_ptr<const Kernel> g = p.g;
    const std::shared_ptr<const Kernel> q = p.q;

    ConditionalMoments cm;
    for (std::size_t m = 1; m <= m_w; ++m) {
        const double w2 = omega_sq_path[last - m];
        cm.mean += k1 * cell_mass(*g, dt, m) * std::sqrt(w2);
        cm.var += k2 * cell_mass_sq(*g, dt, m) * w2;
        if (q && p.drift_from_vol)
            cm.mean += p.gamma_skew * cell_mass(*q, dt, m) * w2;
    }

    std::vector<double> w2s(omega_sq_path.end() -
                                static_cast<std::ptrdiff_t>(m_w + 1),
                            omega_sq_path.end());
    cm.cov = [g, k2, dt, m_w, w2s](double h) {
        if (h < 0.0) throw ConfigError("lag must be >= 0");
        double acc = 0.0;
        const std::size_t last_i = w2s.size() - 1;
        for (std::size_t m = 1; m <= m_w; ++m)
            acc += k2 * cell_mass_overlap(*g, dt, m, h) * w2s[last_i - m];
        return acc;
    };
    return cm;
}

// ---------------------------------------------------------------------------
// stationary moments
// ---------------------------------------------------------------------------

namespace {

// Long-path Monte Carlo estimate of E[omega] and the autocovariance of omega
// on a uniform lag grid (deterministic internal seed so analytic calls are
// reproducible).
struct OmegaStatsGrid {
    double mean = 0.0;
    double dt = 0.0;
    std::vector<double> acvf;  // lags 0, dt, 2dt, ...
    double operator()(double h) const {
        const double x = h / dt;
        const auto i = static_cast<std::size_t>(std::floor(x));
        if (i + 1 >= acvf.size()) return 0.0;
        const double f = x - static_cast<double>(i);
        return (1.0 - f) * acvf[i] + f * acvf[i + 1];
    }
};

OmegaStatsGrid estimate_omega_stats(const VolatilityModel& v, double t_span) {
    const double lam = v.lambda;
    const double dt = std::min(0.05 / lam, t_span / 512.0);
    const double lag_span = t_span + 10.0 / lam;
    const auto n_lags = static_cast<std::size_t>(std::ceil(lag_span / dt)) + 2;
    const std::size_t n = std::max<std::size_t>(400000, 40 * n_lags);

    const std::vector<double> w2 = sample_vol_path(v, n, dt, 0xACF0ACF0ULL);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::sqrt(w2[i]);

    OmegaStatsGrid s;
    s.dt = dt;
    double mean = 0.0;
    for (const double x : w) mean += x;
    mean /= static_cast<double>(n);
    s.mean = mean;
    s.acvf.resize(n_lags);
    for (std::size_t l = 0; l < n_lags; ++l) {
        double acc = 0.0;
        for (std::size_t i = 0; i + l < n; ++i)
            acc += (w[i] - mean) * (w[i + l] - mean);
        s.acvf[l] = acc / static_cast<double>(n - l);
    }
    return s;
}

StationaryMoments stationary_impl(const LssProcess& p, double mean_omega,
                                  const std::function<double(double)>& gamma_omega,
                                  bool flagged) {
    const double k1 = p.driver.kappa1();
    const double k2 = p.driver.kappa2();
    const double ew2 = vol_mean(p.vol);
    const std::shared_ptr<const Kernel> g = p.g;
    const double l2 = g->l2_norm_sq();

    StationaryMoments sm;
    sm.used_mc_vol_stats = flagged;
    sm.mean = p.mu;
    if (k1 != 0.0) sm.mean += k1 * mean_omega * g->int_g(0.0, kInf);
    if (p.has_drift() && p.drift_from_vol && p.gamma_skew != 0.0)
        sm.mean += p.gamma_skew * ew2 * p.q->int_g(0.0, kInf);

    if (k1 == 0.0 || !gamma_omega) {
        sm.var = k2 * ew2 * l2;
        sm.acf = [g, l2](double h) {
            if (h < 0.0) throw ConfigError("lag must be >= 0");
            return g->overlap(h) / l2;
        };
        return sm;
    }

    const double t_tr = kernel_truncation(*g, 1e-8);
    const std::size_t cells = 600;
    const double del = t_tr / static_cast<double>(cells);
    std::vector<double> mass(cells), mid(cells);
    for (std::size_t i = 0; i < cells; ++i) {
        mass[i] = g->int_g(static_cast<double>(i) * del,
                           (static_cast<double>(i) + 1.0) * del);
        mid[i] = (static_cast<double>(i) + 0.5) * del;
    }
    // int int g(x+h) g(y) gamma(|x-y|) dx dy: exact cell masses of g(x+h)
    // against the midpoint-evaluated volatility autocovariance.
    const auto double_term_lag = [g, mid, mass, gamma_omega, cells,
                                  del](double h) {
        double acc = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            const double mass_h =
                g->int_g(static_cast<double>(i) * del + h,
                         (static_cast<double>(i) + 1.0) * del + h);
            double row = 0.0;
            for (std::size_t j = 0; j < cells; ++j)
                row += mass[j] * gamma_omega(std::abs(mid[i] - mid[j]));
            acc += row * mass_h;
        }
        return acc;
    };

    const double dvar = double_term_lag(0.0);
    sm.var = k2 * ew2 * l2 + k1 * k1 * dvar;
    const double var = sm.var;
    sm.acf = [g, l2, k1, k2, ew2, var, double_term_lag](double h) {
        if (h < 0.0) throw ConfigError("lag must be >= 0");
        const double cov = k2 * ew2 * g->overlap(h) + k1 * k1 * double_term_lag(h);
        return cov / var;
    };
    return sm;
}

void reject_active_drift_for_moments(const LssProcess& p) {
    if (p.has_drift() && !(p.drift_from_vol && p.gamma_skew == 0.0))
        throw ConfigError(
            "stationary variance/ACF formulas exclude the drift channel; "
            "use gamma_skew = 0 or drop the drift kernel");
}

} // namespace

StationaryMoments moments_stationary(const LssProcess& p) {
    p.validate();
    const double k1 = p.driver.kappa1();

    if (p.vol.family == VolFamily::Constant) {
        // a deterministic vol-squared drift shifts the mean only, so it is
        // admissible here; user drift processes are not
        if (!(p.has_drift() && p.drift_from_vol))
            reject_active_drift_for_moments(p);
        return stationary_impl(p, std::sqrt(p.vol.c), nullptr, false);
    }

    reject_active_drift_for_moments(p);
    if (k1 == 0.0) {
        // mean and acf need no omega statistics; E[omega] enters only via k1
        return stationary_impl(p, 0.0, nullptr, false);
    }
    const double t_tr = kernel_truncation(*p.g, 1e-8);
    const OmegaStatsGrid stats = estimate_omega_stats(p.vol, t_tr);
    const auto gamma = [stats](double h) { return stats(h); };
    return stationary_impl(p, stats.mean, gamma, true);
}

StationaryMoments moments_stationary(const LssProcess& p,
                                     const VolOmegaStats& stats) {
    p.validate();
    reject_active_drift_for_moments(p);
    if (!stats.acvf_omega) throw ConfigError("acvf_omega function required");
    return stationary_impl(p, stats.mean_omega, stats.acvf_omega, false);
}

// ---------------------------------------------------------------------------
// semimartingale structure and quadratic variation
// ---------------------------------------------------------------------------

SemimartingaleReport semimartingale_decompose(const LssProcess& p) {
    p.validate();
    SemimartingaleReport r;
    r.driver_mean_finite = std::isfinite(p.driver.kappa1());

    const KernelRegularity reg = p.g->regularity();
    r.g0 = reg.g0;
    r.kernel_smooth = reg.g0_finite && reg.derivative_sq_integrable &&
                      reg.l2_integrable;

    if (p.has_drift()) {
        const KernelRegularity qreg = p.q->regularity();
        r.q0 = qreg.g0;
        r.drift_smooth = qreg.g0_finite;
    }

    if (!r.driver_mean_finite)
        r.reason = "driver mean not finite";
    else if (!reg.g0_finite)
        r.reason = "g(0+) not finite";
    else if (!reg.derivative_sq_integrable)
        r.reason = "kernel derivative not square-integrable";
    else if (!reg.l2_integrable)
        r.reason = "kernel not square-integrable";
    else if (!r.drift_smooth)
        r.reason = "q(0+) not finite";
    r.is_semimartingale = r.reason.empty();

    if (r.is_semimartingale) {
        const double g0 = r.g0;
        const double q0 = r.q0;
        const double k1 = p.driver.kappa1();
        const std::shared_ptr<const Kernel> g = p.g;
        const std::shared_ptr<const Kernel> q = p.q;
        const bool dfv = p.drift_from_vol;
        const double gam = p.gamma_skew;
        // A_{t_k} = g(0+) omega_k kappa1 + sum_m dg(m) omega dL (exact cell
        // masses of g', i.e. telescoped kernel differences) + drift analogue.
        r.drift_at = [g, q, g0, q0, k1, dfv, gam](const PathDetail& pd,
                                                  std::size_t k) {
            if (k >= pd.times.size() - 1)
                throw ConfigError("cell index outside the simulated grid");
            const std::size_t base = k + pd.pre_steps;
            const double dt = pd.dt;
            double a_val = g0 * std::sqrt(pd.omega_sq[base]) * k1;
            for (std::size_t m = 1; m <= pd.pre_steps; ++m) {
                const double dg =
                    (g->eval(static_cast<double>(m) * dt) -
                     g->eval((static_cast<double>(m) - 1.0) * dt)) /
                    dt;
                a_val += dg * std::sqrt(pd.omega_sq[base - m]) * pd.dl[base - m];
            }
            if (q && dfv) {
                a_val += q0 * gam * pd.omega_sq[base];
                for (std::size_t m = 1; m <= pd.pre_steps; ++m) {
                    const double dq =
                        (q->eval(static_cast<double>(m) * dt) -
                         q->eval((static_cast<double>(m) - 1.0) * dt)) /
                        dt;
                    a_val += dq * gam * pd.omega_sq[base - m] * dt;
                }
            }
            return a_val;
        };
    }
    return r;
}

QvResult quadratic_variation(const PathDetail& path, const LssProcess& p) {
    const SemimartingaleReport rep = semimartingale_decompose(p);
    if (!rep.is_semimartingale)
        throw ConfigError("quadratic variation needs the semimartingale "
                          "conditions: " + rep.reason);
    if (path.d_qv.empty())
        throw ConfigError("path carries no [L] increments (driver quadratic "
                          "variation unavailable)");
    if (path.y.size() != path.times.size() ||
        path.omega_sq.size() != path.d_qv.size() ||
        path.omega_sq.size() < path.pre_steps + path.times.size() - 1)
        throw ConfigError("inconsistent path detail");

    const std::size_t n = path.times.size() - 1;
    QvResult out;
    out.times = path.times;
    out.analytic.assign(n + 1, 0.0);
    out.realized.assign(n + 1, 0.0);
    const double g0sq = rep.g0 * rep.g0;
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t cell = path.pre_steps + k - 1;
        out.analytic[k] = out.analytic[k - 1] +
                          g0sq * path.omega_sq[cell] * path.d_qv[cell];
        const double dy = path.y[k] - path.y[k - 1];
        out.realized[k] = out.realized[k - 1] + dy * dy;
    }
    return out;
}

// ---------------------------------------------------------------------------
// superposition
// ---------------------------------------------------------------------------

SuperposedLss superpose(const std::vector<LssProcess>& factors,
                        const std::vector<double>& weights) {
    if (factors.empty() || factors.size() != weights.size())
        throw ConfigError("superpose needs matching nonempty factors/weights");
    double sum = 0.0;
    for (const double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("weights must sum to one");
    for (const auto& f : factors) f.validate();
    return SuperposedLss{factors, weights};
}

SimResult simulate(const SuperposedLss& sp, const SimConfig& c) {
    if (sp.factors.empty() || sp.factors.size() != sp.weights.size())
        throw ConfigError("superposition not built via superpose()");
    c.validate();
    const std::size_t nf = sp.factors.size();

    std::vector<Discretization> ds;
    std::vector<std::unique_ptr<VolPathSampler>> samplers;
    ds.reserve(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        const LssProcess& p = sp.factors[f];
        if (p.has_drift() && !p.drift_from_vol)
            throw ConfigError("matrix simulation supports the "
                              "volatility-squared drift wiring only");
        ds.push_back(discretize(p, c));
        if (!check_integrability(p).pass())
            throw MathError("a factor fails the integrability conditions");
        samplers.push_back(std::make_unique<VolPathSampler>(p.vol, c.dt));
    }

    std::size_t n_steps = 0;
    for (const auto& d : ds) n_steps = std::max(n_steps, d.n_steps);

    SimResult out;
    out.dt = c.dt;
    out.times = grid_times(n_steps, c.dt);
    out.paths.assign(static_cast<std::size_t>(c.n_paths),
                     std::vector<double>(n_steps + 1, 0.0));

    parallel_for(static_cast<std::size_t>(c.n_paths), [&](std::size_t i) {
        for (std::size_t f = 0; f < nf; ++f) {
            const LssProcess& p = sp.factors[f];
            const Discretization& d = ds[f];
            const PathDraws draws = draw_path_inputs(p, d, c.dt, c.seed, i, f,
                                                     nf, *samplers[f], false);
            const std::vector<double> a =
                drift_values(p, draws.omega_sq, nullptr, d.m_w + d.n_steps);
            const std::vector<double> y =
                accumulate_path(p, d, c.dt, draws.omega_sq, draws.dl, a);
            for (std::size_t k = 0; k <= d.n_steps; ++k)
                out.paths[i][k] += sp.weights[f] * y[k];
        }
    });
    return out;
}

StationaryMoments moments_stationary(const SuperposedLss& sp) {
    if (sp.factors.empty() || sp.factors.size() != sp.weights.size())
        throw ConfigError("superposition not built via superpose()");
    StationaryMoments out;
    std::vector<StationaryMoments> parts;
    parts.reserve(sp.factors.size());
    double wvar = 0.0;
    for (std::size_t f = 0; f < sp.factors.size(); ++f) {
        parts.push_back(moments_stationary(sp.factors[f]));
        const double w = sp.weights[f];
        out.mean += w * parts.back().mean;
        out.var += w * w * parts.back().var;
        wvar += w * w * parts.back().var;
        out.used_mc_vol_stats =
            out.used_mc_vol_stats || parts.back().used_mc_vol_stats;
    }
    std::vector<double> ws(sp.weights);
    out.acf = [parts = std::move(parts), ws, wvar](double h) {
        double acc = 0.0;
        for (std::size_t f = 0; f < parts.size(); ++f)
            acc += ws[f] * ws[f] * parts[f].var * parts[f].acf(h);
        return acc / wvar;
    };
    return out;
}

} // namespace lssm
