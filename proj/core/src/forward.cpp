#include "lssm/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lssm/errors.hpp"
#include "lssm/quadrature.hpp"

#include "detail/kernel_quad.hpp"

namespace lssm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using detail::exp_smoothed_l2;
using detail::gl_stable;
using detail::kernel_l2_segment;

void require_mode(const ForwardSurface& fs, MeasureMode m, const char* op) {
    if (fs.measure.mode != m)
        throw ConfigError(std::string(op) + " requires measure mode " +
                          to_string(m));
}

void require_kind(const ForwardSurface& fs, SpotKind k, const char* op) {
    if (fs.model.kind != k)
        throw ConfigError(std::string(op) + " requires a " + to_string(k) +
                          " spot model");
}

void require_maturity(const ForwardSurface& fs, double T) {
    if (!(T >= fs.state.t))
        throw ConfigError("maturity T must satisfy T >= t (T = " +
                          std::to_string(T) +
                          ", t = " + std::to_string(fs.state.t) + ")");
}

// Pricing formulas need a Markov volatility state: constant level or the
// OU recursion value Z_t.  The smoothed-intensity (GigOu) state is an entire
// window of past subordinator increments and is not supported.
void require_markov_vol(const LssProcess& p, const char* op) {
    if (p.vol.family == VolFamily::GigOu)
        throw ConfigError(std::string(op) +
                          ": smoothed-intensity (gig_ou) volatility has no "
                          "scalar Markov state; use constant or bns_ou "
                          "volatility");
}

// Tilted process-time volatility subordinator and its cumulant.
LevyModel tilted_vol_subordinator(const VolatilityModel& v, double eta) {
    return esscher_triplet(effective_subordinator(v), eta);
}

// theta-drift added to the log forward over the remaining window (t, T]:
// theta int_t^T G(T,s) ds = theta int_0^{T-t} g.  The realized window enters
// as observed data, so no drift is added over (0, t].
double girsanov_drift_term(const Kernel& g, double theta, double horizon) {
    if (theta == 0.0 || horizon <= 0.0) return 0.0;
    return theta * g.int_g(0.0, horizon);
}

// Variance / subordinator terms of the geometric Girsanov forward exponent.
// The driver variance b multiplies the squared volatility throughout (the
// effective intensity is b omega^2).
double gaussian_vol_exponent(const ForwardSurface& fs, double T) {
    const LssProcess& p = fs.model.core;
    const Kernel& g = *p.g;
    const double b = p.driver.kappa2();
    const double t = fs.state.t;
    if (p.vol.family == VolFamily::Constant)
        return 0.5 * b * p.vol.c * kernel_l2_segment(g, 0.0, T - t);
    // OU volatility: realized affine term plus the cumulant of the future
    // subordinator load.
    const double lambda = p.vol.lambda;
    const LevyModel tv = tilted_vol_subordinator(p.vol, fs.measure.esscher.eta);
    const double realized =
        0.5 * b * fs.state.z * exp_smoothed_l2(g, lambda, T - t);
    const auto f = [&](double u) {
        return cumulant(tv, 0.5 * b * exp_smoothed_l2(g, lambda, u));
    };
    const double future = gl_stable(f, 0.0, T - t);
    return realized + future;
}

struct StripViolation {
    std::size_t count = 0;
    std::size_t total = 0;
    double worst = 0.0;
};

[[noreturn]] void throw_strip(const LevyModel& driver, double theta,
                              const StripViolation& v) {
    const auto s = driver.strip();
    std::ostringstream os;
    os << "driver cumulant strip (" << s.first << ", " << s.second
       << ") exited: G(T,s) omega_s + theta reaches " << v.worst + theta;
    if (v.total > 0)
        os << "; offending fraction " << static_cast<double>(v.count) / v.total
           << " of sampled arguments (breach quantile "
           << 1.0 - static_cast<double>(v.count) / v.total << ")";
    throw MathError(os.str());
}

} // namespace

std::string to_string(MeasureMode m) {
    switch (m) {
        case MeasureMode::GeneralEsscher: return "general_esscher";
        case MeasureMode::BrownianGirsanov: return "brownian_girsanov";
    }
    throw ConfigError("unknown measure mode");
}

MeasureMode measure_mode_from_string(const std::string& s) {
    if (s == "general_esscher") return MeasureMode::GeneralEsscher;
    if (s == "brownian_girsanov") return MeasureMode::BrownianGirsanov;
    throw ConfigError("unknown measure mode '" + s + "'");
}

void PricingMeasure::validate(const LssProcess& p) const {
    if (mode == MeasureMode::BrownianGirsanov) {
        if (p.driver.family != LevyFamily::Brownian)
            throw ConfigError(
                "brownian_girsanov mode requires a Brownian driver (driver is " +
                p.driver.family_name() + ")");
        if (p.driver.p1 != 0.0)
            throw ConfigError(
                "brownian_girsanov mode requires a driftless Brownian driver "
                "(fold the drift into theta or use general_esscher)");
    }
    if (mode == MeasureMode::GeneralEsscher) {
        const auto s = p.driver.strip();
        if (!(esscher.theta > s.first && esscher.theta < s.second))
            throw ConfigError("theta = " + std::to_string(esscher.theta) +
                              " outside the driver cumulant strip (" +
                              std::to_string(s.first) + ", " +
                              std::to_string(s.second) + ")");
    }
    if (p.vol.family == VolFamily::BnsOu) {
        const auto s = p.vol.subordinator.strip();
        if (!(esscher.eta > s.first && esscher.eta < s.second))
            throw ConfigError("eta = " + std::to_string(esscher.eta) +
                              " outside the volatility subordinator strip (" +
                              std::to_string(s.first) + ", " +
                              std::to_string(s.second) + ")");
    } else if (p.vol.family == VolFamily::GigOu && esscher.eta != 0.0) {
        throw ConfigError(
            "eta tilt is not supported for gig_ou volatility (no closed "
            "tilted background subordinator)");
    }
}

nlohmann::json PricingMeasure::to_json() const {
    return {{"theta", esscher.theta},
            {"eta", esscher.eta},
            {"mode", lssm::to_string(mode)}};
}

PricingMeasure PricingMeasure::from_json(const nlohmann::json& j) {
    PricingMeasure m;
    try {
        m.esscher.theta = j.value("theta", 0.0);
        m.esscher.eta = j.value("eta", 0.0);
        m.mode = measure_mode_from_string(
            j.value("mode", std::string("general_esscher")));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad pricing measure spec: ") + e.what());
    }
    return m;
}

NovikovReport novikov_check(const LssProcess& p, double theta, double horizon) {
    if (!(horizon > 0.0)) throw ConfigError("novikov_check needs horizon > 0");
    NovikovReport r;
    if (theta == 0.0) {
        r.applies = false;
        r.sufficient = true;
        r.mgf_limit = kInf;
        r.note = "identity density (theta = 0)";
        return r;
    }
    switch (p.vol.family) {
        case VolFamily::Constant: {
            if (p.vol.c <= 0.0) {
                r.note = "volatility is identically zero";
                return r;
            }
            r.applies = true;
            r.bound = 0.5 * theta * theta * horizon;
            r.mgf_limit = kInf;
            r.sufficient = true;
            r.note = "volatility bounded away from zero";
            return r;
        }
        case VolFamily::BnsOu: {
            const double l = p.vol.lambda;
            r.applies = true;
            r.bound = theta * theta * (std::expm1(l * horizon)) / (2.0 * l);
            r.mgf_limit = 0.0;
            r.sufficient = false;
            r.note =
                "envelope j(t) = e^{-lambda t} is exact, but no positive "
                "exponential-moment limit for 1/omega^2 is known for "
                "subordinator-driven OU marginals; criterion inconclusive";
            return r;
        }
        case VolFamily::GigOu: {
            r.applies = false;
            r.mgf_limit = 0.5 * p.vol.target.chi;
            r.sufficient = false;
            r.note =
                "smoothed intensity admits no positive envelope j(t) <= "
                "i(t,s)/i(0,s); marginal inverse-moment limit chi/2 reported "
                "for reference";
            return r;
        }
    }
    throw ConfigError("unknown volatility family");
}

ForwardSurface ForwardSurface::from_path(const SpotModel& m,
                                         const PricingMeasure& q,
                                         const PathDetail& pd, std::size_t k) {
    m.validate();
    q.validate(m.core);
    if (m.core.has_drift())
        throw ConfigError(
            "forward pricing does not support the drift channel (q, a)");
    if (pd.y.empty() || pd.dt <= 0.0)
        throw ConfigError("empty path detail");
    const std::size_t n_steps = pd.y.size() - 1;
    if (k > n_steps)
        throw ConfigError("cut index " + std::to_string(k) +
                          " beyond the path end " + std::to_string(n_steps));
    ForwardSurface fs;
    fs.model = m;
    fs.measure = q;
    ForwardState& st = fs.state;
    st.t = pd.times[k];
    st.dt = pd.dt;
    st.window_cells = pd.pre_steps;
    const std::size_t cells = k + pd.pre_steps;
    st.weighted_increments.resize(cells);
    for (std::size_t i = 0; i < cells; ++i)
        st.weighted_increments[i] = std::sqrt(pd.omega_sq[i]) * pd.dl[i];
    const std::size_t zi = k + pd.pre_steps;
    st.z = zi < pd.omega_sq.size() ? pd.omega_sq[zi] : pd.omega_sq.back();
    st.y = pd.y[k];
    return fs;
}

ForwardSurface ForwardSurface::from_path(const SpotModel& m,
                                         const PricingMeasure& q,
                                         const PathDetail& pd) {
    return from_path(m, q, pd, pd.y.empty() ? 0 : pd.y.size() - 1);
}

double realized_weighted_integral(const ForwardSurface& fs, double T) {
    require_maturity(fs, T);
    const Kernel& g = *fs.model.core.g;
    const ForwardState& st = fs.state;
    const double lag = T - st.t;
    const std::size_t n =
        std::min(st.weighted_increments.size(),
                 static_cast<std::size_t>(st.window_cells));
    double sum = 0.0;
    const std::size_t last = st.weighted_increments.size();
    for (std::size_t m = 1; m <= n; ++m) {
        const double w = m == 1
                             ? g.int_g(lag, lag + st.dt) / st.dt
                             : g.eval(lag + static_cast<double>(m) * st.dt);
        sum += w * st.weighted_increments[last - m];
    }
    return sum;
}

double forward_geometric_gaussian(const ForwardSurface& fs, double T) {
    require_mode(fs, MeasureMode::BrownianGirsanov, "forward_geometric_gaussian");
    require_kind(fs, SpotKind::Geometric, "forward_geometric_gaussian");
    require_maturity(fs, T);
    require_markov_vol(fs.model.core, "forward_geometric_gaussian");
    const LssProcess& p = fs.model.core;
    const double m = realized_weighted_integral(fs, T);
    const double drift =
        girsanov_drift_term(*p.g, fs.measure.esscher.theta, T - fs.state.t);
    const double vterm = gaussian_vol_exponent(fs, T);
    return seasonality(fs.model.seasonality, T) *
           std::exp(p.mu + m + drift + vterm);
}

double forward_geometric_gaussian_affine(const ForwardSurface& fs, double T) {
    require_mode(fs, MeasureMode::BrownianGirsanov,
                 "forward_geometric_gaussian_affine");
    require_kind(fs, SpotKind::Geometric, "forward_geometric_gaussian_affine");
    require_maturity(fs, T);
    require_markov_vol(fs.model.core, "forward_geometric_gaussian_affine");
    const LssProcess& p = fs.model.core;
    const AffinityResult aff = affinity_check(*p.g);
    if (!aff.affine)
        throw ConfigError(
            "forward_geometric_gaussian_affine needs an exponential kernel: " +
            aff.note);
    const double m =
        std::exp(-aff.alpha * (T - fs.state.t)) * (fs.state.y - p.mu);
    const double drift =
        girsanov_drift_term(*p.g, fs.measure.esscher.theta, T - fs.state.t);
    const double vterm = gaussian_vol_exponent(fs, T);
    return seasonality(fs.model.seasonality, T) *
           std::exp(p.mu + m + drift + vterm);
}

double forward_geometric_esscher(const ForwardSurface& fs, double T, int n_mc,
                                 std::uint64_t seed) {
    require_kind(fs, SpotKind::Geometric, "forward_geometric_esscher");
    require_maturity(fs, T);
    require_markov_vol(fs.model.core, "forward_geometric_esscher");
    if (n_mc < 1) throw ConfigError("n_mc must be >= 1");
    const LssProcess& p = fs.model.core;
    const double theta = fs.measure.esscher.theta;
    const double base = seasonality(fs.model.seasonality, T) *
                        std::exp(p.mu + realized_weighted_integral(fs, T));
    const double h = T - fs.state.t;
    if (h == 0.0) return base;
    const Kernel& g = *p.g;
    const auto strip = p.driver.strip();

    if (p.vol.family == VolFamily::Constant) {
        const double w = std::sqrt(p.vol.c);
        const auto f = [&](double u) {
            const double x = g.eval(u) * w;
            if (!(x + theta > strip.first && x + theta < strip.second)) {
                StripViolation v;
                v.worst = x;
                throw_strip(p.driver, theta, v);
            }
            return esscher_cumulant(p.driver, theta, x);
        };
        const double I = g.regularity().g0_finite
                             ? gl_stable(f, 0.0, h)
                             : quad::integrate(f, 0.0, h, 1e-12, 1e-9).value;
        return base * std::exp(I);
    }

    // OU volatility: Monte Carlo over eta-tilted future volatility paths
    // started from the current state, left-point Riemann sum of the tilted
    // driver cumulant along each path.
    const double lambda = p.vol.lambda;
    const LevyModel tv = tilted_vol_subordinator(p.vol, fs.measure.esscher.eta);
    const double ref_dt = fs.state.dt > 0.0 ? fs.state.dt : h / 64.0;
    const std::size_t n_grid = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(h / ref_dt)), 64, 4000);
    const double du = h / static_cast<double>(n_grid);
    const double decay = std::exp(-lambda * du);
    StripViolation viol;
    double acc = 0.0;
    for (int i = 0; i < n_mc; ++i) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
        double z = fs.state.z;
        double I = 0.0;
        for (std::size_t j = 0; j < n_grid; ++j) {
            const double s = fs.state.t + static_cast<double>(j) * du;
            const double x = g.eval(T - s) * std::sqrt(std::max(z, 0.0));
            ++viol.total;
            if (!(x + theta > strip.first && x + theta < strip.second)) {
                ++viol.count;
                viol.worst = std::max(viol.worst, x);
            } else {
                I += esscher_cumulant(p.driver, theta, x) * du;
            }
            z = decay * z + sample_increment(tv, du, rng);
        }
        acc += std::exp(I);
    }
    if (viol.count > 0) throw_strip(p.driver, theta, viol);
    return base * (acc / static_cast<double>(n_mc));
}

double forward_arithmetic(const ForwardSurface& fs, double T, int n_mc,
                          std::uint64_t seed) {
    require_kind(fs, SpotKind::Arithmetic, "forward_arithmetic");
    require_maturity(fs, T);
    const LssProcess& p = fs.model.core;
    const double base = seasonality(fs.model.seasonality, T) + p.mu +
                        realized_weighted_integral(fs, T);
    const double h = T - fs.state.t;
    if (h == 0.0) return base;
    const Kernel& g = *p.g;

    if (fs.measure.mode == MeasureMode::BrownianGirsanov)
        return base + girsanov_drift_term(g, fs.measure.esscher.theta, h);

    require_markov_vol(p, "forward_arithmetic");
    const double k1 = esscher_triplet(p.driver, fs.measure.esscher.theta).kappa1();
    if (k1 == 0.0) return base;
    if (p.vol.family == VolFamily::Constant)
        return base + k1 * std::sqrt(p.vol.c) * g.int_g(0.0, h);

    // OU volatility: E_eta[omega_s | F_t] estimated pathwise, weighted with
    // exact kernel cell masses (robust to an integrable singularity of g at
    // the maturity end).
    if (n_mc < 1) throw ConfigError("n_mc must be >= 1");
    const double lambda = p.vol.lambda;
    const LevyModel tv = tilted_vol_subordinator(p.vol, fs.measure.esscher.eta);
    const double ref_dt = fs.state.dt > 0.0 ? fs.state.dt : h / 64.0;
    const std::size_t n_grid = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(h / ref_dt)), 64, 4000);
    const double du = h / static_cast<double>(n_grid);
    const double decay = std::exp(-lambda * du);
    std::vector<double> mean_omega(n_grid, 0.0);
    for (int i = 0; i < n_mc; ++i) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
        double z = fs.state.z;
        for (std::size_t j = 0; j < n_grid; ++j) {
            mean_omega[j] += std::sqrt(std::max(z, 0.0));
            z = decay * z + sample_increment(tv, du, rng);
        }
    }
    double term = 0.0;
    for (std::size_t j = 0; j < n_grid; ++j) {
        // s in [t + j du, t + (j+1) du] corresponds to lag u = T - s in
        // [h - (j+1) du, h - j du]; omega is sampled at the left point in s.
        const double mass = g.int_g(h - static_cast<double>(j + 1) * du,
                                    h - static_cast<double>(j) * du);
        term += mass * mean_omega[j] / static_cast<double>(n_mc);
    }
    return base + k1 * term;
}

AffinityResult affinity_check(const Kernel& k) {
    AffinityResult r;
    const double xs[3] = {0.31, 1.07, 2.43};
    const double d1 = 0.83;
    const double d2 = 1.37;
    double ratio1 = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
        const double d = pass == 0 ? d1 : d2;
        double r0 = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double den = k.eval(xs[i]);
            if (!(std::abs(den) > 1e-300)) {
                r.note = "kernel vanishes at a probe point";
                return r;
            }
            const double ri = k.eval(xs[i] + d) / den;
            if (i == 0) {
                r0 = ri;
            } else if (std::abs(ri - r0) > 1e-10 * std::max(std::abs(r0), 1e-300)) {
                r.note = "ratio g(x+d)/g(x) varies with x: not exponential";
                return r;
            }
        }
        if (pass == 0) {
            ratio1 = r0;
        } else {
            // Consistency across shifts: r(d2) must equal r(d1)^{d2/d1}.
            const double expect = std::pow(ratio1, d2 / d1);
            if (std::abs(r0 - expect) > 1e-10 * std::max(std::abs(expect), 1e-300)) {
                r.note = "shift ratios inconsistent with a single decay rate";
                return r;
            }
        }
    }
    r.affine = true;
    r.alpha = -std::log(ratio1) / d1;
    r.scale = k.eval(1.0) * std::exp(r.alpha);
    const double alpha = r.alpha;
    const double scale = r.scale;
    r.g1 = [scale, alpha](double t) { return scale * std::exp(-alpha * t); };
    r.g2 = [alpha](double s) { return std::exp(alpha * s); };
    r.note = "exponential kernel";
    return r;
}

AffinityResult affinity_check(const SeparableKernel& k, double t0, double s0) {
    AffinityResult r;
    const double base = k.eval_ts(t0, s0);
    if (!(std::abs(base) > 1e-300)) {
        r.note = "kernel vanishes at the base point; pick another (t0, s0)";
        return r;
    }
    r.affine = true;
    r.g1 = [k, s0](double t) { return k.eval_ts(t, s0); };
    r.g2 = [k, t0, base](double s) { return k.eval_ts(t0, s) / base; };
    r.note = "product kernel";
    return r;
}

double separable_forward_log_stochastic(const SeparableKernel& k, double t,
                                        double T,
                                        double log_spot_over_seasonal) {
    if (!(T >= t)) throw ConfigError("T must be >= t");
    const double probes[3] = {t, 0.0, 0.5 * t};
    for (double s : probes) {
        const double den = k.eval_ts(t, s);
        if (std::abs(den) > 1e-300)
            return k.eval_ts(T, s) / den * log_spot_over_seasonal;
    }
    throw MathError("separable kernel vanishes at all probe sections");
}

double forward_vol_term_structure(const ForwardSurface& fs, double T, double t) {
    require_mode(fs, MeasureMode::BrownianGirsanov, "forward_vol_term_structure");
    if (!(T >= t)) throw ConfigError("T must be >= t");
    const double b = fs.model.core.driver.kappa2();
    return fs.model.core.g->eval(T - t) *
           std::sqrt(b * std::max(fs.state.z, 0.0));
}

double forward_spot_correlation(const Kernel& k, double t, double T) {
    if (!(T >= t)) throw ConfigError("T must be >= t");
    const double h = T - t;
    const double denom_sq = k.l2_tail_sq(h) * k.l2_norm_sq();
    if (!(denom_sq > 0.0))
        throw MathError("forward window variance vanished at lag " +
                        std::to_string(h));
    const double rho = k.overlap(h) / std::sqrt(denom_sq);
    if (rho > 1.0 + 1e-8 || rho < -1.0 - 1e-8)
        throw MathError("correlation outside [-1, 1]: quadrature failure");
    return std::clamp(rho, -1.0, 1.0);
}

double ForwardStepModel::sample_relative_increment(Rng& rng) const {
    double inc = diffusion * std::sqrt(dt) * rng.normal();
    if (has_jumps) {
        const double dv = sample_increment(tilted_subordinator, dt, rng);
        inc += std::exp(jump_scale * dv) - std::exp(dt * compensator_cumulant);
    }
    return inc;
}

ForwardStepModel risk_neutral_forward_step(const ForwardSurface& fs, double T,
                                           double dt) {
    require_mode(fs, MeasureMode::BrownianGirsanov, "risk_neutral_forward_step");
    require_maturity(fs, T);
    require_markov_vol(fs.model.core, "risk_neutral_forward_step");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    const LssProcess& p = fs.model.core;
    const double b = p.driver.kappa2();
    ForwardStepModel step;
    step.dt = dt;
    step.diffusion = fs.model.core.g->eval(T - fs.state.t) *
                     std::sqrt(b * std::max(fs.state.z, 0.0));
    if (p.vol.family == VolFamily::BnsOu) {
        step.has_jumps = true;
        step.jump_scale =
            0.5 * b * exp_smoothed_l2(*p.g, p.vol.lambda, T - fs.state.t);
        step.tilted_subordinator =
            tilted_vol_subordinator(p.vol, fs.measure.esscher.eta);
        step.compensator_cumulant =
            cumulant(step.tilted_subordinator, step.jump_scale);
    }
    return step;
}

std::vector<ForwardCurvePoint> forward_curve(const ForwardSurface& fs,
                                             const std::vector<double>& maturities,
                                             int n_mc, std::uint64_t seed) {
    std::vector<ForwardCurvePoint> out;
    out.reserve(maturities.size());
    // Instantaneous standard-deviation scale of the log forward; equals the
    // lognormal volatility in the Girsanov setting.
    const double omega =
        std::sqrt(fs.model.core.driver.kappa2() * std::max(fs.state.z, 0.0));
    for (double T : maturities) {
        ForwardCurvePoint pt;
        pt.maturity = T;
        if (fs.model.kind == SpotKind::Arithmetic)
            pt.price = forward_arithmetic(fs, T, n_mc, seed);
        else if (fs.measure.mode == MeasureMode::BrownianGirsanov)
            pt.price = forward_geometric_gaussian(fs, T);
        else
            pt.price = forward_geometric_esscher(fs, T, n_mc, seed);
        pt.sigma_f = fs.model.core.g->eval(T - fs.state.t) * omega;
        out.push_back(pt);
    }
    return out;
}

} // namespace lssm
