#include "lssm/options.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "lssm/errors.hpp"
#include "lssm/levy.hpp"
#include "lssm/quadrature.hpp"
#include "lssm/volatility.hpp"

#include "detail/kernel_quad.hpp"

namespace lssm {

namespace {

using detail::exp_smoothed_l2;
using detail::gl_stable;
using detail::kernel_l2_segment;

constexpr double kPi = 3.14159265358979323846;

using Cplx = std::complex<double>;

std::size_t next_pow2(double x) {
    std::size_t n = 16;
    while (static_cast<double>(n) < x && n < (std::size_t{1} << 20)) n <<= 1;
    return n;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Coefficients of the conditional moment transform Phi(z) of ln F_tau(T).
struct Transform {
    double rbar_half = 0.0;  // Rbar + Htilde/2
    double v0 = 0.0;         // current-state Gaussian variance on (t, tau]
    bool has_jumps = false;
    LevyModel tv;            // tilted process-time volatility subordinator
    std::vector<double> w;   // quadrature weights on [t, tau]
    std::vector<double> a;   // A(v_i): jump load on the (t, tau] variance
    std::vector<double> j;   // J(v_i): jump load on the post-expiry variance

    Cplx log_phi(Cplx z) const {
        Cplx e = z * rbar_half + 0.5 * z * z * v0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const Cplx arg = 0.5 * z * z * a[i] + 0.5 * z * j[i];
            e += w[i] * cumulant(tv, arg);
        }
        return e;
    }
};

Transform build_transform(const OptionSpec& o, const ForwardSurface& fs) {
    const LssProcess& p = fs.model.core;
    const Kernel& g = *p.g;
    const double b = p.driver.kappa2();
    const double t = fs.state.t;
    const double tau = o.expiry;
    const double T = o.maturity;

    Transform tr;
    double rbar = log_seasonality(fs.model.seasonality, T) + p.mu +
                  realized_weighted_integral(fs, T);
    if (fs.measure.esscher.theta != 0.0 && T > t)
        rbar += fs.measure.esscher.theta * g.int_g(0.0, T - t);

    double htilde = 0.0;
    if (p.vol.family == VolFamily::Constant) {
        tr.v0 = b * p.vol.c * kernel_l2_segment(g, T - tau, T - t);
        htilde = b * p.vol.c * kernel_l2_segment(g, 0.0, T - tau);
    } else {
        const double lambda = p.vol.lambda;
        tr.tv = esscher_triplet(effective_subordinator(p.vol),
                                fs.measure.esscher.eta);
        tr.has_jumps = true;
        const double z_t = std::max(fs.state.z, 0.0);
        const double e_tau = exp_smoothed_l2(g, lambda, T - tau);
        const double e_t = exp_smoothed_l2(g, lambda, T - t);
        const double decay_tt = std::exp(-lambda * (tau - t));
        tr.v0 = b * z_t * std::max(e_t - decay_tt * e_tau, 0.0);
        htilde = b * z_t * decay_tt * e_tau;

        // Post-expiry compensator int_tau^T phi(b E(T-v)/2) dv; folded into
        // Rbar.  The cumulant itself rejects arguments outside the strip.
        if (T > tau) {
            const auto f = [&](double x) {
                return cumulant(tr.tv,
                                0.5 * b * exp_smoothed_l2(g, lambda, x));
            };
            rbar += gl_stable(f, 0.0, T - tau);
        }

        if (tau > t) {
            const int n_v = 96;
            const double *xs, *ws;
            quad::gauss_legendre_rule(n_v, &xs, &ws);
            const double c = 0.5 * (t + tau);
            const double h = 0.5 * (tau - t);
            tr.w.resize(n_v);
            tr.a.resize(n_v);
            tr.j.resize(n_v);
            for (int i = 0; i < n_v; ++i) {
                const double v = c + h * xs[i];
                const double e_v = exp_smoothed_l2(g, lambda, T - v);
                const double dec = std::exp(-lambda * (tau - v));
                tr.w[i] = ws[i] * h;
                tr.a[i] = std::max(b * (e_v - dec * e_tau), 0.0);
                tr.j[i] = b * dec * e_tau;
            }

            // Moment pre-check: the worst real part of the cumulant argument
            // over the contour is at y = 0.
            const double hi = tr.tv.strip().second;
            double worst = 0.0;
            for (int i = 0; i < n_v; ++i)
                worst = std::max(worst, 0.5 * o.damping * o.damping * tr.a[i] +
                                            0.5 * o.damping * tr.j[i]);
            if (worst >= hi) {
                std::ostringstream msg;
                msg << "damping alpha = " << o.damping
                    << ": the alpha-moment of the forward is not finite "
                       "(volatility subordinator cumulant argument "
                    << worst << " exceeds the admissible bound " << hi
                    << "); reduce |alpha| or the tilt eta";
                throw ConfigError(msg.str());
            }
        }
    }
    tr.rbar_half = rbar + 0.5 * htilde;
    return tr;
}

// One trapezoid pass over [0, y_max] with the half-grid error estimate and
// the truncation tail bound.
struct PassResult {
    double integral = 0.0;
    double error = 0.0;
    bool finite = true;
};

PassResult integrate_pass(const OptionSpec& o, const Transform& tr,
                          std::size_t n, double y_max) {
    const double h = y_max / static_cast<double>(n);
    std::vector<double> f(n + 1, 0.0);
    std::size_t underflow_run = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double y = h * static_cast<double>(i);
        const Cplx z(o.damping, y);
        const Cplx le = tr.log_phi(z);
        if (le.real() > 690.0)
            throw MathError("option transform overflow: exp(" +
                            std::to_string(le.real()) +
                            "); rescale the price level");
        // Once the transform underflows, the remaining grid is exactly zero.
        if (le.real() < -745.0) {
            if (++underflow_run >= 8 && i > 64) break;
            continue;
        }
        underflow_run = 0;
        f[i] = (payoff_transform(o, y) * std::exp(le)).real();
    }
    PassResult r;
    double full = 0.5 * (f[0] + f[n]);
    for (std::size_t i = 1; i < n; ++i) full += f[i];
    full *= h;
    double half = 0.5 * (f[0] + f[n]);
    for (std::size_t i = 2; i < n; i += 2) half += f[i];
    half *= 2.0 * h;
    r.integral = full;
    r.error = 2.0 * (std::abs(full - half) + y_max * std::abs(f[n]));
    for (const double v : f)
        if (!std::isfinite(v)) r.finite = false;
    return r;
}

Cplx custom_transform(const OptionSpec& o, double y) {
    const double range = o.custom_hi - o.custom_lo;
    // Enough panels that a 16-node rule sees at most ~one oscillation.
    const std::size_t panels = std::min<std::size_t>(
        20000, std::max<std::size_t>(
                   4, static_cast<std::size_t>(
                          std::ceil(range * std::max(std::abs(y), 1.0) / 6.0))));
    const double *xs, *ws;
    quad::gauss_legendre_rule(16, &xs, &ws);
    const Cplx s(o.damping, y);
    Cplx acc(0.0, 0.0);
    const double pw = range / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double a = o.custom_lo + pw * static_cast<double>(p);
        const double c = a + 0.5 * pw;
        for (int i = 0; i < 16; ++i) {
            const double x = c + 0.5 * pw * xs[i];
            acc += ws[i] * o.custom_payoff(x) * std::exp(-s * x);
        }
    }
    return acc * (0.5 * pw);
}

} // namespace

std::string to_string(PayoffKind k) {
    switch (k) {
        case PayoffKind::Call: return "call";
        case PayoffKind::Put: return "put";
        case PayoffKind::Custom: return "custom";
    }
    throw ConfigError("unknown payoff kind");
}

PayoffKind payoff_kind_from_string(const std::string& s) {
    if (s == "call") return PayoffKind::Call;
    if (s == "put") return PayoffKind::Put;
    if (s == "custom") return PayoffKind::Custom;
    throw ConfigError("unknown payoff kind '" + s + "'");
}

void OptionSpec::validate() const {
    if (!(maturity >= expiry))
        throw ConfigError("option needs delivery T >= expiry tau (T = " +
                          std::to_string(maturity) +
                          ", tau = " + std::to_string(expiry) + ")");
    if (!std::isfinite(damping) || damping == 0.0)
        throw ConfigError("damping alpha must be finite and nonzero");
    switch (kind) {
        case PayoffKind::Call:
            if (!(strike > 0.0)) throw ConfigError("call strike must be > 0");
            if (!(damping > 1.0))
                throw ConfigError(
                    "call damping needs alpha > 1 (transform converges on "
                    "Re s > 1)");
            break;
        case PayoffKind::Put:
            if (!(strike > 0.0)) throw ConfigError("put strike must be > 0");
            if (!(damping < 0.0))
                throw ConfigError(
                    "put damping needs alpha < 0 (transform converges on "
                    "Re s < 0)");
            break;
        case PayoffKind::Custom:
            if (!custom_payoff)
                throw ConfigError("custom payoff function not set");
            if (!(custom_hi > custom_lo))
                throw ConfigError("custom payoff window needs hi > lo");
            break;
    }
}

double OptionSpec::payoff(double x) const {
    switch (kind) {
        case PayoffKind::Call: return std::max(std::exp(x) - strike, 0.0);
        case PayoffKind::Put: return std::max(strike - std::exp(x), 0.0);
        case PayoffKind::Custom: return custom_payoff(x);
    }
    throw ConfigError("unknown payoff kind");
}

void FourierGrid::validate() const {
    if (n_points < 16 || (n_points & (n_points - 1)) != 0)
        throw ConfigError("n_points must be a power of two >= 16");
    if (!(y_max > 0.0)) throw ConfigError("y_max must be > 0");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
        throw ConfigError("tolerances must be > 0");
}

std::complex<double> payoff_transform(const OptionSpec& o, double y) {
    if (o.kind == PayoffKind::Custom) return custom_transform(o, y);
    const Cplx s(o.damping, y);
    // K^{1-s} / (s (s-1)); identical closed form on the call contour
    // alpha > 1 and the put contour alpha < 0.
    return std::exp((1.0 - s) * std::log(o.strike)) / (s * (s - 1.0));
}

OptionPrice price_option(const OptionSpec& o, const ForwardSurface& fs,
                         const FourierGrid& grid) {
    o.validate();
    grid.validate();
    fs.measure.validate(fs.model.core);
    if (fs.model.kind != SpotKind::Geometric)
        throw ConfigError("option pricing requires a geometric spot model");
    if (fs.measure.mode != MeasureMode::BrownianGirsanov)
        throw ConfigError(
            "option pricing requires the brownian_girsanov measure mode");
    if (fs.model.core.vol.family == VolFamily::GigOu)
        throw ConfigError(
            "option pricing: smoothed-intensity (gig_ou) volatility has no "
            "scalar Markov state; use constant or bns_ou volatility");
    const double t = fs.state.t;
    if (!(o.expiry >= t))
        throw ConfigError("option expiry tau = " + std::to_string(o.expiry) +
                          " lies before the current time t = " +
                          std::to_string(t));

    const Transform tr = build_transform(o, fs);
    const double disc = std::exp(-o.rate * (o.expiry - t));

    // Degenerate cases: at tau = t (or with no variance at all) the log
    // forward is known and the price is the (discounted) payoff.
    double jump_var = 0.0;
    for (std::size_t i = 0; i < tr.w.size(); ++i)
        jump_var += tr.w[i] * tr.a[i];
    if (tr.has_jumps) jump_var *= tr.tv.kappa1();
    const double v_total = tr.v0 + jump_var;
    if (!(o.expiry > t) || v_total <= 0.0) {
        OptionPrice r;
        r.price = disc * o.payoff(tr.rbar_half);
        r.error_estimate = 0.0;
        return r;
    }

    // Grid selection: make sure the Gaussian decay e^{-y^2 V/2} has run its
    // course inside [0, y_max]; keep the default resolution in y.
    std::size_t n_used = grid.n_points;
    double y_used = grid.y_max;
    if (grid.auto_scale) {
        const double y_need =
            std::sqrt(2.0 * 50.0 / std::max(v_total, 1e-12));
        if (y_need > y_used) {
            y_used = std::min(y_need, 2e4);
            const double h_target =
                grid.y_max / static_cast<double>(grid.n_points);
            n_used = std::max(n_used, next_pow2(y_used / h_target));
        }
    }

    for (int attempt = 0; attempt < 2; ++attempt) {
        const PassResult pass = integrate_pass(o, tr, n_used, y_used);
        OptionPrice r;
        r.price = disc * pass.integral / kPi;
        r.error_estimate = disc * pass.error / kPi;
        r.n_points = n_used;
        r.y_max = y_used;
        if (pass.finite &&
            r.error_estimate <= grid.abs_tol + grid.rel_tol * std::abs(r.price))
            return r;
        if (attempt == 0) {
            n_used = std::min<std::size_t>(n_used * 2, std::size_t{1} << 21);
            y_used *= 2.0;
        } else {
            std::ostringstream msg;
            msg << "fourier option price did not converge: price " << r.price
                << ", error estimate " << r.error_estimate << " (n = "
                << n_used << ", y_max = " << y_used
                << "); increase n_points/y_max or loosen the tolerance";
            throw MathError(msg.str());
        }
    }
    throw MathError("unreachable");
}

double black76(PayoffKind kind, double forward, double strike,
               double variance, double discount) {
    if (!(forward > 0.0) || !(strike > 0.0))
        throw ConfigError("black76 needs forward > 0 and strike > 0");
    if (variance < 0.0) throw ConfigError("black76 needs variance >= 0");
    if (variance == 0.0) {
        const double intrinsic = kind == PayoffKind::Call
                                     ? std::max(forward - strike, 0.0)
                                     : std::max(strike - forward, 0.0);
        if (kind == PayoffKind::Custom)
            throw ConfigError("black76 prices calls and puts only");
        return discount * intrinsic;
    }
    const double sd = std::sqrt(variance);
    const double d1 = (std::log(forward / strike) + 0.5 * variance) / sd;
    const double d2 = d1 - sd;
    switch (kind) {
        case PayoffKind::Call:
            return discount * (forward * norm_cdf(d1) - strike * norm_cdf(d2));
        case PayoffKind::Put:
            return discount * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1));
        case PayoffKind::Custom: break;
    }
    throw ConfigError("black76 prices calls and puts only");
}

} // namespace lssm
