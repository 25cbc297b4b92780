#pragma once

// Fourier pricing of European options written on forwards, in the Gaussian
// change-of-measure regime (measure mode BrownianGirsanov) of the geometric
// spot model with constant or OU volatility.
//
// The option pays p(ln F_tau(T)) at its expiry tau, where F_tau(T) is the
// forward price at tau for delivery T >= tau.  Conditional on the state at
// the current time t, the log forward at expiry decomposes as
//
//   ln F_tau(T) = Rbar + Htilde/2 + int_t^tau g(T-s) omega_s dW_s
//                 + int_t^tau J(v)/2 dV_v ,
//
// where Rbar collects the seasonal level, the mean level, the realized
// window, the remaining drift theta int_0^{T-t} g and the compensator of the
// post-expiry volatility load; Htilde is the part of the post-expiry
// variance driven by the current volatility state; and J(v) is the load of a
// volatility jump at v on that variance (zero for constant volatility).
// Averaging the Gaussian integral conditionally on the volatility path gives
// the moment transform
//
//   Phi(z) = exp( z (Rbar + Htilde/2) + z^2 V0/2
//                 + int_t^tau phi_V^eta( z^2 A(v)/2 + z J(v)/2 ) dv ) ,
//
// with V0 the current-state Gaussian variance accumulated on (t, tau], A(v)
// the load of a volatility jump on that variance and phi_V^eta the tilted
// cumulant of the process-time volatility subordinator.  Phi(1) equals the
// current forward F_t(T).  The price follows by damped-payoff inversion:
//
//   price = e^{-r (tau - t)} (1/pi)
//           int_0^inf Re[ phat_alpha(y) Phi(alpha + i y) ] dy ,
//
// where phat_alpha(y) = int e^{-(alpha + i y) x} p(x) dx is the damped
// payoff transform.  For a call with strike K it equals K^{1-s} / (s (s-1))
// with s = alpha + i y, which requires alpha > 1; the put has the same
// closed form on the contour alpha < 0.  The driver variance b multiplies
// omega^2 in every variance term, exactly as in the forward formulas.

#include <complex>
#include <cstddef>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "lssm/forward.hpp"

namespace lssm {

enum class PayoffKind { Call, Put, Custom };

std::string to_string(PayoffKind k);
PayoffKind payoff_kind_from_string(const std::string& s);

struct OptionSpec {
    PayoffKind kind = PayoffKind::Call;
    double strike = 1.0;    // K > 0 (call / put)
    double expiry = 0.0;    // tau, option expiry (>= current time)
    double maturity = 0.0;  // T, forward delivery (>= expiry)
    double rate = 0.0;      // continuously compounded discount rate
    // Damping contour alpha: calls need alpha > 1 (the alpha-th moment of
    // the forward must exist), puts need alpha < 0.
    double damping = 1.5;
    // Custom payoff as a function of x = ln F_tau(T).  The damped transform
    // is computed numerically on [custom_lo, custom_hi]; the damped payoff
    // e^{-alpha x} p(x) must be negligible outside that window.
    std::function<double(double)> custom_payoff;
    double custom_lo = 0.0;
    double custom_hi = 0.0;

    void validate() const;
    // Undiscounted payoff at x = ln F.
    double payoff(double x) const;
};

struct FourierGrid {
    std::size_t n_points = 4096;  // trapezoid intervals (power of two)
    double y_max = 200.0;         // truncation of the inversion integral
    double rel_tol = 1e-6;        // accept err <= abs_tol + rel_tol |price|
    double abs_tol = 1e-9;
    // Widen/refine the grid automatically when the terminal variance is so
    // small that the transform decays beyond y_max.
    bool auto_scale = true;

    void validate() const;
};

struct OptionPrice {
    double price = 0.0;
    // Two-sided estimate: grid-halving difference plus truncation tail.
    double error_estimate = 0.0;
    std::size_t n_points = 0;  // grid actually used
    double y_max = 0.0;
};

// Damped payoff transform phat_alpha(y); closed form for calls and puts,
// panel quadrature (oscillation-adaptive) for custom payoffs.
std::complex<double> payoff_transform(const OptionSpec& o, double y);

// Price the option given the current forward-surface state.  Requires a
// geometric spot model under the BrownianGirsanov measure with constant or
// bns_ou volatility.  Throws ConfigError when the damping moment fails the
// subordinator strip pre-check, MathError when the inversion integral does
// not meet the tolerance after one widened retry.
OptionPrice price_option(const OptionSpec& o, const ForwardSurface& fs,
                         const FourierGrid& grid = {});

// Reference price of a call/put on a lognormal forward with the given
// integrated variance (the constant-volatility regime reduces to this).
double black76(PayoffKind kind, double forward, double strike,
               double variance, double discount);

} // namespace lssm
