#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// Memory kernels g for moving-average processes Y_t = ... + int g(t-s) w dL_s,
// together with the integral functionals the rest of the library needs:
// L2 norms, overlap integrals int g(x+h) g(x) dx (the autocovariance shape),
// tail masses, antiderivatives and regularity diagnostics.
//
// Families: exponential (Ornstein-Uhlenbeck shape), gamma-density shape,
// hyperbolic sigma/(x+b), and CARMA(p,q) kernels b' e^{Ax} e_p.

namespace lssm {

struct KernelRegularity {
    bool g0_finite = true;
    double g0 = 0.0;  // +infinity when g0_finite is false
    bool derivative_sq_integrable = false;
    bool l2_integrable = true;

    // A finite g(0+) with square-integrable derivative makes Y a
    // semimartingale (given an L2 kernel).
    bool semimartingale() const {
        return g0_finite && derivative_sq_integrable && l2_integrable;
    }
};

class Kernel {
  public:
    virtual ~Kernel() = default;

    virtual std::string family() const = 0;

    // g(x) for x >= 0; throws MathError for x < 0.  May return +infinity at
    // x = 0 for kernels with an integrable singularity.
    virtual double eval(double x) const = 0;

    // dg/dx for x > 0.
    virtual double deriv(double x) const = 0;

    // int_0^inf g(x)^2 dx.  Closed form where available, else quadrature.
    virtual double l2_norm_sq() const;

    // int_h^inf g(x)^2 dx = int_0^inf g(x+h)^2 dx.
    virtual double l2_tail_sq(double h) const;

    // int_0^inf g(x+h) g(x) dx; overlap(0) == l2_norm_sq().
    virtual double overlap(double h) const;

    // overlap(h) / l2_norm_sq(): the autocorrelation of Y at lag h when the
    // driver is centred (or the volatility deterministic).
    double acf_zero_mean(double h) const;

    // int_a^b g(x) dx, 0 <= a <= b (b may be +infinity).  Returns +infinity
    // for kernels that are square-integrable but not integrable.
    virtual double int_g(double a, double b) const;

    virtual KernelRegularity regularity() const = 0;

    // Smallest X with int_X^inf g^2 <= eps * l2_norm_sq (up to quadrature
    // accuracy); simulation horizons and quadrature fall-backs use this.
    virtual double truncation_horizon(double eps) const;

    virtual nlohmann::json to_json() const = 0;
    virtual std::unique_ptr<Kernel> clone() const = 0;
};

// Exponential kernel g(x) = e^{-alpha x} (Ornstein-Uhlenbeck shape).
class OuKernel final : public Kernel {
  public:
    explicit OuKernel(double alpha);
    double alpha() const { return alpha_; }

    std::string family() const override { return "ou"; }
    double eval(double x) const override;
    double deriv(double x) const override;
    double l2_norm_sq() const override;
    double l2_tail_sq(double h) const override;
    double overlap(double h) const override;
    double int_g(double a, double b) const override;
    KernelRegularity regularity() const override;
    double truncation_horizon(double eps) const override;
    nlohmann::json to_json() const override;
    std::unique_ptr<Kernel> clone() const override;

  private:
    double alpha_;
};

// Gamma-density shape g(x) = lambda^{nu-1/2} Gamma(2nu-1)^{-1/2} x^{nu-1}
// e^{-lambda x / 2}; its square is the Gamma(2nu-1, lambda) density, so the
// L2 norm is exactly 1 and the lag-h autocorrelation has a closed Bessel-K
// form.  Requires nu > 1/2; for nu < 1 the kernel has an integrable
// singularity at 0.
class GammaKernel final : public Kernel {
  public:
    GammaKernel(double nu, double lambda);
    double nu() const { return nu_; }
    double lambda() const { return lambda_; }

    std::string family() const override { return "gamma"; }
    double eval(double x) const override;
    double deriv(double x) const override;
    double l2_norm_sq() const override;
    double l2_tail_sq(double h) const override;
    double overlap(double h) const override;
    double int_g(double a, double b) const override;
    KernelRegularity regularity() const override;
    double truncation_horizon(double eps) const override;
    nlohmann::json to_json() const override;
    std::unique_ptr<Kernel> clone() const override;

  private:
    double nu_, lambda_, norm_;  // norm_ = lambda^{nu-1/2} / sqrt(Gamma(2nu-1))
};

// Hyperbolic kernel g(x) = sigma / (x + b): square-integrable but not
// integrable; produces the slowly decaying autocorrelation (b/h) ln(1 + h/b).
class HyperbolicKernel final : public Kernel {
  public:
    HyperbolicKernel(double sigma, double b);
    double sigma() const { return sigma_; }
    double b() const { return b_; }

    std::string family() const override { return "hyperbolic"; }
    double eval(double x) const override;
    double deriv(double x) const override;
    double l2_norm_sq() const override;
    double l2_tail_sq(double h) const override;
    double overlap(double h) const override;
    double int_g(double a, double b) const override;
    KernelRegularity regularity() const override;
    double truncation_horizon(double eps) const override;
    nlohmann::json to_json() const override;
    std::unique_ptr<Kernel> clone() const override;

  private:
    double sigma_, b_;
};

// CARMA(p,q) kernel g(x) = b' e^{Ax} e_p with A the companion matrix of
// z^p + a_1 z^{p-1} + ... + a_p and b = (b_0, ..., b_q, 0, ..)', b_q = 1.
// All eigenvalues of A must have negative real parts.
class CarmaKernel final : public Kernel {
  public:
    // a = (a_1..a_p), b = (b_0..b_q) with q < p and b_q = 1.
    CarmaKernel(std::vector<double> a, std::vector<double> b);
    const std::vector<double>& a() const { return a_; }
    const std::vector<double>& b() const { return b_; }
    int p() const { return static_cast<int>(a_.size()); }
    int q() const { return static_cast<int>(b_.size()) - 1; }

    std::string family() const override { return "carma"; }
    double eval(double x) const override;
    double deriv(double x) const override;
    double int_g(double a, double b) const override;
    KernelRegularity regularity() const override;
    double truncation_horizon(double eps) const override;
    nlohmann::json to_json() const override;
    std::unique_ptr<Kernel> clone() const override;

  private:
    std::vector<double> a_, b_;
    double slowest_decay_;  // min_i |Re lambda_i(A)|
};

// Two-argument kernel G(t,s) = g1(t) g2(s) for non-stationary
// moving-average processes; evaluation only.
class SeparableKernel {
  public:
    SeparableKernel(std::function<double(double)> g1,
                    std::function<double(double)> g2)
        : g1_(std::move(g1)), g2_(std::move(g2)) {}
    double eval_ts(double t, double s) const { return g1_(t) * g2_(s); }

  private:
    std::function<double(double)> g1_, g2_;
};

// Factory from a JSON spec, e.g. {"family":"gamma","nu":0.672,
// "lambda":0.055}, {"family":"ou","alpha":1.0}, {"family":"hyperbolic",
// "sigma":1.0,"b":1.0}, {"family":"carma","a":[2.0,1.0],"b":[0.5,1.0]}.
// Throws ConfigError on malformed input.
std::unique_ptr<Kernel> make_kernel(const nlohmann::json& spec);

} // namespace lssm
