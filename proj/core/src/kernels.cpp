#include "lssm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <gsl/gsl_sf_gamma.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "lssm/errors.hpp"
#include "lssm/optim.hpp"
#include "lssm/quadrature.hpp"
#include "lssm/specfun.hpp"

namespace lssm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonneg_arg(double x, const char* who) {
    if (x < 0.0)
        throw MathError(std::string(who) + ": kernel argument must be >= 0");
}

double field_num(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw ConfigError(std::string("kernel spec: missing numeric field '") +
                          key + "'");
    return j.at(key).get<double>();
}

} // namespace

// ---------------------------------------------------------------- base class

double Kernel::l2_norm_sq() const {
    const double X = truncation_horizon(1e-12);
    auto f = [this](double x) {
        const double g = eval(x);
        return g * g;
    };
    auto r = quad::integrate(f, 0.0, X, 1e-14, 1e-11, 20000);
    if (!r.converged)
        throw MathError("kernel l2_norm_sq: quadrature failed to converge");
    return r.value;
}

double Kernel::l2_tail_sq(double h) const {
    require_nonneg_arg(h, "l2_tail_sq");
    const double X = truncation_horizon(1e-12);
    if (h >= X) return 0.0;
    auto f = [this](double x) {
        const double g = eval(x);
        return g * g;
    };
    auto r = quad::integrate(f, h, X, 1e-14, 1e-11, 20000);
    if (!r.converged)
        throw MathError("kernel l2_tail_sq: quadrature failed to converge");
    return r.value;
}

double Kernel::overlap(double h) const {
    require_nonneg_arg(h, "overlap");
    const double X = truncation_horizon(1e-12);
    auto f = [this, h](double x) { return eval(x + h) * eval(x); };
    auto r = quad::integrate(f, 0.0, X, 1e-14, 1e-11, 20000);
    if (!r.converged)
        throw MathError("kernel overlap: quadrature failed to converge");
    return r.value;
}

double Kernel::acf_zero_mean(double h) const {
    return overlap(h) / l2_norm_sq();
}

double Kernel::int_g(double a, double b) const {
    require_nonneg_arg(a, "int_g");
    if (b < a) throw MathError("int_g: requires b >= a");
    double hi = b;
    if (std::isinf(b)) {
        // Horizon where the kernel itself (not its square) is negligible.
        hi = truncation_horizon(1e-14);
        for (int i = 0; i < 60 && std::fabs(eval(hi)) > 1e-15; ++i) hi *= 2.0;
    }
    if (hi <= a) return 0.0;
    auto r = quad::integrate([this](double x) { return eval(x); }, a, hi,
                             1e-14, 1e-11, 20000);
    if (!r.converged)
        throw MathError("kernel int_g: quadrature failed to converge");
    return r.value;
}

double Kernel::truncation_horizon(double eps) const {
    auto g2 = [this](double x) {
        const double g = eval(x);
        return g * g;
    };
    double X = 1.0;
    double head = quad::integrate(g2, 0.0, X, 1e-14, 1e-10, 20000).value;
    for (int i = 0; i < 80; ++i) {
        const double tail = quad::integrate(g2, X, 2.0 * X, 1e-16, 1e-10,
                                            20000).value;
        if (tail <= 0.25 * eps * head && head > 0.0) return 2.0 * X;
        head += tail;
        X *= 2.0;
    }
    throw MathError("kernel truncation_horizon: tail does not decay");
}

// ------------------------------------------------------------- OU / exponential

OuKernel::OuKernel(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0)) throw ConfigError("ou kernel: requires alpha > 0");
}

double OuKernel::eval(double x) const {
    require_nonneg_arg(x, "ou eval");
    return std::exp(-alpha_ * x);
}

double OuKernel::deriv(double x) const {
    require_nonneg_arg(x, "ou deriv");
    return -alpha_ * std::exp(-alpha_ * x);
}

double OuKernel::l2_norm_sq() const { return 1.0 / (2.0 * alpha_); }

double OuKernel::l2_tail_sq(double h) const {
    require_nonneg_arg(h, "l2_tail_sq");
    return std::exp(-2.0 * alpha_ * h) / (2.0 * alpha_);
}

double OuKernel::overlap(double h) const {
    require_nonneg_arg(h, "overlap");
    return std::exp(-alpha_ * h) / (2.0 * alpha_);
}

double OuKernel::int_g(double a, double b) const {
    require_nonneg_arg(a, "int_g");
    if (b < a) throw MathError("int_g: requires b >= a");
    const double eb = std::isinf(b) ? 0.0 : std::exp(-alpha_ * b);
    return (std::exp(-alpha_ * a) - eb) / alpha_;
}

KernelRegularity OuKernel::regularity() const {
    return KernelRegularity{true, 1.0, true, true};
}

double OuKernel::truncation_horizon(double eps) const {
    return -std::log(eps) / (2.0 * alpha_);
}

nlohmann::json OuKernel::to_json() const {
    return {{"family", "ou"}, {"alpha", alpha_}};
}

std::unique_ptr<Kernel> OuKernel::clone() const {
    return std::make_unique<OuKernel>(alpha_);
}

// ----------------------------------------------------------------- gamma shape

GammaKernel::GammaKernel(double nu, double lambda) : nu_(nu), lambda_(lambda) {
    if (!(nu > 0.5))
        throw ConfigError("gamma kernel: requires nu > 1/2 (square "
                          "integrability at the origin)");
    if (!(lambda > 0.0)) throw ConfigError("gamma kernel: requires lambda > 0");
    norm_ = std::exp((nu_ - 0.5) * std::log(lambda_) -
                     0.5 * specfun::lgamma_fn(2.0 * nu_ - 1.0));
}

double GammaKernel::eval(double x) const {
    require_nonneg_arg(x, "gamma eval");
    if (x == 0.0) {
        if (nu_ < 1.0) return kInf;  // integrable singularity
        return nu_ == 1.0 ? norm_ : 0.0;
    }
    return norm_ * std::exp((nu_ - 1.0) * std::log(x) - 0.5 * lambda_ * x);
}

double GammaKernel::deriv(double x) const {
    require_nonneg_arg(x, "gamma deriv");
    if (x == 0.0) {
        if (nu_ == 1.0) return -0.5 * lambda_ * norm_;
        if (nu_ == 2.0) return norm_;
        if (nu_ > 2.0) return 0.0;
        return nu_ > 1.0 ? kInf : -kInf;
    }
    return norm_ * std::exp((nu_ - 2.0) * std::log(x) - 0.5 * lambda_ * x) *
           ((nu_ - 1.0) - 0.5 * lambda_ * x);
}

double GammaKernel::l2_norm_sq() const {
    // g^2 is exactly the Gamma(2nu-1, lambda) probability density.
    return 1.0;
}

double GammaKernel::l2_tail_sq(double h) const {
    require_nonneg_arg(h, "l2_tail_sq");
    if (h == 0.0) return 1.0;
    return gsl_sf_gamma_inc_Q(2.0 * nu_ - 1.0, lambda_ * h);
}

double GammaKernel::overlap(double h) const {
    require_nonneg_arg(h, "overlap");
    if (h == 0.0) return 1.0;
    // Bessel closed form: (u^{nu-1/2} K_{nu-1/2}(u)) / (2^{nu-3/2}
    // Gamma(nu-1/2)) with u = lambda h / 2; evaluated via the scaled Bessel
    // function so that deep tails underflow gracefully.
    const double u = 0.5 * lambda_ * h;
    const double m = nu_ - 0.5;
    const double log_num =
        m * std::log(u) + std::log(specfun::bessel_k_scaled(m, u)) - u;
    const double log_den =
        (nu_ - 1.5) * std::log(2.0) + specfun::lgamma_fn(m);
    return std::exp(log_num - log_den);
}

double GammaKernel::int_g(double a, double b) const {
    require_nonneg_arg(a, "int_g");
    if (b < a) throw MathError("int_g: requires b >= a");
    // int x^{nu-1} e^{-lambda x/2} = (2/lambda)^nu Gamma(nu) P(nu, lambda x/2).
    const double pb =
        std::isinf(b) ? 1.0 : gsl_sf_gamma_inc_P(nu_, 0.5 * lambda_ * b);
    const double pa = a == 0.0 ? 0.0 : gsl_sf_gamma_inc_P(nu_, 0.5 * lambda_ * a);
    const double scale = norm_ * std::exp(specfun::lgamma_fn(nu_) -
                                          nu_ * std::log(0.5 * lambda_));
    return scale * (pb - pa);
}

KernelRegularity GammaKernel::regularity() const {
    KernelRegularity r;
    r.g0_finite = nu_ >= 1.0;
    r.g0 = r.g0_finite ? eval(0.0) : kInf;
    r.derivative_sq_integrable = (nu_ > 1.5) || (nu_ == 1.0);
    r.l2_integrable = true;
    return r;
}

double GammaKernel::truncation_horizon(double eps) const {
    const double shape = 2.0 * nu_ - 1.0;
    double hi = (shape + 10.0) / lambda_;
    while (gsl_sf_gamma_inc_Q(shape, lambda_ * hi) > eps) hi *= 2.0;
    auto f = [&](double x) {
        return gsl_sf_gamma_inc_Q(shape, lambda_ * x) - eps;
    };
    return optim::bisect(f, 1e-12 / lambda_, hi, 1e-10 * hi);
}

nlohmann::json GammaKernel::to_json() const {
    return {{"family", "gamma"}, {"nu", nu_}, {"lambda", lambda_}};
}

std::unique_ptr<Kernel> GammaKernel::clone() const {
    return std::make_unique<GammaKernel>(nu_, lambda_);
}

// ------------------------------------------------------------------ hyperbolic

HyperbolicKernel::HyperbolicKernel(double sigma, double b)
    : sigma_(sigma), b_(b) {
    if (!(sigma > 0.0) || !(b > 0.0))
        throw ConfigError("hyperbolic kernel: requires sigma > 0 and b > 0");
}

double HyperbolicKernel::eval(double x) const {
    require_nonneg_arg(x, "hyperbolic eval");
    return sigma_ / (x + b_);
}

double HyperbolicKernel::deriv(double x) const {
    require_nonneg_arg(x, "hyperbolic deriv");
    return -sigma_ / ((x + b_) * (x + b_));
}

double HyperbolicKernel::l2_norm_sq() const { return sigma_ * sigma_ / b_; }

double HyperbolicKernel::l2_tail_sq(double h) const {
    require_nonneg_arg(h, "l2_tail_sq");
    return sigma_ * sigma_ / (h + b_);
}

double HyperbolicKernel::overlap(double h) const {
    require_nonneg_arg(h, "overlap");
    if (h == 0.0) return l2_norm_sq();
    return sigma_ * sigma_ / h * std::log1p(h / b_);
}

double HyperbolicKernel::int_g(double a, double b) const {
    require_nonneg_arg(a, "int_g");
    if (b < a) throw MathError("int_g: requires b >= a");
    if (std::isinf(b)) return kInf;  // g is L2 but not L1
    return sigma_ * std::log((b + b_) / (a + b_));
}

KernelRegularity HyperbolicKernel::regularity() const {
    return KernelRegularity{true, sigma_ / b_, true, true};
}

double HyperbolicKernel::truncation_horizon(double eps) const {
    return b_ * (1.0 / eps - 1.0);
}

nlohmann::json HyperbolicKernel::to_json() const {
    return {{"family", "hyperbolic"}, {"sigma", sigma_}, {"b", b_}};
}

std::unique_ptr<Kernel> HyperbolicKernel::clone() const {
    return std::make_unique<HyperbolicKernel>(sigma_, b_);
}

// ----------------------------------------------------------------------- CARMA

namespace {

Eigen::MatrixXd companion(const std::vector<double>& a) {
    const int p = static_cast<int>(a.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i + 1 < p; ++i) A(i, i + 1) = 1.0;
    for (int j = 0; j < p; ++j) A(p - 1, j) = -a[static_cast<size_t>(p - 1 - j)];
    return A;
}

Eigen::VectorXd embed_b(const std::vector<double>& b, int p) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
    for (size_t i = 0; i < b.size(); ++i)
        v(static_cast<int>(i)) = b[i];
    return v;
}

} // namespace

CarmaKernel::CarmaKernel(std::vector<double> a, std::vector<double> b)
    : a_(std::move(a)), b_(std::move(b)) {
    const int p = static_cast<int>(a_.size());
    const int q = static_cast<int>(b_.size()) - 1;
    if (p < 1) throw ConfigError("carma kernel: requires p >= 1");
    if (q < 0 || q >= p)
        throw ConfigError("carma kernel: requires 0 <= q < p");
    if (b_.back() != 1.0)
        throw ConfigError("carma kernel: leading moving-average coefficient "
                          "b_q must equal 1");
    const Eigen::MatrixXd A = companion(a_);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, /*computeEigenvectors=*/false);
    slowest_decay_ = kInf;
    for (int i = 0; i < p; ++i) {
        const double re = es.eigenvalues()(i).real();
        if (re >= 0.0)
            throw ConfigError("carma kernel: autoregressive polynomial must "
                              "have all roots with negative real part");
        slowest_decay_ = std::min(slowest_decay_, -re);
    }
}

double CarmaKernel::eval(double x) const {
    require_nonneg_arg(x, "carma eval");
    const int p = static_cast<int>(a_.size());
    const Eigen::MatrixXd E = (companion(a_) * x).exp();
    const Eigen::VectorXd bv = embed_b(b_, p);
    return bv.dot(E.col(p - 1));
}

double CarmaKernel::deriv(double x) const {
    require_nonneg_arg(x, "carma deriv");
    const int p = static_cast<int>(a_.size());
    const Eigen::MatrixXd A = companion(a_);
    const Eigen::MatrixXd E = (A * x).exp();
    const Eigen::VectorXd bv = embed_b(b_, p);
    return bv.dot((A * E).col(p - 1));
}

double CarmaKernel::int_g(double a, double b) const {
    require_nonneg_arg(a, "int_g");
    if (b < a) throw MathError("int_g: requires b >= a");
    const int p = static_cast<int>(a_.size());
    const Eigen::MatrixXd A = companion(a_);
    const Eigen::VectorXd bv = embed_b(b_, p);
    Eigen::VectorXd ep = Eigen::VectorXd::Zero(p);
    ep(p - 1) = 1.0;
    const Eigen::VectorXd va = (A * a).exp() * ep;
    const Eigen::VectorXd vb =
        std::isinf(b) ? Eigen::VectorXd::Zero(p).eval()
                      : Eigen::VectorXd((A * b).exp() * ep);
    // int_a^b e^{Ax} dx e_p = A^{-1} (e^{Ab} - e^{Aa}) e_p.
    const Eigen::VectorXd y = A.partialPivLu().solve(vb - va);
    return bv.dot(y);
}

KernelRegularity CarmaKernel::regularity() const {
    KernelRegularity r;
    r.g0_finite = true;
    // g(0) = b' e_p = b_{p-1}: equals b_q = 1 when q = p-1, else 0.
    r.g0 = (b_.size() == a_.size()) ? b_.back() : 0.0;
    r.derivative_sq_integrable = true;  // smooth with exponential decay
    r.l2_integrable = true;
    return r;
}

double CarmaKernel::truncation_horizon(double eps) const {
    auto g2 = [this](double x) {
        const double g = eval(x);
        return g * g;
    };
    double X = std::max(1.0, -std::log(0.01 * eps) / (2.0 * slowest_decay_));
    double head = quad::integrate(g2, 0.0, X, 1e-15, 1e-10, 20000).value;
    for (int i = 0; i < 60; ++i) {
        const double tail =
            quad::integrate(g2, X, 2.0 * X, 1e-16, 1e-10, 20000).value;
        if (head > 0.0 && tail <= 0.25 * eps * head) return 2.0 * X;
        head += tail;
        X *= 2.0;
    }
    throw MathError("carma truncation_horizon: tail does not decay");
}

nlohmann::json CarmaKernel::to_json() const {
    return {{"family", "carma"}, {"a", a_}, {"b", b_}};
}

std::unique_ptr<Kernel> CarmaKernel::clone() const {
    return std::make_unique<CarmaKernel>(a_, b_);
}

// --------------------------------------------------------------------- factory

std::unique_ptr<Kernel> make_kernel(const nlohmann::json& spec) {
    if (!spec.is_object() || !spec.contains("family") ||
        !spec.at("family").is_string())
        throw ConfigError("kernel spec: expected an object with a 'family' "
                          "string field");
    const std::string fam = spec.at("family").get<std::string>();
    if (fam == "ou") return std::make_unique<OuKernel>(field_num(spec, "alpha"));
    if (fam == "gamma")
        return std::make_unique<GammaKernel>(field_num(spec, "nu"),
                                             field_num(spec, "lambda"));
    if (fam == "hyperbolic")
        return std::make_unique<HyperbolicKernel>(field_num(spec, "sigma"),
                                                  field_num(spec, "b"));
    if (fam == "carma") {
        if (!spec.contains("a") || !spec.at("a").is_array() ||
            !spec.contains("b") || !spec.at("b").is_array())
            throw ConfigError("carma kernel spec: requires arrays 'a' and 'b'");
        return std::make_unique<CarmaKernel>(
            spec.at("a").get<std::vector<double>>(),
            spec.at("b").get<std::vector<double>>());
    }
    throw ConfigError("kernel spec: unknown family '" + fam + "'");
}

} // namespace lssm
