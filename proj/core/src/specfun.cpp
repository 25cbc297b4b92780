#include "lssm/specfun.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lssm/errors.hpp"

namespace lssm::specfun {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kEulerGamma = 0.577215664901532860606512090082402431;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Lanczos (g = 7, 9 terms): Gamma(z) = sqrt(2 pi) t^{z-1/2} e^{-t} A(z),
// t = z + 6.5, for z >= 0.5; reflection below.
constexpr double kLanczos[9] = {
    0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
    771.32342877765313,       -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_sum(double z) {
    double a = kLanczos[0];
    for (int i = 1; i < 9; ++i) a += kLanczos[i] / (z - 1.0 + i);
    return a;
}

bool is_nonpositive_integer(double x) {
    return x <= 0.0 && x == std::floor(x);
}

// 1/Gamma(1-mu) and 1/Gamma(1+mu) and the Temme auxiliary combinations
//   gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu),
//   gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2,
// stable for |mu| <= 1/2 including mu -> 0.
void temme_gammas(double mu, double& gam1, double& gam2, double& one_over_gp,
                  double& one_over_gm) {
    const long double gm = 1.0L / std::tgammal(1.0L - (long double)mu);
    const long double gp = 1.0L / std::tgammal(1.0L + (long double)mu);
    one_over_gm = static_cast<double>(gm);
    one_over_gp = static_cast<double>(gp);
    if (std::fabs(mu) < 1e-8) {
        gam1 = -kEulerGamma;
    } else {
        gam1 = static_cast<double>((gm - gp) / (2.0L * (long double)mu));
    }
    gam2 = static_cast<double>((gm + gp) / 2.0L);
}

// Temme's series for K_mu(x), K_{mu+1}(x), |mu| <= 1/2, 0 < x <= 2.
void bessel_k_temme(double mu, double x, double& kmu, double& kmu1) {
    const double x1 = 0.5 * x;
    const double mu2 = mu * mu;
    const double pimu = kPi * mu;
    const double fact = (std::fabs(pimu) < kEps) ? 1.0 : pimu / std::sin(pimu);
    const double d = -std::log(x1);
    const double e = mu * d;
    const double fact2 = (std::fabs(e) < kEps) ? 1.0 : std::sinh(e) / e;
    double gam1, gam2, inv_gp, inv_gm;
    temme_gammas(mu, gam1, gam2, inv_gp, inv_gm);
    double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    double sum = ff;
    const double ee = std::exp(e);
    double p = 0.5 * ee / inv_gp;  // = Gamma(1+mu) e^{mu d} / 2
    double q = 0.5 / (ee * inv_gm);
    double c = 1.0;
    const double d2 = x1 * x1;
    double sum1 = p;
    for (int i = 1; i < 1000; ++i) {
        ff = (i * ff + p + q) / (i * i - mu2);
        c *= d2 / i;
        p /= (i - mu);
        q /= (i + mu);
        const double del = c * ff;
        sum += del;
        const double del1 = c * (p - i * ff);
        sum1 += del1;
        if (std::fabs(del) < std::fabs(sum) * kEps) {
            kmu = sum;
            kmu1 = sum1 * (2.0 / x);
            return;
        }
    }
    throw MathError("bessel_k: Temme series failed to converge");
}

// Thompson-Barnett CF2 for K_mu(x) e^{x}, K_{mu+1}(x) e^{x}; x > 2.
void bessel_k_cf2_scaled(double mu, double x, double& kmu, double& kmu1) {
    const double mu2 = mu * mu;
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d, delh = d;
    double q1 = 0.0, q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1, c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    bool ok = false;
    for (int i = 2; i < 10000; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::fabs(dels / s) < kEps) {
            ok = true;
            break;
        }
    }
    if (!ok) throw MathError("bessel_k: continued fraction failed to converge");
    h = a1 * h;
    kmu = std::sqrt(kPi / (2.0 * x)) / s;  // e^x K_mu(x)
    kmu1 = kmu * (mu + x + 0.5 - h) / x;
}

// Scaled e^x K_nu(x) for nu >= 0, x > 0.
double bessel_k_scaled_impl(double nu, double x) {
    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;  // in [-1/2, 1/2]
    double kmu, kmu1;
    if (x <= 2.0) {
        bessel_k_temme(mu, x, kmu, kmu1);
        const double scale = std::exp(x);
        kmu *= scale;
        kmu1 *= scale;
    } else {
        bessel_k_cf2_scaled(mu, x, kmu, kmu1);
    }
    // Upward recurrence K_{m+1} = K_{m-1} + (2m/x) K_m.
    for (int i = 1; i <= nl; ++i) {
        const double knext = kmu + (2.0 * (mu + i) / x) * kmu1;
        kmu = kmu1;
        kmu1 = knext;
    }
    return kmu;
}

} // namespace

double gamma_fn(double x) {
    if (is_nonpositive_integer(x))
        throw MathError("gamma_fn: pole at x = " + std::to_string(x));
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        return kPi / (std::sin(kPi * x) * gamma_fn(1.0 - x));
    }
    const double t = x + 6.5;
    return std::sqrt(2.0 * kPi) * std::pow(t, x - 0.5) * std::exp(-t) *
           lanczos_sum(x);
}

double lgamma_fn(double x) {
    if (x <= 0.0)
        throw MathError("lgamma_fn: requires x > 0, got " + std::to_string(x));
    if (x < 0.5) return std::log(kPi / std::sin(kPi * x)) - lgamma_fn(1.0 - x);
    const double t = x + 6.5;
    return 0.5 * std::log(2.0 * kPi) + (x - 0.5) * std::log(t) - t +
           std::log(lanczos_sum(x));
}

double bessel_k(double nu, double x) {
    if (!(x > 0.0))
        throw MathError("bessel_k: requires x > 0, got " + std::to_string(x));
    const double n = std::fabs(nu);  // K_{-nu} = K_nu
    if (x <= 2.0) {
        const int nl = static_cast<int>(n + 0.5);
        const double mu = n - nl;
        double kmu, kmu1;
        bessel_k_temme(mu, x, kmu, kmu1);
        for (int i = 1; i <= nl; ++i) {
            const double knext = kmu + (2.0 * (mu + i) / x) * kmu1;
            kmu = kmu1;
            kmu1 = knext;
        }
        return kmu;
    }
    return bessel_k_scaled_impl(n, x) * std::exp(-x);
}

double bessel_k_scaled(double nu, double x) {
    if (!(x > 0.0))
        throw MathError("bessel_k_scaled: requires x > 0, got " +
                        std::to_string(x));
    return bessel_k_scaled_impl(std::fabs(nu), x);
}

double log_bessel_k(double nu, double x) {
    if (!(x > 0.0))
        throw MathError("log_bessel_k: requires x > 0, got " +
                        std::to_string(x));
    const double n = std::fabs(nu);
    const double scaled = bessel_k_scaled_impl(n, x);
    if (std::isfinite(scaled) && scaled > 0.0) return std::log(scaled) - x;
    // Small-x overflow guard: K_nu(x) ~ Gamma(nu)/2 (2/x)^nu for x << 1.
    if (n > 0.0) return lgamma_fn(n) - std::log(2.0) + n * std::log(2.0 / x);
    return std::log(-std::log(0.5 * x) - kEulerGamma);
}

double gamma_density(double t, double nu, double lambda) {
    if (!(nu > 0.0) || !(lambda > 0.0))
        throw MathError("gamma_density: requires nu > 0 and lambda > 0");
    if (t < 0.0)
        throw MathError("gamma_density: requires t >= 0");
    if (t == 0.0) {
        if (nu < 1.0) return std::numeric_limits<double>::infinity();
        return nu == 1.0 ? lambda : 0.0;
    }
    return std::exp(nu * std::log(lambda) + (nu - 1.0) * std::log(t) -
                    lambda * t - lgamma_fn(nu));
}

} // namespace lssm::specfun
