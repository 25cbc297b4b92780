#pragma once

// Special functions used throughout the library: the gamma function, the
// modified Bessel function of the third kind K_nu (real order), and the gamma
// probability density.  All functions are pure and thread-safe.

namespace lssm::specfun {

// Gamma function via the Lanczos approximation (g = 7, 9 coefficients),
// accurate to ~1e-13 relative.  Throws MathError at poles (x = 0, -1, -2, ...).
double gamma_fn(double x);

// log Gamma(x) for x > 0.
double lgamma_fn(double x);

// Modified Bessel function of the third kind K_nu(x), x > 0, any real nu.
// Temme's series for x <= 2, Thompson-Barnett continued fractions above.
double bessel_k(double nu, double x);

// e^x K_nu(x); avoids underflow of the exponential tail for large x.
double bessel_k_scaled(double nu, double x);

// log K_nu(x); safe for small x where K_nu itself overflows.
double log_bessel_k(double nu, double x);

// Gamma probability density lambda^nu/Gamma(nu) * t^{nu-1} e^{-lambda t}.
// Throws MathError on nu <= 0 or lambda <= 0; returns +inf at t = 0 when
// nu < 1 (integrable singularity).
double gamma_density(double t, double nu, double lambda);

} // namespace lssm::specfun
