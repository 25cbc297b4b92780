#pragma once

// Internal quadrature helpers shared by the forward and option pricers.
// Not part of the installed API.

#include <algorithm>
#include <cmath>

#include "lssm/kernels.hpp"
#include "lssm/quadrature.hpp"

namespace lssm::detail {

// Gauss-Legendre with doubling node counts until 1e-8 relative stability.
inline double gl_stable(const quad::Fn& f, double a, double b) {
    if (!(b > a)) return 0.0;
    double prev = quad::gauss_legendre(f, a, b, 128);
    for (int n = 256; n <= 4096; n *= 2) {
        const double cur = quad::gauss_legendre(f, a, b, n);
        if (std::abs(cur - prev) <= 1e-8 * std::max(1.0, std::abs(cur)))
            return cur;
        prev = cur;
    }
    return prev;
}

// int_0^h g(x)^2 e^{-lambda (h - x)} dx; adaptive quadrature when g has an
// integrable singularity at 0 (the fixed-order rule does not resolve it).
inline double exp_smoothed_l2(const Kernel& g, double lambda, double h) {
    if (!(h > 0.0)) return 0.0;
    const auto f = [&](double x) {
        const double v = g.eval(x);
        return v * v * std::exp(-lambda * (h - x));
    };
    if (!g.regularity().g0_finite) {
        auto r = quad::integrate(f, 0.0, h, 1e-12, 1e-9);
        return r.value;
    }
    return gl_stable(f, 0.0, h);
}

// int_a^b g(x)^2 dx via the closed-form tail norms.
inline double kernel_l2_segment(const Kernel& g, double a, double b) {
    if (!(b > a)) return 0.0;
    if (a == 0.0) return g.l2_norm_sq() - g.l2_tail_sq(b);
    return g.l2_tail_sq(a) - g.l2_tail_sq(b);
}

} // namespace lssm::detail
