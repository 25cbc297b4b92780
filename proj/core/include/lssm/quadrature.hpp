#pragma once

#include <functional>

// Adaptive Gauss-Kronrod (G7/K15) quadrature plus fixed-order Gauss-Legendre
// panels.  Semi-infinite integrals are mapped to (0,1] with x = a + t/(1-t).

namespace lssm::quad {

struct Result {
    double value = 0.0;
    double abs_error = 0.0;   // estimated
    int intervals = 0;
    bool converged = false;
};

using Fn = std::function<double(double)>;

// Integrate f over [a, b] by adaptive bisection of G7/K15 panels until the
// summed error estimate falls below max(abs_tol, rel_tol*|integral|).
Result integrate(const Fn& f, double a, double b,
                 double abs_tol = 1e-12, double rel_tol = 1e-10,
                 int max_intervals = 4000);

// Integrate f over [a, +inf).  The integrand must decay at least like x^{-2}.
Result integrate_to_inf(const Fn& f, double a,
                        double abs_tol = 1e-12, double rel_tol = 1e-10,
                        int max_intervals = 4000);

// Fixed-order Gauss-Legendre panel on [a, b]; nodes/weights cached per n.
double gauss_legendre(const Fn& f, double a, double b, int n);

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
void gauss_legendre_rule(int n, const double** nodes, const double** weights);

} // namespace lssm::quad
