#pragma once

#include <functional>
#include <vector>

// Small derivative-free optimisation toolbox: Nelder-Mead simplex for the
// low-dimensional likelihood / least-squares fits, plus 1-d root bracketing.

namespace lssm::optim {

struct NmOptions {
    int max_iter = 4000;
    double f_tol = 1e-12;   // spread of simplex function values
    double x_tol = 1e-10;   // simplex diameter
    double init_step = 0.25; // relative displacement used to seed the simplex
};

struct NmResult {
    std::vector<double> x;
    double fval = 0.0;
    int iterations = 0;
    bool converged = false;
};

using ObjFn = std::function<double(const std::vector<double>&)>;

// Standard Nelder-Mead (reflect 1, expand 2, contract 1/2, shrink 1/2).
// Non-finite objective values are treated as +inf, so callers may impose
// parameter constraints by returning infinity outside the feasible set.
NmResult nelder_mead(const ObjFn& f, std::vector<double> x0,
                     const NmOptions& opt = {});

// Restarted Nelder-Mead: re-seeds the simplex at the incumbent a few times,
// which makes the 3-4 parameter fits far less sensitive to the start point.
NmResult nelder_mead_restarted(const ObjFn& f, std::vector<double> x0,
                               int restarts = 3, const NmOptions& opt = {});

// Bisection for f(x) = 0 on a bracketing interval [lo, hi]; requires a sign
// change.  Returns the midpoint of the final bracket.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double x_tol = 1e-12, int max_iter = 200);

// Golden-section minimisation of a unimodal 1-d function on [lo, hi].
double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  double x_tol = 1e-10, int max_iter = 300);

} // namespace lssm::optim
