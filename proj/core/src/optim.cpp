#include "lssm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lssm::optim {
namespace {

double guarded(const ObjFn& f, const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

} // namespace

NmResult nelder_mead(const ObjFn& f, std::vector<double> x0,
                     const NmOptions& opt) {
    const size_t n = x0.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");

    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (size_t i = 0; i < n; ++i) {
        double& xi = simplex[i + 1][i];
        xi += (xi != 0.0) ? opt.init_step * xi : opt.init_step;
    }
    std::vector<double> fv(n + 1);
    for (size_t i = 0; i <= n; ++i) fv[i] = guarded(f, simplex[i]);

    std::vector<size_t> order(n + 1);
    NmResult res;
    int iter = 0;
    for (; iter < opt.max_iter; ++iter) {
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(),
                  [&fv](size_t a, size_t b) { return fv[a] < fv[b]; });
        const size_t best = order[0], worst = order[n], second = order[n - 1];

        double diam = 0.0;
        for (size_t i = 0; i < n; ++i)
            diam = std::max(diam, std::abs(simplex[worst][i] - simplex[best][i]));
        const double fspread = std::abs(fv[worst] - fv[best]);
        if ((fspread <= opt.f_tol * (std::abs(fv[best]) + opt.f_tol) &&
             diam <= opt.x_tol * (1.0 + std::abs(simplex[best][0]))) ||
            (std::isfinite(fv[best]) && diam <= 1e-14)) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k];
        }
        for (size_t k = 0; k < n; ++k) centroid[k] /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (size_t k = 0; k < n; ++k)
                p[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
            return p;
        };

        std::vector<double> xr = blend(-1.0);
        const double fr = guarded(f, xr);
        if (fr < fv[best]) {
            std::vector<double> xe = blend(-2.0);
            const double fe = guarded(f, xe);
            if (fe < fr) {
                simplex[worst] = std::move(xe);
                fv[worst] = fe;
            } else {
                simplex[worst] = std::move(xr);
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            simplex[worst] = std::move(xr);
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            std::vector<double> xc = blend(outside ? -0.5 : 0.5);
            const double fc = guarded(f, xc);
            if (fc < std::min(fr, fv[worst])) {
                simplex[worst] = std::move(xc);
                fv[worst] = fc;
            } else {
                for (size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (size_t k = 0; k < n; ++k)
                        simplex[i][k] =
                            0.5 * (simplex[i][k] + simplex[best][k]);
                    fv[i] = guarded(f, simplex[i]);
                }
            }
        }
    }

    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&fv](size_t a, size_t b) { return fv[a] < fv[b]; });
    res.x = simplex[order[0]];
    res.fval = fv[order[0]];
    res.iterations = iter;
    return res;
}

NmResult nelder_mead_restarted(const ObjFn& f, std::vector<double> x0,
                               int restarts, const NmOptions& opt) {
    NmResult best = nelder_mead(f, std::move(x0), opt);
    for (int r = 1; r < restarts; ++r) {
        NmResult next = nelder_mead(f, best.x, opt);
        next.iterations += best.iterations;
        if (next.fval >= best.fval - 1e-14 * (1.0 + std::abs(best.fval))) {
            next.converged = next.converged || best.converged;
            return next.fval < best.fval ? next : best;
        }
        best = std::move(next);
    }
    return best;
}

double bisect(const std::function<double(double)>& f, double lo, double hi,
              double x_tol, int max_iter) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("bisect: interval does not bracket a root");
    for (int i = 0; i < max_iter && hi - lo > x_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  double x_tol, int max_iter) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < max_iter && (b - a) > x_tol; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

} // namespace lssm::optim
