#include "lssm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <vector>

namespace lssm::quad {
namespace {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK dqk15).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Panel {
    double a, b;
    double integral;
    double error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

Panel evaluate_panel(const Fn& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double res_g = fc * kWg[3];
    double res_k = fc * kWgk[7];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const double f1 = f(c - dx);
        const double f2 = f(c + dx);
        res_k += kWgk[j] * (f1 + f2);
        if (j % 2 == 1) res_g += kWg[j / 2] * (f1 + f2);
    }
    res_g *= h;
    res_k *= h;
    // QUADPACK-style sharpened error estimate.
    double err = std::abs(res_k - res_g);
    if (err > 0.0) {
        const double scaled = std::pow(200.0 * err, 1.5);
        err = std::min(err, scaled);
    }
    return Panel{a, b, res_k, err};
}

Result adaptive(const Fn& f, double a, double b, double abs_tol,
                double rel_tol, int max_intervals) {
    std::priority_queue<Panel> heap;
    Panel p0 = evaluate_panel(f, a, b);
    double total = p0.integral;
    double err = p0.error;
    heap.push(p0);
    int n = 1;
    while (err > std::max(abs_tol, rel_tol * std::abs(total)) &&
           n < max_intervals) {
        Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {
            // Interval no longer splittable in double precision.
            heap.push(Panel{worst.a, worst.b, worst.integral, 0.0});
            continue;
        }
        Panel left = evaluate_panel(f, worst.a, mid);
        Panel right = evaluate_panel(f, mid, worst.b);
        total += left.integral + right.integral - worst.integral;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++n;
    }
    // Recompute error sum to avoid drift from cancellations.
    Result r;
    r.value = total;
    r.abs_error = err;
    r.intervals = n;
    r.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
    return r;
}

} // namespace

Result integrate(const Fn& f, double a, double b, double abs_tol,
                 double rel_tol, int max_intervals) {
    if (!(a < b)) {
        if (a == b) return Result{0.0, 0.0, 0, true};
        throw std::invalid_argument("quad::integrate: requires a <= b");
    }
    return adaptive(f, a, b, abs_tol, rel_tol, max_intervals);
}

Result integrate_to_inf(const Fn& f, double a, double abs_tol, double rel_tol,
                        int max_intervals) {
    // x = a + t/(1-t), dx = dt/(1-t)^2, t in (0,1).
    auto g = [&f, a](double t) {
        const double one_m = 1.0 - t;
        const double x = a + t / one_m;
        const double jac = 1.0 / (one_m * one_m);
        const double v = f(x) * jac;
        return std::isfinite(v) ? v : 0.0;
    };
    return adaptive(g, 0.0, 1.0, abs_tol, rel_tol, max_intervals);
}

namespace {

std::vector<double> legendre_nodes(int n) {
    // Newton iteration on P_n with the Tricomi initial guess.
    std::vector<double> x(static_cast<size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            const double dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[static_cast<size_t>(i)] = -z;
        x[static_cast<size_t>(n - 1 - i)] = z;
    }
    if (n % 2 == 1) x[static_cast<size_t>(n / 2)] = 0.0;
    return x;
}

struct GlRule {
    std::vector<double> nodes, weights;
};

const GlRule& rule_for(int n) {
    static std::map<int, GlRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lk(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    GlRule r;
    r.nodes = legendre_nodes(n);
    r.weights.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double z = r.nodes[static_cast<size_t>(i)];
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        const double dp = n * (z * p0 - p1) / (z * z - 1.0);
        r.weights[static_cast<size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

} // namespace

void gauss_legendre_rule(int n, const double** nodes, const double** weights) {
    if (n < 1) throw std::invalid_argument("gauss_legendre_rule: n >= 1");
    const GlRule& r = rule_for(n);
    *nodes = r.nodes.data();
    *weights = r.weights.data();
}

double gauss_legendre(const Fn& f, double a, double b, int n) {
    const double *x, *w;
    gauss_legendre_rule(n, &x, &w);
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w[i] * f(c + h * x[i]);
    return s * h;
}

} // namespace lssm::quad
