#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "lssm/errors.hpp"
#include "lssm/kernels.hpp"
#include "lssm/levy.hpp"
#include "lssm/lss.hpp"
#include "lssm/quadrature.hpp"
#include "lssm/volatility.hpp"

using namespace lssm;

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (const double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() - 1);
}

double corr_of(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> column(const SimResult& r, std::size_t k) {
    std::vector<double> out(r.paths.size());
    for (std::size_t i = 0; i < r.paths.size(); ++i) out[i] = r.paths[i][k];
    return out;
}

LssProcess make_ou_bm(double alpha, double b, double mu = 0.0,
                      double c = 1.0) {
    LssProcess p;
    p.mu = mu;
    p.g = std::make_shared<OuKernel>(alpha);
    p.driver = LevyModel::brownian(0.0, b);
    p.vol = VolatilityModel::constant(c);
    return p;
}

// window cells used by the conditional-moment quadrature (mirrors the
// documented truncation rule)
std::size_t window_cells(const LssProcess& p, double dt, double eps) {
    double t = p.g->truncation_horizon(eps);
    if (p.q) t = std::max(t, p.q->truncation_horizon(eps));
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(t / dt * (1.0 - 1e-12))));
}

// Riemann-sum oracle at resolution dt/10 against the step-interpolated
// volatility path: integrates f(x) * h(omega^2 at time t-x) over the same
// truncated window the implementation uses.
double riemann_oracle(const std::function<double(double)>& f,
                      const std::function<double(double)>& h,
                      const std::vector<double>& w2, double dt,
                      std::size_t m_w) {
    const double fine = dt / 10.0;
    const std::size_t last = w2.size() - 1;
    double acc = 0.0;
    for (std::size_t j = 0; j < 10 * m_w; ++j) {
        const double x = (static_cast<double>(j) + 0.5) * fine;
        const std::size_t m = j / 10 + 1;
        acc += f(x) * h(w2[last - m]) * fine;
    }
    return acc;
}

} // namespace

TEST_CASE("process and config validation") {
    LssProcess p = make_ou_bm(1.0, 1.0);
    CHECK_NOTHROW(p.validate());

    LssProcess no_kernel;
    CHECK_THROWS_AS(no_kernel.validate(), ConfigError);

    LssProcess dfv = make_ou_bm(1.0, 1.0);
    dfv.drift_from_vol = true;  // no q kernel
    CHECK_THROWS_AS(dfv.validate(), ConfigError);

    SimConfig c;
    c.dt = 0.5;
    c.horizon = 0.4;  // dt >= horizon
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.horizon = 1.0;
    c.n_paths = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.n_paths = 1;
    c.truncation_eps = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.truncation_eps = 1e-6;
    CHECK_NOTHROW(c.validate());

    const GridInfo gi = sim_grid(p, SimConfig{0.01, 2.0, 1e-6, 1, 1});
    CHECK(gi.n_steps == 200);
    CHECK(gi.t_tr == doctest::Approx(-std::log(1e-6) / 2.0));
    CHECK(gi.window_cells ==
          static_cast<std::size_t>(std::ceil(gi.t_tr / 0.01)));
}

TEST_CASE("gamma probability-density kernel for drift channels") {
    const auto q = make_gamma_density_kernel(1.5, 2.0);
    // density integrates to one
    CHECK(q->int_g(0.0, std::numeric_limits<double>::infinity()) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // matches the closed-form density
    const double x = 0.73;
    const double want = std::pow(2.0, 1.5) / std::tgamma(1.5) *
                        std::sqrt(x) * std::exp(-2.0 * x);
    CHECK(q->eval(x) == doctest::Approx(want).epsilon(1e-12));
    // L2 norm against quadrature
    const auto qq = [&](double t) { return q->eval(t) * q->eval(t); };
    const auto r = quad::integrate_to_inf(qq, 0.0, 1e-12, 1e-10, 8000);
    CHECK(r.converged);
    CHECK(q->l2_norm_sq() == doctest::Approx(r.value).epsilon(1e-8));
    // L1 truncation horizon leaves eps tail mass
    const double T = q->truncation_horizon(1e-4);
    CHECK(q->int_g(T, std::numeric_limits<double>::infinity()) ==
          doctest::Approx(1e-4).epsilon(1e-6));
    // singular-at-zero densities report infinite g(0+)
    const auto qs = make_gamma_density_kernel(0.344, 0.055);
    CHECK(qs->regularity().g0_finite == false);
    CHECK(std::isinf(qs->eval(0.0)));
    CHECK_THROWS_AS(make_gamma_density_kernel(0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(make_gamma_density_kernel(1.0, -2.0), ConfigError);
}

TEST_CASE("integrability report: closed-form values and drift split") {
    // exponential kernel, Brownian driver: Gaussian part b/(2 alpha)
    LssProcess p = make_ou_bm(2.0, 3.0);
    const auto rep = check_integrability(p);
    CHECK(rep.gaussian_part.pass);
    CHECK(rep.gaussian_part.value == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(rep.square_integrability.pass);
    CHECK(rep.square_integrability.value ==
          doctest::Approx(0.25).epsilon(1e-12));
    CHECK_FALSE(rep.drift_split.applies);
    CHECK(rep.pass());

    // slow-decay kernel with finite-mean subordinator volatility:
    // sigma^2/b * E[omega^2]
    LssProcess pb;
    pb.g = std::make_shared<HyperbolicKernel>(1.2, 0.8);
    pb.driver = LevyModel::brownian(0.0, 1.0);
    pb.vol = VolatilityModel::bns_ou(1.0, LevyModel::gamma_subordinator(2.0, 4.0));
    const auto repb = check_integrability(pb);
    CHECK(repb.square_integrability.pass);
    CHECK(repb.square_integrability.value ==
          doctest::Approx(1.44 / 0.8 * 0.5).epsilon(1e-10));
    CHECK(repb.pass());

    // singular gamma-density drift kernel satisfies the split condition
    LssProcess pd = make_ou_bm(1.0, 1.0);
    pd.q = make_gamma_density_kernel(0.344, 0.055);
    pd.drift_from_vol = true;
    pd.gamma_skew = 0.2;
    const auto repd = check_integrability(pd);
    CHECK(repd.drift_split.applies);
    CHECK(repd.drift_split.pass);

    // a drift kernel decaying like 1/x admits no split exponent
    LssProcess ph = make_ou_bm(1.0, 1.0);
    ph.q = std::make_shared<HyperbolicKernel>(1.0, 1.0);
    const auto reph = check_integrability(ph);
    CHECK(reph.drift_split.applies);
    CHECK_FALSE(reph.drift_split.pass);
    CHECK_FALSE(reph.pass());
}

TEST_CASE("simulation reproduces the stationary variance and mean") {
    // exponential kernel + Brownian driver + unit volatility: stationary
    // variance b/(2 alpha) = 1/2 at every grid time
    LssProcess p = make_ou_bm(1.0, 1.0, 0.7);
    p.driver = LevyModel::nig(3.0, 0.0, 0.0, 1.0);  // centred: kappa1 = 0
    SimConfig c;
    c.dt = 0.01;
    c.horizon = 2.0;
    c.n_paths = 4000;
    c.seed = 77;
    const SimResult r = simulate(p, c);
    REQUIRE(r.paths.size() == 4000);
    REQUIRE(r.times.size() == 201);
    CHECK(r.times[1] == doctest::Approx(0.01));

    const double k2 = p.driver.kappa2();
    const double var_want = k2 * 0.5;
    const double se_var = var_want * std::sqrt(2.0 / 3999.0);
    const double se_mean = std::sqrt(var_want / 4000.0);

    const std::vector<double> y_end = column(r, 200);
    const std::vector<double> y_mid = column(r, 100);
    // centred driver: sample mean -> mu
    CHECK(std::abs(mean_of(y_end) - 0.7) <= 4.0 * se_mean);
    CHECK(std::abs(var_of(y_end) - var_want) <= 4.0 * se_var);
    // stationarity: the same law at interior times
    CHECK(std::abs(mean_of(y_mid) - 0.7) <= 4.0 * se_mean);
    CHECK(std::abs(var_of(y_mid) - var_want) <= 4.0 * se_var);

    // Brownian driver variant hits the closed-form 1/(2 alpha) b
    LssProcess pb = make_ou_bm(1.0, 1.0);
    SimConfig cb = c;
    cb.n_paths = 4000;
    cb.seed = 31;
    const SimResult rb = simulate(pb, cb);
    const std::vector<double> yb = column(rb, 200);
    CHECK(std::abs(var_of(yb) - 0.5) <= 4.0 * 0.5 * std::sqrt(2.0 / 3999.0));
    CHECK(std::abs(mean_of(yb)) <= 4.0 * std::sqrt(0.5 / 4000.0));
}

TEST_CASE("simulation determinism and stream layout") {
    LssProcess p = make_ou_bm(1.5, 0.8, 0.2);
    SimConfig c;
    c.dt = 0.05;
    c.horizon = 0.5;
    c.n_paths = 5;
    c.seed = 1234;

    const SimResult a = simulate(p, c);
    const SimResult b = simulate(p, c);
    REQUIRE(a.paths.size() == b.paths.size());
    for (std::size_t i = 0; i < a.paths.size(); ++i)
        CHECK(a.paths[i] == b.paths[i]);  // bit-identical

    SimConfig c2 = c;
    c2.seed = 4321;
    const SimResult d = simulate(p, c2);
    CHECK(a.paths[0] != d.paths[0]);

    // adding paths never perturbs existing ones
    SimConfig c3 = c;
    c3.n_paths = 3;
    const SimResult e = simulate(p, c3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(e.paths[i] == a.paths[i]);

    // the detailed single path coincides with path 0 (Brownian driver)
    const PathDetail pd = simulate_detail(p, c);
    CHECK(pd.y == a.paths[0]);
    CHECK(pd.omega_sq.size() == pd.pre_steps + 10);
    CHECK(pd.dl.size() == pd.omega_sq.size());
    CHECK(pd.d_qv.size() == pd.omega_sq.size());
}

TEST_CASE("truncation control: halving the tail eps leaves variance put") {
    LssProcess p = make_ou_bm(1.0, 1.0);
    SimConfig ca;
    ca.dt = 0.02;
    ca.horizon = 1.0;
    ca.truncation_eps = 0.02;
    ca.n_paths = 3000;
    ca.seed = 5;
    SimConfig cb = ca;
    cb.truncation_eps = 4e-4;  // doubles the window for exponential tails

    const GridInfo ga = sim_grid(p, ca);
    const GridInfo gb = sim_grid(p, cb);
    CHECK(gb.t_tr == doctest::Approx(2.0 * ga.t_tr).epsilon(1e-9));

    const double va = var_of(column(simulate(p, ca), 50));
    const double vb = var_of(column(simulate(p, cb), 50));
    CHECK(std::abs(va - vb) < 10.0 * ca.truncation_eps * 0.5);
}

TEST_CASE("conditional moments: constant volatility reduces to kernel integrals") {
    LssProcess p;
    p.g = std::make_shared<OuKernel>(1.3);
    p.driver = LevyModel::nig(2.0, 0.5, 0.1, 1.0);
    p.vol = VolatilityModel::constant(1.0);

    const double dt = 0.01;
    const std::size_t m_w = window_cells(p, dt, 1e-6);
    const std::vector<double> ones(m_w + 8, 1.0);
    const ConditionalMoments cm = moments_conditional(p, ones, dt);

    const double k1 = p.driver.kappa1();
    const double k2 = p.driver.kappa2();
    const double inf = std::numeric_limits<double>::infinity();
    // int g = 1/1.3 up to the truncated tail
    CHECK(cm.mean ==
          doctest::Approx(k1 * p.g->int_g(0.0, inf)).epsilon(2e-3));
    CHECK(cm.var == doctest::Approx(k2 * p.g->l2_norm_sq()).epsilon(1e-5));
    CHECK(cm.cov(0.35) ==
          doctest::Approx(k2 * p.g->overlap(0.35)).epsilon(1e-5));
    CHECK(cm.cov(0.0) == doctest::Approx(cm.var).epsilon(1e-9));
    CHECK_THROWS_AS(cm.cov(-0.1), ConfigError);

    // centred driver: conditional mean identically zero
    LssProcess p0 = p;
    p0.driver = LevyModel::brownian(0.0, 1.0);
    const ConditionalMoments cm0 = moments_conditional(p0, ones, dt);
    CHECK(cm0.mean == 0.0);

    // window too short
    const std::vector<double> tiny(m_w / 2, 1.0);
    CHECK_THROWS_AS(moments_conditional(p, tiny, dt), ConfigError);
    CHECK_THROWS_AS(moments_conditional(p, ones, -0.01), ConfigError);
}

TEST_CASE("conditional moments match a dt/10 Riemann oracle on a random path") {
    LssProcess p;
    p.g = std::make_shared<OuKernel>(1.3);
    p.driver = LevyModel::nig(2.0, 0.5, 0.1, 1.0);
    p.vol = VolatilityModel::bns_ou(0.7, LevyModel::ig_subordinator(1.0, 1.0));

    const double dt = 0.01;
    const std::size_t m_w = window_cells(p, dt, 1e-6);
    const std::vector<double> w2 =
        sample_vol_path(p.vol, m_w + 3, dt, 2024);
    const ConditionalMoments cm = moments_conditional(p, w2, dt);

    const double k1 = p.driver.kappa1();
    const double k2 = p.driver.kappa2();
    const auto& g = *p.g;
    const auto id = [](double v) { return v; };
    const auto root = [](double v) { return std::sqrt(v); };

    const double mean_o =
        k1 * riemann_oracle([&](double x) { return g.eval(x); }, root, w2, dt,
                            m_w);
    const double var_o = k2 * riemann_oracle(
                                  [&](double x) {
                                      const double v = g.eval(x);
                                      return v * v;
                                  },
                                  id, w2, dt, m_w);
    const double h = 2.0 * dt;
    const double cov_o = k2 * riemann_oracle(
                                  [&](double x) {
                                      return g.eval(x + h) * g.eval(x);
                                  },
                                  id, w2, dt, m_w);
    CHECK(cm.mean == doctest::Approx(mean_o).epsilon(1e-3));
    CHECK(cm.var == doctest::Approx(var_o).epsilon(1e-3));
    CHECK(cm.cov(h) == doctest::Approx(cov_o).epsilon(1e-3));

    // with the volatility-squared drift channel included in the mean
    LssProcess pd = p;
    pd.q = make_gamma_density_kernel(1.5, 2.0);
    pd.drift_from_vol = true;
    pd.gamma_skew = 0.3;
    const std::size_t m_wd = window_cells(pd, dt, 1e-6);
    const std::vector<double> w2d =
        sample_vol_path(pd.vol, m_wd + 3, dt, 2025);
    const ConditionalMoments cmd = moments_conditional(pd, w2d, dt);
    const auto& q = *pd.q;
    const double mean_od =
        k1 * riemann_oracle([&](double x) { return g.eval(x); }, root, w2d,
                            dt, m_wd) +
        0.3 * riemann_oracle([&](double x) { return q.eval(x); }, id, w2d, dt,
                             m_wd);
    CHECK(cmd.mean == doctest::Approx(mean_od).epsilon(1e-3));

    // user drift processes are rejected here
    LssProcess pu = p;
    pu.q = make_gamma_density_kernel(1.5, 2.0);
    CHECK_THROWS_AS(moments_conditional(pu, w2d, dt), ConfigError);
}

TEST_CASE("stationary moments: closed forms for centred or constant-vol cases") {
    // gamma kernel nu=1 collapses to an exponential: acf(1) = e^{-1}
    LssProcess pg;
    pg.g = std::make_shared<GammaKernel>(1.0, 2.0);
    pg.driver = LevyModel::brownian(0.0, 1.0);
    pg.vol = VolatilityModel::bns_ou(1.0, LevyModel::gamma_subordinator(1.0, 1.0));
    const StationaryMoments smg = moments_stationary(pg);
    CHECK_FALSE(smg.used_mc_vol_stats);  // kappa1 = 0 needs no omega stats
    CHECK(smg.acf(1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
    CHECK(smg.mean == doctest::Approx(0.0));
    // var = kappa2 E[omega^2] l2 with l2 = 1 for the normalized gamma kernel
    CHECK(smg.var == doctest::Approx(1.0).epsilon(1e-9));

    // slow-decay kernel: acf(1) = ln 2 at b = 1
    LssProcess ph;
    ph.g = std::make_shared<HyperbolicKernel>(0.9, 1.0);
    ph.driver = LevyModel::brownian(0.0, 1.0);
    ph.vol = VolatilityModel::constant(1.0);
    const StationaryMoments smh = moments_stationary(ph);
    CHECK(smh.acf(1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // constant volatility c: var = kappa2 c l2 even with kappa1 != 0
    LssProcess pc = make_ou_bm(2.0, 1.0, 0.3, 2.25);
    pc.driver = LevyModel::nig(2.0, 0.5, 0.1, 1.0);
    const StationaryMoments smc = moments_stationary(pc);
    const double k1 = pc.driver.kappa1();
    const double k2 = pc.driver.kappa2();
    CHECK_FALSE(smc.used_mc_vol_stats);
    CHECK(smc.var == doctest::Approx(k2 * 2.25 / 4.0).epsilon(1e-9));
    CHECK(smc.mean ==
          doctest::Approx(0.3 + k1 * 1.5 / 2.0).epsilon(1e-9));
    CHECK(smc.acf(0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));

    // active drift channels are rejected for variance/ACF
    LssProcess pdrift = pg;
    pdrift.q = make_gamma_density_kernel(1.5, 1.0);
    pdrift.drift_from_vol = true;
    pdrift.gamma_skew = 0.4;
    CHECK_THROWS_AS(moments_stationary(pdrift), ConfigError);
    // but a deterministic (constant-vol) drift only shifts the mean
    LssProcess pcd = make_ou_bm(1.0, 1.0, 0.0, 1.0);
    pcd.q = make_gamma_density_kernel(1.5, 1.0);
    pcd.drift_from_vol = true;
    pcd.gamma_skew = 0.4;
    const StationaryMoments smcd = moments_stationary(pcd);
    CHECK(smcd.mean == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(smcd.var == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("stationary double integral against independent 2D quadrature") {
    // exponential kernel: both covariance terms factor e^{-h}, and the
    // volatility double integral has the closed value 0.025 for
    // gamma(u) = 0.04 e^{-0.6 u}
    LssProcess p = make_ou_bm(1.0, 1.0);
    p.driver = LevyModel::nig(2.4, 0.5, 0.0, 0.9);
    p.vol = VolatilityModel::constant(0.85);
    VolOmegaStats stats;
    stats.mean_omega = 0.9;
    stats.acvf_omega = [](double u) { return 0.04 * std::exp(-0.6 * u); };

    const double k1 = p.driver.kappa1();
    const double k2 = p.driver.kappa2();
    const StationaryMoments sm = moments_stationary(p, stats);
    CHECK_FALSE(sm.used_mc_vol_stats);
    const double var_want = k2 * 0.85 * 0.5 + k1 * k1 * 0.025;
    CHECK(sm.var == doctest::Approx(var_want).epsilon(2e-4));
    CHECK(sm.mean == doctest::Approx(k1 * 0.9).epsilon(1e-9));
    CHECK(sm.acf(0.8) == doctest::Approx(std::exp(-0.8)).epsilon(1e-4));

    // non-exponential kernel: oracle by nested adaptive quadrature
    LssProcess pg = p;
    pg.g = std::make_shared<GammaKernel>(1.5, 2.0);
    const StationaryMoments smg = moments_stationary(pg, stats);
    const auto& g = *pg.g;
    const double x_max = g.truncation_horizon(1e-8);
    const auto term_oracle = [&](double h) {
        const auto outer = [&](double x) {
            const auto inner = [&](double y) {
                return g.eval(y) * 0.04 * std::exp(-0.6 * std::abs(x - y));
            };
            const auto ri = quad::integrate(inner, 0.0, x_max, 1e-11, 1e-9, 8000);
            return g.eval(x + h) * ri.value;
        };
        const auto ro = quad::integrate(outer, 0.0, x_max, 1e-9, 1e-7, 8000);
        REQUIRE(ro.converged);
        return ro.value;
    };
    const double ew2 = 0.85;
    const double l2 = g.l2_norm_sq();
    const double var_o = k2 * ew2 * l2 + k1 * k1 * term_oracle(0.0);
    CHECK(smg.var == doctest::Approx(var_o).epsilon(1e-3));
    const double h = 0.7;
    const double cov_mine = smg.var * smg.acf(h);
    const double cov_o = k2 * ew2 * g.overlap(h) + k1 * k1 * term_oracle(h);
    CHECK(cov_mine == doctest::Approx(cov_o).epsilon(2e-3));
}

TEST_CASE("stationary moments flag Monte Carlo omega statistics") {
    LssProcess p = make_ou_bm(1.0, 1.0);
    p.driver = LevyModel::nig(3.0, 0.6, 0.0, 1.0);  // kappa1 > 0
    p.vol = VolatilityModel::bns_ou(1.5, LevyModel::gamma_subordinator(2.0, 3.0));
    const StationaryMoments sm = moments_stationary(p);
    CHECK(sm.used_mc_vol_stats);
    CHECK(sm.acf(0.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sm.acf(0.3) > sm.acf(0.9));
    CHECK(sm.var > 0.0);
    // E[omega] < sqrt(E[omega^2]) brackets the mean contribution
    const double k1 = p.driver.kappa1();
    CHECK(sm.mean > 0.0);
    CHECK(sm.mean < k1 * std::sqrt(2.0 / 3.0) * 1.0 * 1.0001);
}

TEST_CASE("tower property: conditional moments average to the stationary ones") {
    const double dt = 0.02;

    // centred driver: E[Var(Y|omega)] = Var(Y)
    LssProcess p = make_ou_bm(1.0, 1.0, 0.4);
    p.vol = VolatilityModel::bns_ou(1.5, LevyModel::gamma_subordinator(2.0, 3.0));
    const std::size_t m_w = window_cells(p, dt, 1e-6);
    const StationaryMoments sm = moments_stationary(p);
    CHECK(sm.var == doctest::Approx((2.0 / 3.0) * 0.5).epsilon(1e-9));

    std::vector<double> cond_vars(1000);
    for (std::size_t k = 0; k < cond_vars.size(); ++k) {
        const std::vector<double> w2 =
            sample_vol_path(p.vol, m_w + 2, dt, 9000 + k);
        const ConditionalMoments cm = moments_conditional(p, w2, dt);
        CHECK(cm.mean == 0.0);
        cond_vars[k] = cm.var;
    }
    const double avg = mean_of(cond_vars);
    const double se = std::sqrt(var_of(cond_vars) / 1000.0);
    CHECK(std::abs(avg - sm.var) <= 4.0 * se + 1e-3 * sm.var);

    // kappa1 != 0: law of total variance against the MC-flagged stationary
    // second moments
    LssProcess pn = p;
    pn.driver = LevyModel::nig(3.0, 0.6, 0.1, 1.0);
    const StationaryMoments smn = moments_stationary(pn);
    REQUIRE(smn.used_mc_vol_stats);
    std::vector<double> cvars(1000), cmeans(1000);
    for (std::size_t k = 0; k < cvars.size(); ++k) {
        const std::vector<double> w2 =
            sample_vol_path(pn.vol, m_w + 2, dt, 17000 + k);
        const ConditionalMoments cm = moments_conditional(pn, w2, dt);
        cvars[k] = cm.var;
        cmeans[k] = cm.mean;
    }
    const double tower_var = mean_of(cvars) + var_of(cmeans);
    const double se_t = std::sqrt(var_of(cvars) / 1000.0);
    CHECK(std::abs(tower_var - smn.var) <=
          4.0 * se_t + 0.05 * smn.var);
    const double drift_mean = mean_of(cmeans) + pn.mu;
    CHECK(std::abs(drift_mean - smn.mean) <=
          4.0 * std::sqrt(var_of(cmeans) / 1000.0) + 0.02 * smn.mean);
}

TEST_CASE("ensemble autocorrelation matches the analytic acf") {
    LssProcess p = make_ou_bm(0.8, 1.0);
    p.vol = VolatilityModel::bns_ou(1.2, LevyModel::ig_subordinator(0.9, 1.1));
    SimConfig c;
    c.dt = 0.05;
    c.horizon = 0.5;
    c.n_paths = 40000;
    c.seed = 99;
    const SimResult r = simulate(p, c);
    const StationaryMoments sm = moments_stationary(p);
    const std::vector<double> y0 = column(r, 0);
    for (std::size_t l = 1; l <= 10; ++l) {
        const std::vector<double> yl = column(r, l);
        const double want = sm.acf(static_cast<double>(l) * c.dt);
        CHECK(std::abs(corr_of(y0, yl) - want) <= 0.02);
    }
}

TEST_CASE("semimartingale conditions and decomposition handle") {
    LssProcess pou = make_ou_bm(2.0, 1.0);
    const SemimartingaleReport rou = semimartingale_decompose(pou);
    CHECK(rou.is_semimartingale);
    CHECK(rou.g0 == doctest::Approx(1.0));
    CHECK(rou.reason.empty());

    LssProcess pgam = pou;
    pgam.g = std::make_shared<GammaKernel>(0.672, 0.055);
    const SemimartingaleReport rg = semimartingale_decompose(pgam);
    CHECK_FALSE(rg.is_semimartingale);
    CHECK_FALSE(rg.reason.empty());

    // finite g(0+) but derivative not square-integrable near zero
    LssProcess pg12 = pou;
    pg12.g = std::make_shared<GammaKernel>(1.2, 1.0);
    CHECK_FALSE(semimartingale_decompose(pg12).is_semimartingale);

    LssProcess ph = pou;
    ph.g = std::make_shared<HyperbolicKernel>(1.5, 0.75);
    const SemimartingaleReport rh = semimartingale_decompose(ph);
    CHECK(rh.is_semimartingale);
    CHECK(rh.g0 == doctest::Approx(2.0));

    std::vector<double> ca{2.0, 1.0};
    std::vector<double> cb{0.5, 1.0};
    LssProcess pc = pou;
    pc.g = std::make_shared<CarmaKernel>(ca, cb);
    const SemimartingaleReport rc = semimartingale_decompose(pc);
    CHECK(rc.is_semimartingale);
    CHECK(rc.g0 == doctest::Approx(1.0));

    // singular drift kernel breaks condition (ii)
    LssProcess pq = pou;
    pq.q = make_gamma_density_kernel(0.344, 0.055);
    pq.drift_from_vol = true;
    CHECK_FALSE(semimartingale_decompose(pq).is_semimartingale);

    // the decomposition reconstructs increments: dY ~ g0 w dLbar + A dt
    SimConfig c;
    c.dt = 5e-4;
    c.horizon = 0.3;
    c.seed = 404;
    const PathDetail pd = simulate_detail(pou, c);
    const SemimartingaleReport rep = semimartingale_decompose(pou);
    REQUIRE(rep.drift_at);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k + 1 < pd.times.size(); ++k) {
        const std::size_t cell = pd.pre_steps + k;
        const double dy = pd.y[k + 1] - pd.y[k];
        const double model = rep.g0 * std::sqrt(pd.omega_sq[cell]) *
                                 pd.dl[cell] +
                             rep.drift_at(pd, k) * c.dt;
        num += (dy - model) * (dy - model);
        den += dy * dy;
    }
    CHECK(std::sqrt(num / den) < 0.05);
}

TEST_CASE("quadratic variation: analytic vs realized") {
    // Brownian driver, constant volatility c: [Y]_t = c t exactly
    LssProcess p = make_ou_bm(1.0, 1.0, 0.0, 2.25);
    SimConfig c;
    c.dt = 1e-3;
    c.horizon = 1.0;
    c.seed = 11;
    const PathDetail pd = simulate_detail(p, c);
    const QvResult qv = quadratic_variation(pd, p);
    REQUIRE(qv.analytic.size() == 1001);
    CHECK(qv.analytic.back() == doctest::Approx(2.25).epsilon(1e-9));
    CHECK(qv.analytic[500] == doctest::Approx(1.125).epsilon(1e-9));
    const double ratio = qv.realized.back() / qv.analytic.back();
    CHECK(ratio > 0.95);
    CHECK(ratio < 1.05);

    // non-unit g(0+): the analytic curve scales with g0^2.  The power-law
    // tail would need an astronomically long window at the default eps, so
    // relax the truncation: it has no effect on the quadratic variation law.
    LssProcess ph = p;
    ph.g = std::make_shared<HyperbolicKernel>(1.5, 0.75);
    SimConfig ch = c;
    ch.seed = 12;
    ch.truncation_eps = 0.05;
    const PathDetail pdh = simulate_detail(ph, ch);
    const QvResult qvh = quadratic_variation(pdh, ph);
    CHECK(qvh.analytic.back() == doctest::Approx(4.0 * 2.25).epsilon(1e-9));
    const double ratio_h = qvh.realized.back() / qvh.analytic.back();
    CHECK(ratio_h > 0.9);
    CHECK(ratio_h < 1.1);

    // pure-jump driver: both sides accumulate squared jumps only
    LssProcess pj = make_ou_bm(1.0, 1.0);
    pj.driver = LevyModel::compound_poisson_normal(40.0, 0.15, 0.4);
    SimConfig cj = c;
    cj.seed = 13;
    const PathDetail pdj = simulate_detail(pj, cj);
    const QvResult qvj = quadratic_variation(pdj, pj);
    CHECK(qvj.analytic.back() > 0.0);
    const double ratio_j = qvj.realized.back() / qvj.analytic.back();
    CHECK(ratio_j > 0.9);
    CHECK(ratio_j < 1.1);

    // non-semimartingale kernels are rejected
    LssProcess png = p;
    png.g = std::make_shared<GammaKernel>(0.672, 0.055);
    CHECK_THROWS_AS(quadratic_variation(pd, png), ConfigError);

    // drivers without tractable [L] increments are rejected
    LssProcess pn = make_ou_bm(1.0, 1.0);
    pn.driver = LevyModel::nig(3.0, 0.0, 0.0, 1.0);
    SimConfig cn;
    cn.dt = 0.01;
    cn.horizon = 0.2;
    cn.seed = 14;
    const PathDetail pdn = simulate_detail(pn, cn);
    CHECK(pdn.d_qv.empty());
    CHECK_THROWS_AS(quadratic_variation(pdn, pn), ConfigError);
}

TEST_CASE("superposition: weights, moments and simulation") {
    LssProcess p1 = make_ou_bm(1.0, 1.0, 1.0);
    LssProcess p2 = make_ou_bm(4.0, 1.0, 2.0);
    const std::vector<LssProcess> facs{p1, p2};
    const std::vector<double> w{0.3, 0.7};
    const SuperposedLss sp = superpose(facs, w);

    const StationaryMoments sm = moments_stationary(sp);
    const double v1 = 0.5, v2 = 0.125;
    const double var_want = 0.09 * v1 + 0.49 * v2;
    CHECK(sm.mean == doctest::Approx(0.3 * 1.0 + 0.7 * 2.0).epsilon(1e-12));
    CHECK(sm.var == doctest::Approx(var_want).epsilon(1e-12));
    const auto acf_want = [&](double h) {
        return (0.09 * v1 * std::exp(-h) + 0.49 * v2 * std::exp(-4.0 * h)) /
               var_want;
    };
    CHECK(sm.acf(0.2) == doctest::Approx(acf_want(0.2)).epsilon(1e-9));
    CHECK(sm.acf(0.6) == doctest::Approx(acf_want(0.6)).epsilon(1e-9));

    // single factor with unit weight is the identity (bitwise)
    SimConfig c;
    c.dt = 0.02;
    c.horizon = 0.7;
    c.n_paths = 4;
    c.seed = 8;
    const std::vector<LssProcess> one{p1};
    const std::vector<double> onew{1.0};
    const SimResult rs = simulate(superpose(one, onew), c);
    const SimResult rp = simulate(p1, c);
    for (std::size_t i = 0; i < rs.paths.size(); ++i)
        CHECK(rs.paths[i] == rp.paths[i]);

    // equal mix of identical factors halves the variance
    const std::vector<LssProcess> twin{p1, p1};
    const std::vector<double> half{0.5, 0.5};
    const StationaryMoments smt = moments_stationary(superpose(twin, half));
    CHECK(smt.var == doctest::Approx(0.25).epsilon(1e-12));

    // Monte Carlo check of the composite acf
    SimConfig cm;
    cm.dt = 0.02;
    cm.horizon = 0.7;
    cm.n_paths = 6000;
    cm.seed = 21;
    const SimResult r = simulate(sp, cm);
    const std::vector<double> y0 = column(r, 0);
    const std::vector<double> y10 = column(r, 10);
    const std::vector<double> y30 = column(r, 30);
    CHECK(std::abs(corr_of(y0, y10) - acf_want(0.2)) <= 0.025);
    CHECK(std::abs(corr_of(y0, y30) - acf_want(0.6)) <= 0.025);
    const double var_mc = var_of(column(r, 35));
    CHECK(std::abs(var_mc - var_want) <=
          4.0 * var_want * std::sqrt(2.0 / 5999.0));

    // validation errors
    const std::vector<double> bad_sum{0.6, 0.3};
    CHECK_THROWS_AS(superpose(facs, bad_sum), ConfigError);
    const std::vector<double> neg{1.5, -0.5};
    CHECK_THROWS_AS(superpose(facs, neg), ConfigError);
    const std::vector<double> short_w{1.0};
    CHECK_THROWS_AS(superpose(facs, short_w), ConfigError);
    const std::vector<LssProcess> none;
    const std::vector<double> wnone;
    CHECK_THROWS_AS(superpose(none, wnone), ConfigError);
}

TEST_CASE("drift channel plumbing in simulation") {
    // drift kernel whose truncation horizon sits inside the main kernel's,
    // so drift-free twins share the same window (and the same draws)
    LssProcess p = make_ou_bm(1.0, 1.0);
    p.q = make_gamma_density_kernel(1.5, 4.0);
    p.drift_from_vol = true;
    p.gamma_skew = 0.5;
    p.vol = VolatilityModel::bns_ou(1.0, LevyModel::gamma_subordinator(2.0, 2.0));

    SimConfig c;
    c.dt = 0.02;
    c.horizon = 1.0;
    c.n_paths = 2000;
    c.seed = 55;
    const SimResult r = simulate(p, c);
    // stationary mean mu + gamma E[omega^2] int q = 0.5 * 1 * 1
    const std::vector<double> yend = column(r, 50);
    const double se = std::sqrt(var_of(yend) / 2000.0);
    CHECK(std::abs(mean_of(yend) - 0.5) <= 4.0 * se);

    // user-supplied drift paths go through simulate_detail
    LssProcess pu = make_ou_bm(1.0, 1.0);
    pu.q = make_gamma_density_kernel(1.5, 4.0);
    CHECK_THROWS_AS(simulate(pu, c), ConfigError);

    SimConfig c1 = c;
    c1.n_paths = 1;
    const GridInfo gi = sim_grid(pu, c1);
    REQUIRE(gi.t_tr == sim_grid(make_ou_bm(1.0, 1.0), c1).t_tr);
    const std::vector<double> a_const(gi.window_cells + gi.n_steps, 2.0);
    const PathDetail pd = simulate_detail(pu, c1, &a_const);
    // constant a shifts the path by a * int q; the Brownian parts of the
    // twin runs share draws and cancel exactly
    LssProcess p0 = make_ou_bm(1.0, 1.0);
    const PathDetail pd0 = simulate_detail(p0, c1);
    const double shift0 = pd.y[0] - pd0.y[0];
    CHECK(shift0 == doctest::Approx(2.0).epsilon(0.03));
    for (std::size_t k = 1; k < pd.y.size(); ++k)
        CHECK(pd.y[k] - pd0.y[k] == doctest::Approx(shift0).epsilon(1e-9));

    // the wired volatility-squared channel is the user path a = skew*omega^2
    LssProcess pw = make_ou_bm(1.0, 1.0);
    pw.q = make_gamma_density_kernel(1.5, 4.0);
    pw.drift_from_vol = true;
    pw.gamma_skew = 0.5;
    const std::vector<double> a_half(gi.window_cells + gi.n_steps, 0.5);
    const PathDetail pd_wired = simulate_detail(pw, c1);
    const PathDetail pd_user = simulate_detail(pu, c1, &a_half);
    CHECK(pd_wired.y == pd_user.y);  // bit-identical with constant unit vol

    const std::vector<double> wrong_len(gi.window_cells + gi.n_steps - 1, 2.0);
    CHECK_THROWS_AS(simulate_detail(pu, c1, &wrong_len), ConfigError);
    // drift path without a drift kernel
    CHECK_THROWS_AS(simulate_detail(p0, c1, &a_const), ConfigError);
    // drift path conflicts with the wired volatility-squared channel
    CHECK_THROWS_AS(simulate_detail(p, c1, &a_const), ConfigError);
}

TEST_CASE("process JSON round trip") {
    LssProcess p;
    p.mu = 0.25;
    p.g = std::make_shared<GammaKernel>(0.8, 1.1);
    p.q = make_gamma_density_kernel(0.6, 1.1);
    p.driver = LevyModel::nig(2.0, -0.4, 0.1, 0.9);
    p.vol = VolatilityModel::bns_ou(0.7, LevyModel::ig_subordinator(1.0, 2.0));
    p.drift_from_vol = true;
    p.gamma_skew = 0.15;

    const nlohmann::json j = p.to_json();
    const LssProcess q = LssProcess::from_json(j);
    CHECK(q.mu == p.mu);
    CHECK(q.gamma_skew == p.gamma_skew);
    CHECK(q.drift_from_vol);
    CHECK(q.g->to_json() == p.g->to_json());
    CHECK(q.q->to_json() == p.q->to_json());
    CHECK(q.driver.to_json() == p.driver.to_json());
    CHECK(q.vol.to_json() == p.vol.to_json());

    nlohmann::json bad = j;
    bad.erase("kernel");
    CHECK_THROWS_AS(LssProcess::from_json(bad), ConfigError);
    nlohmann::json bad2 = j;
    bad2["driver"] = "nope";
    CHECK_THROWS_AS(LssProcess::from_json(bad2), ConfigError);
}
