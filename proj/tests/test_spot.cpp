#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "lssm/errors.hpp"
#include "lssm/kernels.hpp"
#include "lssm/levy.hpp"
#include "lssm/spot.hpp"
#include "lssm/volatility.hpp"

using namespace lssm;

TEST_CASE("log seasonality display form and special values") {
    Seasonality s;  // all betas zero
    CHECK(log_seasonality(s, 13.7) == 0.0);
    CHECK(seasonality(s, 13.7) == 1.0);

    s.beta0 = 1.0;
    CHECK(log_seasonality(s, 0.0) == 1.0);
    CHECK(log_seasonality(s, 100.0) == 1.0);

    // yearly cosine alone: unit value whenever the argument is a multiple
    // of 2 pi, i.e. at t = 0 and t = 261 with zero phase
    Seasonality sy;
    sy.beta1 = 1.0;
    CHECK(log_seasonality(sy, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(log_seasonality(sy, 261.0) == doctest::Approx(1.0).epsilon(1e-12));
    // phase enters additively inside the cosine argument, divided by the
    // period together with 2 pi t
    sy.tau1 = 0.25 * 261.0;
    const double want = std::cos((0.25 * 261.0 + 2.0 * std::numbers::pi * 3.0) / 261.0);
    CHECK(log_seasonality(sy, 3.0) == doctest::Approx(want).epsilon(1e-14));

    // general evaluation against a hand-built sum
    Seasonality sg{0.4, 0.3, -0.2, 1e-3, 0.7, -0.4, 261.0, 5.0};
    const double t = 37.25;
    const double direct =
        0.4 + 0.3 * std::cos((0.7 + 2.0 * std::numbers::pi * t) / 261.0) -
        0.2 * std::cos((-0.4 + 2.0 * std::numbers::pi * t) / 5.0) + 1e-3 * t;
    CHECK(log_seasonality(sg, t) == doctest::Approx(direct).epsilon(1e-14));

    Seasonality bad;
    bad.period_year = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("seasonality periodicity up to the linear trend") {
    Seasonality s{0.4, 0.3, 0.0, 1e-3, 0.7, 0.0, 261.0, 5.0};
    for (const double t : {0.0, 17.5, 100.0, 1234.0}) {
        const double diff = log_seasonality(s, t + 261.0) - log_seasonality(s, t);
        CHECK(diff == doctest::Approx(1e-3 * 261.0).epsilon(1e-10));
    }
    // a weekly term breaks exact yearly periodicity (261 is not a multiple
    // of 5)
    Seasonality sw = s;
    sw.beta2 = 0.2;
    const double d0 = log_seasonality(sw, 3.0 + 261.0) - log_seasonality(sw, 3.0);
    CHECK(std::abs(d0 - 1e-3 * 261.0) > 1e-6);
    // weekly periodicity in turn holds when beta1 = 0
    Seasonality sww = sw;
    sww.beta1 = 0.0;
    const double d5 = log_seasonality(sww, 3.0 + 5.0) - log_seasonality(sww, 3.0);
    CHECK(d5 == doctest::Approx(1e-3 * 5.0).epsilon(1e-10));
}

TEST_CASE("spot paths: mapping, round trip, positivity") {
    SpotModel m;
    m.seasonality = Seasonality{3.0, 0.4, 0.1, 5e-4, 0.3, 0.1, 261.0, 5.0};
    m.core.g = std::make_shared<OuKernel>(0.1);
    m.core.driver = LevyModel::brownian(0.0, 0.05);
    m.core.vol = VolatilityModel::constant(1.0);

    std::vector<double> times(40), y(40);
    for (std::size_t i = 0; i < times.size(); ++i) {
        times[i] = static_cast<double>(i) * 1.0;
        y[i] = 0.3 * std::sin(0.7 * times[i]) - 0.1;
    }

    // Y == 0 gives the seasonal curve itself, for both kinds
    const std::vector<double> zeros(times.size(), 0.0);
    const std::vector<double> sg0 = spot_path(m, times, zeros);
    for (std::size_t i = 0; i < times.size(); ++i)
        CHECK(sg0[i] == doctest::Approx(seasonality(m.seasonality, times[i]))
                            .epsilon(1e-14));
    SpotModel ma = m;
    ma.kind = SpotKind::Arithmetic;
    const std::vector<double> sa0 = spot_path(ma, times, zeros);
    for (std::size_t i = 0; i < times.size(); ++i)
        CHECK(sa0[i] == doctest::Approx(seasonality(m.seasonality, times[i]))
                            .epsilon(1e-14));

    // geometric: strictly positive and log(S/Lambda) recovers Y
    const std::vector<double> sg = spot_path(m, times, y);
    CHECK(*std::min_element(sg.begin(), sg.end()) > 0.0);
    const std::vector<double> back = core_path(m, times, sg);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(back[i] == doctest::Approx(y[i]).epsilon(1e-12));

    // arithmetic round trip is exact up to cancellation
    const std::vector<double> sa = spot_path(ma, times, y);
    const std::vector<double> backa = core_path(ma, times, sa);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(backa[i] == doctest::Approx(y[i]).epsilon(1e-12));

    const std::vector<double> short_times(3, 0.0);
    CHECK_THROWS_AS(spot_path(m, short_times, y), ConfigError);
    std::vector<double> neg = sg;
    neg[5] = -1.0;
    CHECK_THROWS_AS(core_path(m, times, neg), ConfigError);
}

TEST_CASE("arithmetic positivity: subordinator driver keeps S above Lambda") {
    SpotModel m;
    m.kind = SpotKind::Arithmetic;
    m.seasonality.beta0 = 2.0;
    m.core.g = std::make_shared<OuKernel>(1.0);
    m.core.driver = LevyModel::gamma_subordinator(2.0, 3.0);
    m.core.vol = VolatilityModel::constant(1.0);
    CHECK_FALSE(m.positivity_warning());

    SimConfig c;
    c.dt = 0.05;
    c.horizon = 0.5;
    c.n_paths = 1000;
    c.seed = 7;
    const SimResult r = simulate_spot(m, c);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.paths.size(); ++i)
        for (std::size_t k = 0; k < r.times.size(); ++k)
            worst = std::min(worst,
                             r.paths[i][k] - seasonality(m.seasonality, r.times[k]));
    CHECK(worst >= -1e-12);

    // diagnostics for models without a positivity certificate
    SpotModel mb = m;
    mb.core.driver = LevyModel::brownian(0.0, 1.0);
    CHECK(mb.positivity_warning());
    SpotModel mg = mb;
    mg.kind = SpotKind::Geometric;
    CHECK_FALSE(mg.positivity_warning());
    SpotModel mmu = m;
    mmu.core.mu = -0.5;
    CHECK(mmu.positivity_warning());

    // geometric simulation is positive without any structural requirement
    SpotModel gg = mb;
    gg.kind = SpotKind::Geometric;
    const SimResult rg = simulate_spot(gg, c);
    for (std::size_t i = 0; i < rg.paths.size(); ++i)
        CHECK(*std::min_element(rg.paths[i].begin(), rg.paths[i].end()) > 0.0);
}

TEST_CASE("spot model JSON round trip") {
    SpotModel m;
    m.kind = SpotKind::Arithmetic;
    m.seasonality = Seasonality{1.0, 0.2, -0.1, 2e-4, 0.5, 0.25, 261.0, 5.0};
    m.core.mu = 0.1;
    m.core.g = std::make_shared<GammaKernel>(0.9, 0.3);
    m.core.driver = LevyModel::ig_subordinator(1.0, 2.0);
    m.core.vol = VolatilityModel::bns_ou(0.5, LevyModel::gamma_subordinator(1.0, 1.0));

    const nlohmann::json j = m.to_json();
    const SpotModel q = SpotModel::from_json(j);
    CHECK(q.kind == m.kind);
    CHECK(q.seasonality.to_json() == m.seasonality.to_json());
    CHECK(q.core.to_json() == m.core.to_json());
    CHECK(log_seasonality(q.seasonality, 11.0) ==
          doctest::Approx(log_seasonality(m.seasonality, 11.0)).epsilon(1e-14));

    nlohmann::json bad = j;
    bad["kind"] = "exotic";
    CHECK_THROWS_AS(SpotModel::from_json(bad), ConfigError);
    nlohmann::json bad2 = j;
    bad2.erase("core");
    CHECK_THROWS_AS(SpotModel::from_json(bad2), ConfigError);
}
