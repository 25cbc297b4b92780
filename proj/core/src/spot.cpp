#include "lssm/spot.hpp"

#include <cmath>
#include <numbers>

#include "lssm/errors.hpp"

namespace lssm {

namespace {

bool kernel_known_nonnegative(const Kernel& k) {
    const std::string f = k.family();
    return f == "ou" || f == "gamma" || f == "hyperbolic" ||
           f == "gamma_density";
}

} // namespace

void Seasonality::validate() const {
    if (!(period_year > 0.0) || !(period_week > 0.0))
        throw ConfigError("seasonality periods must be positive");
}

nlohmann::json Seasonality::to_json() const {
    return {{"beta0", beta0}, {"beta1", beta1}, {"beta2", beta2},
            {"beta3", beta3}, {"tau1", tau1},   {"tau2", tau2},
            {"period_year", period_year}, {"period_week", period_week}};
}

Seasonality Seasonality::from_json(const nlohmann::json& j) {
    try {
        Seasonality s;
        s.beta0 = j.value("beta0", 0.0);
        s.beta1 = j.value("beta1", 0.0);
        s.beta2 = j.value("beta2", 0.0);
        s.beta3 = j.value("beta3", 0.0);
        s.tau1 = j.value("tau1", 0.0);
        s.tau2 = j.value("tau2", 0.0);
        s.period_year = j.value("period_year", 261.0);
        s.period_week = j.value("period_week", 5.0);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad seasonality spec: ") + e.what());
    }
}

double log_seasonality(const Seasonality& s, double t) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return s.beta0 +
           s.beta1 * std::cos((s.tau1 + two_pi * t) / s.period_year) +
           s.beta2 * std::cos((s.tau2 + two_pi * t) / s.period_week) +
           s.beta3 * t;
}

double seasonality(const Seasonality& s, double t) {
    return std::exp(log_seasonality(s, t));
}

std::string to_string(SpotKind k) {
    return k == SpotKind::Geometric ? "geometric" : "arithmetic";
}

SpotKind spot_kind_from_string(const std::string& name) {
    if (name == "geometric") return SpotKind::Geometric;
    if (name == "arithmetic") return SpotKind::Arithmetic;
    throw ConfigError("unknown spot kind: " + name);
}

void SpotModel::validate() const {
    seasonality.validate();
    core.validate();
}

bool SpotModel::positivity_warning() const {
    if (kind != SpotKind::Arithmetic) return false;
    if (!core.driver.is_subordinator()) return true;
    if (!kernel_known_nonnegative(*core.g)) return true;
    if (core.q && !kernel_known_nonnegative(*core.q)) return true;
    if (core.has_drift() && core.gamma_skew < 0.0) return true;
    return core.mu < 0.0;
}

nlohmann::json SpotModel::to_json() const {
    return {{"kind", to_string(kind)},
            {"seasonality", seasonality.to_json()},
            {"core", core.to_json()}};
}

SpotModel SpotModel::from_json(const nlohmann::json& j) {
    try {
        SpotModel m;
        m.kind = spot_kind_from_string(j.at("kind").get<std::string>());
        m.seasonality = Seasonality::from_json(j.at("seasonality"));
        m.core = LssProcess::from_json(j.at("core"));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad spot model spec: ") + e.what());
    }
}

std::vector<double> spot_path(const SpotModel& m,
                              const std::vector<double>& times,
                              const std::vector<double>& y) {
    if (times.size() != y.size())
        throw ConfigError("spot_path needs matching time and value grids");
    std::vector<double> s(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double lam = seasonality(m.seasonality, times[i]);
        s[i] = m.kind == SpotKind::Geometric ? lam * std::exp(y[i])
                                             : lam + y[i];
    }
    return s;
}

std::vector<double> core_path(const SpotModel& m,
                              const std::vector<double>& times,
                              const std::vector<double>& prices) {
    if (times.size() != prices.size())
        throw ConfigError("core_path needs matching time and value grids");
    std::vector<double> y(prices.size());
    for (std::size_t i = 0; i < prices.size(); ++i) {
        const double lam = seasonality(m.seasonality, times[i]);
        if (m.kind == SpotKind::Geometric) {
            if (!(prices[i] > 0.0))
                throw ConfigError("geometric prices must be positive");
            y[i] = std::log(prices[i] / lam);
        } else {
            y[i] = prices[i] - lam;
        }
    }
    return y;
}

SimResult simulate_spot(const SpotModel& m, const SimConfig& c) {
    m.validate();
    SimResult r = simulate(m.core, c);
    for (auto& path : r.paths) path = spot_path(m, r.times, path);
    return r;
}

} // namespace lssm
