#pragma once

// Seasonal trend and the geometric/arithmetic spot-price models wrapping a
// Lévy semistationary core process.  Prices are
//   geometric:   S_t = Lambda(t) * exp(Y_t)
//   arithmetic:  S_t = Lambda(t) + Y_t
// with Lambda the deterministic seasonality.  Time is measured in business
// days (261 per year, 5 per week by default); kernel and rate parameters are
// interpreted per business day.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lssm/lss.hpp"

namespace lssm {

// Trend-plus-trigonometric seasonality.  The log-trend is evaluated in the
// display form
//   beta0 + beta1 cos((tau1 + 2 pi t)/period_year)
//         + beta2 cos((tau2 + 2 pi t)/period_week) + beta3 t
// (the phases tau are additive inside the cosine argument before the period
// division; see log_seasonality).
struct Seasonality {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3 = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    double period_year = 261.0;
    double period_week = 5.0;

    void validate() const;  // ConfigError unless both periods are positive

    nlohmann::json to_json() const;
    static Seasonality from_json(const nlohmann::json& j);
};

// log Lambda(t) in the display form above.
double log_seasonality(const Seasonality& s, double t);

// Lambda(t) = exp(log_seasonality(s, t)) > 0.
double seasonality(const Seasonality& s, double t);

enum class SpotKind { Geometric, Arithmetic };

std::string to_string(SpotKind k);
SpotKind spot_kind_from_string(const std::string& name);

struct SpotModel {
    SpotKind kind = SpotKind::Geometric;
    Seasonality seasonality;
    LssProcess core;

    void validate() const;

    // True when the arithmetic model cannot be certified nonnegative: the
    // driver is not a subordinator, the core has a centred/negative drift
    // channel, or the kernel family is not known to be nonnegative.  A
    // diagnostic, never an error.
    bool positivity_warning() const;

    nlohmann::json to_json() const;
    static SpotModel from_json(const nlohmann::json& j);
};

// Map a deseasonalised core path Y sampled at `times` to prices.
std::vector<double> spot_path(const SpotModel& m,
                              const std::vector<double>& times,
                              const std::vector<double>& y);

// Recover the core path from prices: log(S/Lambda) or S - Lambda.
std::vector<double> core_path(const SpotModel& m,
                              const std::vector<double>& times,
                              const std::vector<double>& prices);

// Simulate the core process and map every path to prices (times carry over).
SimResult simulate_spot(const SpotModel& m, const SimConfig& c);

} // namespace lssm
