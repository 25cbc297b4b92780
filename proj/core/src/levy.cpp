#include "lssm/levy.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lssm/errors.hpp"

namespace lssm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void strip_error(const LevyModel& m, double x) {
    auto [lo, hi] = m.strip();
    std::ostringstream os;
    os << "cumulant argument " << x << " outside the exponential-moment strip ("
       << lo << ", " << hi << ") of family " << m.family_name();
    throw MathError(os.str());
}

void check_strip(const LevyModel& m, double x) {
    auto [lo, hi] = m.strip();
    if (!(x > lo && x < hi)) strip_error(m, x);
}

} // namespace

LevyModel LevyModel::brownian(double drift, double variance) {
    if (!(variance >= 0.0))
        throw ConfigError("Brownian model requires variance >= 0");
    LevyModel m;
    m.family = LevyFamily::Brownian;
    m.p1 = drift;
    m.p2 = variance;
    return m;
}

LevyModel LevyModel::nig(double alpha, double beta, double mu, double delta) {
    if (!(alpha > 0.0) || !(std::fabs(beta) < alpha) || !(delta > 0.0))
        throw ConfigError(
            "NIG model requires alpha > 0, |beta| < alpha, delta > 0");
    LevyModel m;
    m.family = LevyFamily::Nig;
    m.p1 = alpha;
    m.p2 = beta;
    m.p3 = mu;
    m.p4 = delta;
    return m;
}

LevyModel LevyModel::compound_poisson_normal(double rate, double jump_mean,
                                             double jump_sd) {
    if (!(rate > 0.0) || !(jump_sd >= 0.0))
        throw ConfigError(
            "compound Poisson model requires rate > 0 and jump_sd >= 0");
    LevyModel m;
    m.family = LevyFamily::CompoundPoissonNormal;
    m.p1 = rate;
    m.p2 = jump_mean;
    m.p3 = jump_sd;
    return m;
}

LevyModel LevyModel::gamma_subordinator(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
        throw ConfigError("gamma subordinator requires shape > 0 and rate > 0");
    LevyModel m;
    m.family = LevyFamily::GammaSubordinator;
    m.p1 = shape;
    m.p2 = rate;
    return m;
}

LevyModel LevyModel::ig_subordinator(double delta, double gamma) {
    if (!(delta > 0.0) || !(gamma > 0.0))
        throw ConfigError(
            "inverse-Gaussian subordinator requires delta > 0 and gamma > 0");
    LevyModel m;
    m.family = LevyFamily::IgSubordinator;
    m.p1 = delta;
    m.p2 = gamma;
    return m;
}

double LevyModel::kappa1() const {
    switch (family) {
    case LevyFamily::Brownian:
        return p1;
    case LevyFamily::Nig:
        return p3 + p4 * p2 / std::sqrt(p1 * p1 - p2 * p2);
    case LevyFamily::CompoundPoissonNormal:
        return p1 * p2;
    case LevyFamily::GammaSubordinator:
        return p1 / p2;
    case LevyFamily::IgSubordinator:
        return p1 / p2;
    }
    throw MathError("unknown Levy family");
}

double LevyModel::kappa2() const {
    switch (family) {
    case LevyFamily::Brownian:
        return p2;
    case LevyFamily::Nig: {
        const double rho = p1 * p1 - p2 * p2;
        return p4 * p1 * p1 / (rho * std::sqrt(rho));
    }
    case LevyFamily::CompoundPoissonNormal:
        return p1 * (p2 * p2 + p3 * p3);
    case LevyFamily::GammaSubordinator:
        return p1 / (p2 * p2);
    case LevyFamily::IgSubordinator:
        return p1 / (p2 * p2 * p2);
    }
    throw MathError("unknown Levy family");
}

std::pair<double, double> LevyModel::strip() const {
    switch (family) {
    case LevyFamily::Brownian:
    case LevyFamily::CompoundPoissonNormal:
        return {-kInf, kInf};
    case LevyFamily::Nig:
        return {-p1 - p2, p1 - p2};
    case LevyFamily::GammaSubordinator:
        return {-kInf, p2};
    case LevyFamily::IgSubordinator:
        return {-kInf, 0.5 * p2 * p2};
    }
    throw MathError("unknown Levy family");
}

bool LevyModel::is_subordinator() const {
    return family == LevyFamily::GammaSubordinator ||
           family == LevyFamily::IgSubordinator;
}

std::string LevyModel::family_name() const {
    switch (family) {
    case LevyFamily::Brownian:
        return "brownian";
    case LevyFamily::Nig:
        return "nig";
    case LevyFamily::CompoundPoissonNormal:
        return "compound_poisson_normal";
    case LevyFamily::GammaSubordinator:
        return "gamma_subordinator";
    case LevyFamily::IgSubordinator:
        return "ig_subordinator";
    }
    throw MathError("unknown Levy family");
}

nlohmann::json LevyModel::to_json() const {
    nlohmann::json j;
    j["family"] = family_name();
    switch (family) {
    case LevyFamily::Brownian:
        j["drift"] = p1;
        j["variance"] = p2;
        break;
    case LevyFamily::Nig:
        j["alpha"] = p1;
        j["beta"] = p2;
        j["mu"] = p3;
        j["delta"] = p4;
        break;
    case LevyFamily::CompoundPoissonNormal:
        j["rate"] = p1;
        j["jump_mean"] = p2;
        j["jump_sd"] = p3;
        break;
    case LevyFamily::GammaSubordinator:
        j["shape"] = p1;
        j["rate"] = p2;
        break;
    case LevyFamily::IgSubordinator:
        j["delta"] = p1;
        j["gamma"] = p2;
        break;
    }
    return j;
}

LevyModel LevyModel::from_json(const nlohmann::json& j) {
    if (!j.contains("family"))
        throw ConfigError("levy model: missing \"family\"");
    const std::string fam = j.at("family").get<std::string>();
    try {
        if (fam == "brownian")
            return brownian(j.value("drift", 0.0), j.at("variance").get<double>());
        if (fam == "nig")
            return nig(j.at("alpha").get<double>(), j.at("beta").get<double>(),
                       j.at("mu").get<double>(), j.at("delta").get<double>());
        if (fam == "compound_poisson_normal")
            return compound_poisson_normal(j.at("rate").get<double>(),
                                           j.at("jump_mean").get<double>(),
                                           j.at("jump_sd").get<double>());
        if (fam == "gamma_subordinator")
            return gamma_subordinator(j.at("shape").get<double>(),
                                      j.at("rate").get<double>());
        if (fam == "ig_subordinator")
            return ig_subordinator(j.at("delta").get<double>(),
                                   j.at("gamma").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("levy model: ") + e.what());
    }
    throw ConfigError("levy model: unknown family \"" + fam + "\"");
}

double cumulant(const LevyModel& m, double x) {
    check_strip(m, x);
    switch (m.family) {
    case LevyFamily::Brownian:
        return m.p1 * x + 0.5 * m.p2 * x * x;
    case LevyFamily::Nig: {
        const double g0 = std::sqrt(m.p1 * m.p1 - m.p2 * m.p2);
        const double gx = std::sqrt(m.p1 * m.p1 - (m.p2 + x) * (m.p2 + x));
        return m.p3 * x + m.p4 * (g0 - gx);
    }
    case LevyFamily::CompoundPoissonNormal:
        return m.p1 * (std::exp(m.p2 * x + 0.5 * m.p3 * m.p3 * x * x) - 1.0);
    case LevyFamily::GammaSubordinator:
        return -m.p1 * std::log1p(-x / m.p2);
    case LevyFamily::IgSubordinator:
        return m.p1 * (m.p2 - std::sqrt(m.p2 * m.p2 - 2.0 * x));
    }
    throw MathError("unknown Levy family");
}

std::complex<double> cumulant(const LevyModel& m, std::complex<double> z) {
    check_strip(m, z.real());
    switch (m.family) {
    case LevyFamily::Brownian:
        return m.p1 * z + 0.5 * m.p2 * z * z;
    case LevyFamily::Nig: {
        const double g0 = std::sqrt(m.p1 * m.p1 - m.p2 * m.p2);
        const std::complex<double> gz =
            std::sqrt(m.p1 * m.p1 - (m.p2 + z) * (m.p2 + z));
        return m.p3 * z + m.p4 * (g0 - gz);
    }
    case LevyFamily::CompoundPoissonNormal:
        return m.p1 * (std::exp(m.p2 * z + 0.5 * m.p3 * m.p3 * z * z) - 1.0);
    case LevyFamily::GammaSubordinator:
        return -m.p1 * std::log(1.0 - z / m.p2);
    case LevyFamily::IgSubordinator:
        return m.p1 * (m.p2 - std::sqrt(m.p2 * m.p2 - 2.0 * z));
    }
    throw MathError("unknown Levy family");
}

double esscher_cumulant(const LevyModel& m, double theta, double x) {
    return cumulant(m, x + theta) - cumulant(m, theta);
}

std::complex<double> esscher_cumulant(const LevyModel& m, double theta,
                                      std::complex<double> z) {
    return cumulant(m, z + theta) - cumulant(m, theta);
}

LevyModel esscher_triplet(const LevyModel& m, double theta) {
    if (theta == 0.0) return m;
    check_strip(m, theta);
    switch (m.family) {
    case LevyFamily::Brownian:
        return LevyModel::brownian(m.p1 + m.p2 * theta, m.p2);
    case LevyFamily::Nig:
        return LevyModel::nig(m.p1, m.p2 + theta, m.p3, m.p4);
    case LevyFamily::CompoundPoissonNormal: {
        // Tilting a normal jump law N(j, s^2) by e^{theta z} gives
        // N(j + s^2 theta, s^2) with the intensity scaled by the jump MGF.
        const double mgf =
            std::exp(m.p2 * theta + 0.5 * m.p3 * m.p3 * theta * theta);
        return LevyModel::compound_poisson_normal(
            m.p1 * mgf, m.p2 + m.p3 * m.p3 * theta, m.p3);
    }
    case LevyFamily::GammaSubordinator:
        return LevyModel::gamma_subordinator(m.p1, m.p2 - theta);
    case LevyFamily::IgSubordinator:
        return LevyModel::ig_subordinator(
            m.p1, std::sqrt(m.p2 * m.p2 - 2.0 * theta));
    }
    throw MathError("unknown Levy family");
}

double sample_increment(const LevyModel& m, double dt, Rng& rng) {
    switch (m.family) {
    case LevyFamily::Brownian:
        return rng.normal(m.p1 * dt, std::sqrt(m.p2 * dt));
    case LevyFamily::Nig: {
        // Normal mean-variance mixture with inverse-Gaussian mixing: both
        // delta and mu scale linearly in time, so the draw is exact in law.
        const double w =
            rng.inverse_gaussian(m.p4 * dt, std::sqrt(m.p1 * m.p1 - m.p2 * m.p2));
        return m.p3 * dt + m.p2 * w + std::sqrt(w) * rng.normal();
    }
    case LevyFamily::CompoundPoissonNormal: {
        const std::uint64_t k = rng.poisson(m.p1 * dt);
        if (k == 0) return 0.0;
        return rng.normal(static_cast<double>(k) * m.p2,
                          m.p3 * std::sqrt(static_cast<double>(k)));
    }
    case LevyFamily::GammaSubordinator:
        return rng.gamma(m.p1 * dt, m.p2);
    case LevyFamily::IgSubordinator:
        return rng.inverse_gaussian(m.p1 * dt, m.p2);
    }
    throw MathError("unknown Levy family");
}

IncrementQv sample_increment_qv(const LevyModel& m, double dt, Rng& rng) {
    switch (m.family) {
    case LevyFamily::Brownian:
        return {sample_increment(m, dt, rng), m.p2 * dt};
    case LevyFamily::CompoundPoissonNormal: {
        // Resolve the individual jumps so the squared-jump sum is exact.
        const std::uint64_t k = rng.poisson(m.p1 * dt);
        double dl = 0.0, qv = 0.0;
        for (std::uint64_t i = 0; i < k; ++i) {
            const double j = rng.normal(m.p2, m.p3);
            dl += j;
            qv += j * j;
        }
        return {dl, qv};
    }
    default:
        throw MathError("quadratic-variation sampling is only available for "
                        "Brownian and compound Poisson drivers");
    }
}

std::vector<double> sample_increments(const LevyModel& m, double dt, int n,
                                      std::uint64_t seed) {
    if (!(dt > 0.0)) throw ConfigError("sample_increments requires dt > 0");
    if (n < 1) throw ConfigError("sample_increments requires n >= 1");
    Rng rng(seed);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = sample_increment(m, dt, rng);
    return out;
}

} // namespace lssm
