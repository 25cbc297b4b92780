#pragma once

#include <cstdint>
#include <random>

// Deterministic random number generation.  Every stochastic routine takes an
// explicit seed; independent streams (e.g. one per simulated path) are derived
// from (seed, stream index) with a splitmix64 mix so that changing the number
// of paths never perturbs existing ones.

namespace lssm {

// splitmix64 finalizer; good avalanche, used for seed/stream derivation.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    // Independent stream k of a master seed.
    static Rng substream(std::uint64_t seed, std::uint64_t stream) {
        return Rng(splitmix64(seed) ^ splitmix64(~stream * 0x9e3779b97f4a7c15ULL + 1));
    }

    std::mt19937_64& engine() { return eng_; }

    double uniform() {  // open interval (0,1)
        double u;
        do {
            u = std::uniform_real_distribution<double>(0.0, 1.0)(eng_);
        } while (u <= 0.0 || u >= 1.0);
        return u;
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        return std::normal_distribution<double>(mean, sd)(eng_);
    }

    double exponential(double rate) {
        return std::exponential_distribution<double>(rate)(eng_);
    }

    // Gamma with given shape and *rate* (density ~ x^{shape-1} e^{-rate x}).
    double gamma(double shape, double rate) {
        return std::gamma_distribution<double>(shape, 1.0 / rate)(eng_);
    }

    std::uint64_t poisson(double mean) {
        return static_cast<std::uint64_t>(
            std::poisson_distribution<long long>(mean)(eng_));
    }

    // Inverse Gaussian with density
    //   f(x) = delta/sqrt(2 pi) e^{delta gam} x^{-3/2} exp(-(delta^2/x + gam^2 x)/2),
    // i.e. mean delta/gam, shape parameter delta^2 (Michael-Schucany-Haas).
    double inverse_gaussian(double delta, double gam) {
        const double mu = delta / gam;
        const double lam = delta * delta;
        const double z = normal();
        const double y = z * z;
        const double x = mu + mu * mu * y / (2.0 * lam) -
                         mu / (2.0 * lam) *
                             std::sqrt(4.0 * mu * lam * y + mu * mu * y * y);
        const double u = uniform();
        if (u <= mu / (mu + x)) return x;
        return mu * mu / x;
    }

  private:
    std::mt19937_64 eng_;
};

} // namespace lssm
