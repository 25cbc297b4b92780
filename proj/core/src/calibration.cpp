#include "lssm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "lssm/errors.hpp"
#include "lssm/optim.hpp"
#include "lssm/parallel.hpp"
#include "lssm/specfun.hpp"

namespace lssm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

double sample_mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / std::max<std::size_t>(v.size() - 1, 1));
}

} // namespace

// --- deseasonalize -----------------------------------------------------------

SeasonalFit deseasonalize(const PriceSeries& s, int robust_iters) {
    s.validate(true);
    const std::size_t n = s.size();
    if (n < 100)
        throw ConfigError("deseasonalize: need at least 100 observations, "
                          "got " + std::to_string(n));
    if (robust_iters < 0)
        throw ConfigError("deseasonalize: robust_iters must be >= 0");

    SeasonalFit fit;
    const double py = fit.seasonality.period_year;
    const double pw = fit.seasonality.period_week;
    const double two_pi = 2.0 * M_PI;

    // Linearized design: beta1 cos((tau1 + 2 pi t)/P) expands into a cosine
    // and a sine column in 2 pi t / P, so the trend is linear in six
    // coefficients and the (beta, tau) pair is recovered from the pair of
    // amplitudes afterwards.
    Eigen::MatrixXd X(n, 6);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        X(i, 0) = 1.0;
        X(i, 1) = std::cos(two_pi * t / py);
        X(i, 2) = std::sin(two_pi * t / py);
        X(i, 3) = std::cos(two_pi * t / pw);
        X(i, 4) = std::sin(two_pi * t / pw);
        X(i, 5) = t;
        y(i) = std::log(s.prices[i]);
    }

    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(6);
    for (int it = 0; it <= robust_iters; ++it) {
        const Eigen::ArrayXd sw = w.array().sqrt();
        const Eigen::MatrixXd Xw = sw.matrix().asDiagonal() * X;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
        if (qr.rank() < 6 && !fit.collinear) {
            fit.collinear = true;
            fit.note = "design matrix rank " + std::to_string(qr.rank()) +
                       " < 6: seasonal coefficients not jointly identifiable";
        }
        const Eigen::VectorXd c_new = qr.solve((sw * y.array()).matrix());
        const double step = (c_new - c).cwiseAbs().maxCoeff();
        c = c_new;
        fit.iterations = it + 1;
        if (it == robust_iters) break;

        // Huber reweighting: threshold 1.345 * (MAD / 0.6745), the robust
        // scale estimate about the residual median.
        const Eigen::VectorXd r = y - X * c;
        std::vector<double> a(r.data(), r.data() + n);
        const double med = median_inplace(a);
        for (auto& v : a) v = std::abs(v - med);
        const double mad = median_inplace(a);
        const double scale = mad / 0.6745;
        if (!(scale > 0.0)) break;  // residuals numerically zero: done
        fit.huber_c = 1.345 * scale;
        for (std::size_t i = 0; i < n; ++i)
            w(i) = std::min(1.0, fit.huber_c /
                                     std::max(std::abs(r(i)), 1e-300));
        if (step < 1e-12 && it > 0) break;
    }

    Seasonality& sea = fit.seasonality;
    sea.beta0 = c(0);
    sea.beta1 = std::hypot(c(1), c(2));
    sea.tau1 = sea.beta1 > 0.0 ? py * std::atan2(-c(2), c(1)) : 0.0;
    sea.beta2 = std::hypot(c(3), c(4));
    sea.tau2 = sea.beta2 > 0.0 ? pw * std::atan2(-c(4), c(3)) : 0.0;
    sea.beta3 = c(5);

    fit.time.resize(n);
    fit.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        fit.time[i] = static_cast<double>(i);
        fit.residuals[i] = y(i) - log_seasonality(sea, fit.time[i]);
    }
    return fit;
}

// --- autocorrelation ---------------------------------------------------------

std::vector<double> empirical_acf(const std::vector<double>& x,
                                  std::size_t max_lag) {
    const std::size_t n = x.size();
    if (max_lag < 1)
        throw ConfigError("empirical_acf: max_lag must be >= 1");
    if (2 * max_lag >= n)
        throw ConfigError("empirical_acf: max_lag must be < n/2 (n = " +
                          std::to_string(n) + ", max_lag = " +
                          std::to_string(max_lag) + ")");
    const double m = sample_mean(x);
    double c0 = 0.0;
    for (double v : x) c0 += (v - m) * (v - m);
    c0 /= static_cast<double>(n);
    if (!std::isfinite(c0) || c0 <= 0.0)
        throw MathError("empirical_acf: zero-variance input");
    std::vector<double> acf(max_lag + 1);
    acf[0] = 1.0;
    for (std::size_t h = 1; h <= max_lag; ++h) {
        double ch = 0.0;
        for (std::size_t i = 0; i + h < n; ++i)
            ch += (x[i] - m) * (x[i + h] - m);
        acf[h] = ch / static_cast<double>(n) / c0;
    }
    return acf;
}

double gamma_acf_theoretical(double nu, double lambda, double h) {
    if (!(nu > 0.5))
        throw ConfigError("gamma_acf_theoretical: requires nu > 1/2");
    if (!(lambda > 0.0))
        throw ConfigError("gamma_acf_theoretical: requires lambda > 0");
    if (!(h >= 0.0))
        throw ConfigError("gamma_acf_theoretical: lag must be >= 0");
    if (h == 0.0) return 1.0;
    const double m = nu - 0.5;
    const double x = 0.5 * lambda * h;
    const double lg = m * std::log(x) + specfun::log_bessel_k(m, x) -
                      (nu - 1.5) * std::log(2.0) - specfun::lgamma_fn(m);
    return std::exp(lg);
}

// --- kernel fit --------------------------------------------------------------

std::string to_string(AcfKernelFamily f) {
    return f == AcfKernelFamily::Gamma ? "gamma" : "carma21";
}

AcfKernelFamily acf_kernel_family_from_string(const std::string& s) {
    if (s == "gamma") return AcfKernelFamily::Gamma;
    if (s == "carma21") return AcfKernelFamily::Carma21;
    throw ConfigError("unknown acf kernel family '" + s +
                      "' (expected gamma or carma21)");
}

namespace {

// Stationary overlap of the CARMA(2,1) kernel g(t) = b' e^{At} e_2 with
// A = [[0,1],[-a2,-a1]], b = (b0, 1)': overlap(h) = b' e^{Ah} V b where the
// Gramian V = int_0^inf e^{Ax} e_2 e_2' e^{A'x} dx solves the Lyapunov
// equation A V + V A' + e_2 e_2' = 0, which for this companion form gives
// V = diag(1/(2 a1 a2), 1/(2 a1)).  Requires a1 > 0, a2 > 0 (stability).
Eigen::Matrix2d carma21_companion(double a1, double a2) {
    Eigen::Matrix2d A;
    A << 0.0, 1.0, -a2, -a1;
    return A;
}

double carma21_overlap(const Eigen::Matrix2d& exp_Ah, double a1, double a2,
                       double b0) {
    const Eigen::Vector2d b(b0, 1.0);
    const Eigen::Vector2d vb(b0 / (2.0 * a1 * a2), 1.0 / (2.0 * a1));
    return b.dot(exp_Ah * vb);
}

// Model ACF at integer lags 1..lags for a parameter proposal; the matrix
// exponential at lag 1 is reused multiplicatively across lags.
std::vector<double> carma21_acf_lags(double a1, double a2, double b0,
                                     std::size_t lags) {
    const double l2 = carma21_overlap(Eigen::Matrix2d::Identity(), a1, a2, b0);
    const Eigen::Matrix2d e1 = (carma21_companion(a1, a2) * 1.0).exp();
    std::vector<double> out(lags);
    Eigen::Matrix2d eh = Eigen::Matrix2d::Identity();
    for (std::size_t h = 1; h <= lags; ++h) {
        eh = eh * e1;
        out[h - 1] = carma21_overlap(eh, a1, a2, b0) / l2;
    }
    return out;
}

struct StartResult {
    std::vector<double> x;
    double sse = kInf;
    bool converged = false;
};

// Runs deterministic multi-start Nelder-Mead and keeps the strictly best
// result (ties resolved in start order, so repeated calls are bitwise
// reproducible).
StartResult best_of_starts(const optim::ObjFn& f,
                           const std::vector<std::vector<double>>& starts) {
    StartResult best;
    for (const auto& x0 : starts) {
        const optim::NmResult r = optim::nelder_mead_restarted(f, x0, 2);
        if (r.fval < best.sse) {
            best.x = r.x;
            best.sse = r.fval;
            best.converged = r.converged;
        }
    }
    if (best.x.empty())
        throw MathError("fit_kernel_acf: all starts produced non-finite "
                        "objective values");
    return best;
}

} // namespace

AcfFitResult fit_kernel_acf(const std::vector<double>& emp,
                            AcfKernelFamily family, std::size_t lags) {
    if (lags < 1)
        throw ConfigError("fit_kernel_acf: lags must be >= 1");
    if (emp.size() < lags + 1)
        throw ConfigError("fit_kernel_acf: empirical acf has " +
                          std::to_string(emp.size()) + " entries, need " +
                          std::to_string(lags + 1));
    if (std::abs(emp[0] - 1.0) > 1e-6)
        throw ConfigError("fit_kernel_acf: emp[0] must be 1 (normalized acf)");
    for (std::size_t h = 0; h <= lags; ++h)
        if (!std::isfinite(emp[h]))
            throw ConfigError("fit_kernel_acf: non-finite acf entry");

    AcfFitResult res;
    res.lags_used = lags;
    res.empirical.assign(emp.begin(), emp.begin() +
                                          static_cast<std::ptrdiff_t>(lags + 1));
    if (lags < 5)
        res.note = "underdetermined: fewer than 5 lags; fit returned but "
                   "poorly constrained";

    auto append_note = [&res](const std::string& msg) {
        if (!res.note.empty()) res.note += "; ";
        res.note += msg;
    };

    if (family == AcfKernelFamily::Gamma) {
        // Unconstrained parametrisation nu = 1/2 + e^{u0}, lambda = e^{u1};
        // box |u| <= 25 keeps the Bessel evaluation in range.
        const optim::ObjFn f = [&](const std::vector<double>& u) {
            if (std::abs(u[0]) > 25.0 || std::abs(u[1]) > 25.0) return kInf;
            const double nu = 0.5 + std::exp(u[0]);
            const double lambda = std::exp(u[1]);
            double sse = 0.0;
            for (std::size_t h = 1; h <= lags; ++h) {
                const double d = gamma_acf_theoretical(
                                     nu, lambda, static_cast<double>(h)) -
                                 emp[h];
                sse += d * d;
            }
            return sse;
        };
        // Data-informed decay start from the lag-1 autocorrelation (the
        // nu = 1 collapse gives acf(1) = e^{-lambda/2}), plus fixed spreads.
        const double lam_emp =
            -2.0 * std::log(std::clamp(emp[1], 0.05, 0.95));
        std::vector<std::vector<double>> starts;
        for (double nu0 : {0.7, 1.0, 1.6})
            starts.push_back({std::log(nu0 - 0.5), std::log(lam_emp)});
        starts.push_back({std::log(0.5), std::log(0.1)});
        starts.push_back({std::log(0.5), std::log(1.0)});

        const StartResult best = best_of_starts(f, starts);
        const double nu = 0.5 + std::exp(best.x[0]);
        const double lambda = std::exp(best.x[1]);
        if (std::abs(best.x[0]) > 20.0 || std::abs(best.x[1]) > 20.0)
            append_note("parameter at transformed bound");
        res.kernel = std::make_shared<GammaKernel>(nu, lambda);
        res.sse = best.sse;
        res.converged = best.converged;
        res.fitted.resize(lags + 1);
        res.fitted[0] = 1.0;
        for (std::size_t h = 1; h <= lags; ++h)
            res.fitted[h] =
                gamma_acf_theoretical(nu, lambda, static_cast<double>(h));
        return res;
    }

    // CARMA(2,1): raw parameters (a1, a2, b0) with b1 = 1; proposals outside
    // the stationarity region a1 > 0, a2 > 0 (both companion eigenvalues in
    // the left half-plane) are rejected before any kernel is built.
    const optim::ObjFn f = [&](const std::vector<double>& p) {
        const double a1 = p[0], a2 = p[1], b0 = p[2];
        if (!(a1 > 0.0) || !(a2 > 0.0)) return kInf;
        if (a1 > 1e6 || a2 > 1e6 || std::abs(b0) > 1e6) return kInf;
        const std::vector<double> model = carma21_acf_lags(a1, a2, b0, lags);
        double sse = 0.0;
        for (std::size_t h = 1; h <= lags; ++h) {
            if (!std::isfinite(model[h - 1])) return kInf;
            const double d = model[h - 1] - emp[h];
            sse += d * d;
        }
        return sse;
    };
    const std::vector<std::vector<double>> starts = {
        {1.0, 0.5, 0.5}, {0.5, 0.1, 1.0}, {2.0, 1.0, 0.2}};
    const StartResult best = best_of_starts(f, starts);
    const double a1 = best.x[0], a2 = best.x[1], b0 = best.x[2];
    if (a1 < 1e-6 || a2 < 1e-6 || a1 > 1e5 || a2 > 1e5 ||
        std::abs(b0) > 1e5)
        append_note("parameter at bound");
    res.kernel = std::make_shared<CarmaKernel>(std::vector<double>{a1, a2},
                                               std::vector<double>{b0, 1.0});
    res.sse = best.sse;
    res.converged = best.converged;
    res.fitted.resize(lags + 1);
    res.fitted[0] = 1.0;
    const std::vector<double> model = carma21_acf_lags(a1, a2, b0, lags);
    std::copy(model.begin(), model.end(), res.fitted.begin() + 1);
    return res;
}

// --- pipeline ----------------------------------------------------------------

namespace {

template <class Fn>
auto run_stage(int k, const char* name, Fn&& fn) -> decltype(fn()) {
    const std::string prefix =
        "pipeline stage " + std::to_string(k) + " (" + name + "): ";
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const MathError& e) {
        throw MathError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    }
}

std::ofstream open_table(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
    f << std::setprecision(17);
    return f;
}

nlohmann::json fitted_model_json(const FittedModel& m) {
    return {{"family", to_string(m.family)},
            {"symmetric", m.symmetric},
            {"n_params", m.n_params},
            {"log_likelihood", m.log_likelihood},
            {"aic", m.aic},
            {"converged", m.converged},
            {"params",
             {{"lambda", m.params.lambda},
              {"alpha_bar", m.params.alpha_bar},
              {"mu", m.params.mu},
              {"sigma", m.params.sigma},
              {"gamma", m.params.gamma}}}};
}

nlohmann::json acf_fit_json(const AcfFitResult& f) {
    return {{"kernel", f.kernel ? f.kernel->to_json() : nlohmann::json()},
            {"sse", f.sse},
            {"lags_used", f.lags_used},
            {"converged", f.converged},
            {"note", f.note},
            {"fitted", f.fitted}};
}

void write_artifacts(const std::string& dir, const PipelineReport& rep) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "tables", ec);
    if (ec)
        throw IoError("cannot create output directory '" + dir +
                      "': " + ec.message());
    write_json((fs::path(dir) / "report.json").string(), rep.to_json());

    {
        std::ofstream f = open_table(fs::path(dir) / "tables/marginals.csv");
        f << "family,symmetric,n_params,log_likelihood,aic,converged,"
             "lambda,alpha_bar,mu,sigma,gamma\n";
        for (const auto& m : rep.marginals)
            f << to_string(m.family) << ',' << (m.symmetric ? 1 : 0) << ','
              << m.n_params << ',' << m.log_likelihood << ',' << m.aic << ','
              << (m.converged ? 1 : 0) << ',' << m.params.lambda << ','
              << m.params.alpha_bar << ',' << m.params.mu << ','
              << m.params.sigma << ',' << m.params.gamma << '\n';
        if (!f) throw IoError("write failed for tables/marginals.csv");
    }
    {
        std::ofstream f = open_table(fs::path(dir) / "tables/acf.csv");
        f << "lag,empirical,gamma_fit,carma_fit\n";
        for (std::size_t h = 0; h < rep.acf.size(); ++h)
            f << h << ',' << rep.acf[h] << ',' << rep.gamma_fit.fitted[h]
              << ',' << rep.carma_fit.fitted[h] << '\n';
        if (!f) throw IoError("write failed for tables/acf.csv");
    }
    {
        std::ofstream f = open_table(fs::path(dir) / "tables/seasonality.csv");
        const Seasonality& s = rep.seasonal.seasonality;
        f << "name,value\n"
          << "beta0," << s.beta0 << '\n'
          << "beta1," << s.beta1 << '\n'
          << "beta2," << s.beta2 << '\n'
          << "beta3," << s.beta3 << '\n'
          << "tau1," << s.tau1 << '\n'
          << "tau2," << s.tau2 << '\n'
          << "huber_c," << rep.seasonal.huber_c << '\n'
          << "iterations," << rep.seasonal.iterations << '\n'
          << "collinear," << (rep.seasonal.collinear ? 1 : 0) << '\n';
        if (!f) throw IoError("write failed for tables/seasonality.csv");
    }
}

} // namespace

nlohmann::json PipelineReport::to_json() const {
    nlohmann::json marg = nlohmann::json::array();
    for (const auto& m : marginals) marg.push_back(fitted_model_json(m));
    return {{"seasonality", seasonal.seasonality.to_json()},
            {"seasonal_fit",
             {{"iterations", seasonal.iterations},
              {"huber_c", seasonal.huber_c},
              {"collinear", seasonal.collinear},
              {"note", seasonal.note},
              {"n", seasonal.residuals.size()},
              {"residual_mean", seasonal.residuals.empty()
                                    ? 0.0
                                    : sample_mean(seasonal.residuals)},
              {"residual_sd", seasonal.residuals.empty()
                                  ? 0.0
                                  : sample_sd(seasonal.residuals)}}},
            {"marginals", marg},
            {"acf", acf},
            {"kernel_fits",
             {{"gamma", acf_fit_json(gamma_fit)},
              {"carma21", acf_fit_json(carma_fit)}}}};
}

PipelineReport run_pipeline(const PriceSeries& s, const PipelineConfig& cfg) {
    PipelineReport rep;
    run_stage(0, "input", [&] {
        s.validate(true);
        return 0;
    });
    rep.seasonal = run_stage(1, "deseasonalize", [&] {
        return deseasonalize(s, cfg.robust_iters);
    });
    rep.marginals = run_stage(2, "marginal fit", [&] {
        struct FitCfg {
            GhFamily family;
            bool symmetric;
        };
        std::vector<FitCfg> cfgs;
        for (GhFamily fam : {GhFamily::Ghyp, GhFamily::Nig, GhFamily::StudentT,
                             GhFamily::Hyp, GhFamily::Vg})
            for (bool sym : {true, false}) cfgs.push_back({fam, sym});
        cfgs.push_back({GhFamily::Gaussian, true});
        std::vector<FittedModel> models(cfgs.size());
        parallel_for(
            cfgs.size(),
            [&](std::size_t i) {
                models[i] = fit_gh_family(rep.seasonal.residuals,
                                          cfgs[i].family, cfgs[i].symmetric);
            },
            cfg.threads);
        return rank_by_aic(std::move(models));
    });
    const std::size_t n = rep.seasonal.residuals.size();
    const std::size_t lags =
        cfg.acf_lags > 0
            ? cfg.acf_lags
            : static_cast<std::size_t>(
                  std::floor(std::sqrt(static_cast<double>(n))));
    rep.acf = run_stage(3, "empirical acf", [&] {
        return empirical_acf(rep.seasonal.residuals, lags);
    });
    rep.gamma_fit = run_stage(4, "kernel fit gamma", [&] {
        return fit_kernel_acf(rep.acf, AcfKernelFamily::Gamma, lags);
    });
    rep.carma_fit = run_stage(4, "kernel fit carma21", [&] {
        return fit_kernel_acf(rep.acf, AcfKernelFamily::Carma21, lags);
    });
    if (!cfg.out_dir.empty())
        run_stage(5, "artifacts", [&] {
            write_artifacts(cfg.out_dir, rep);
            return 0;
        });
    return rep;
}

} // namespace lssm
