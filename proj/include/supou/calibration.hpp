#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "supou/errors.hpp"
#include "supou/measures.hpp"

namespace supou {

struct CalibrationTarget {
    CumulantSummary cumulants;                     ///< mean, variance, skewness, kurtosis (Cum4/Cum2^2)
    std::vector<std::pair<double, double>> acf;    ///< (lag in hours, correlation)
};

struct CalibrationOptions {
    int starts = 8;                  ///< deterministic start plus perturbed restarts
    std::uint64_t seed = 20160401;   ///< restart perturbations
    double acf_weight = 1.0;         ///< weight of the whole ACF block relative to one cumulant
    int max_evaluations = 4000;      ///< per start
};

struct CalibrationResult {
    BenchmarkModel model;
    double residual = 0.0;          ///< weighted residual norm
    CumulantSummary fitted;         ///< model cumulant summary
    int converged_starts = 0;
};

namespace detail {

/// Unknowns: log(A-1), log B, log c_nu, log p, s with q = 1 - e^s.
inline BenchmarkModel unpack(const Eigen::VectorXd& x) {
    BenchmarkModel m;
    m.reversion.A = 1.0 + std::exp(x[0]);
    m.reversion.B = std::exp(x[1]);
    m.levy.c_nu = std::exp(x[2]);
    m.levy.p = std::exp(x[3]);
    m.levy.q = 1.0 - std::exp(x[4]);
    return m;
}

inline Eigen::VectorXd pack(const BenchmarkModel& m) {
    Eigen::VectorXd x(5);
    x << std::log(m.reversion.A - 1.0), std::log(m.reversion.B), std::log(m.levy.c_nu), std::log(m.levy.p),
        std::log(1.0 - m.levy.q);
    return x;
}

/// log Cum_k in closed form, valid for any q < 1.
inline double log_cumulant(const Eigen::VectorXd& x, int k) {
    const double q = 1.0 - std::exp(x[4]);
    return x[2] + std::lgamma(k - q) + (q - k) * x[3] - std::log(double(k)) - x[0] - x[1];
}

struct CalibrationFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    using QRSolver = Eigen::ColPivHouseholderQR<JacobianType>;

    double log_target[4];
    std::vector<double> lags, log_acf;
    double acf_scale;

    [[nodiscard]] int inputs() const { return 5; }
    [[nodiscard]] int values() const { return 4 + static_cast<int>(lags.size()); }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
        const double l1 = log_cumulant(x, 1), l2 = log_cumulant(x, 2);
        const double l3 = log_cumulant(x, 3), l4 = log_cumulant(x, 4);
        f[0] = l1 - log_target[0];
        f[1] = l2 - log_target[1];
        f[2] = l3 - 1.5 * l2 - log_target[2];
        f[3] = l4 - 2.0 * l2 - log_target[3];
        const double a = std::exp(x[0]), B = std::exp(x[1]);
        for (std::size_t j = 0; j < lags.size(); ++j)
            f[4 + static_cast<Eigen::Index>(j)] = acf_scale * (-a * std::log1p(B * lags[j]) - log_acf[j]);
        return 0;
    }

    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& J) const {
        Eigen::VectorXd fp(values()), fm(values());
        for (int i = 0; i < 5; ++i) {
            const double h = 1e-6 * (1.0 + std::abs(x[i]));
            Eigen::VectorXd xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            (*this)(xp, fp);
            (*this)(xm, fm);
            J.col(i) = (fp - fm) / (2.0 * h);
        }
        return 0;
    }
};

/// Start from cumulant ratios and the ACF at its largest lag.
inline BenchmarkModel moment_start(const CalibrationTarget& t) {
    const auto& c = t.cumulants;
    const double c1 = c.mean, c2 = c.variance, c3 = c.skewness * std::pow(c2, 1.5);
    // Cum2/Cum1 = (1-q)/(2p), Cum3/Cum2 = 2(2-q)/(3p)
    const double r1 = c2 / c1, r2 = c3 / c2, rho = r2 / r1;
    double q = (8.0 - 3.0 * rho) / (4.0 - 3.0 * rho);
    if (!(q < 0.9) || !std::isfinite(q)) q = -0.5;
    BenchmarkModel m;
    m.levy.q = q;
    m.levy.p = (1.0 - q) / (2.0 * r1);
    m.reversion.B = 0.1;
    double hmax = 0.0, amax = 0.0;
    for (const auto& [h, a] : t.acf)
        if (h > hmax && a > 0.0) hmax = h, amax = a;
    m.reversion.A = 1.0 + std::clamp(-std::log(amax) / std::log1p(m.reversion.B * hmax), 0.05, 5.0);
    const double unit = std::tgamma(1.0 - q) * std::pow(m.levy.p, q - 1.0) / ((m.reversion.A - 1.0) * m.reversion.B);
    m.levy.c_nu = c1 / unit;
    return m;
}

}  // namespace detail

/// Moment matching of the five model parameters: log-ratio residuals on mean, variance,
/// skewness and kurtosis plus log-ACF residuals, the ACF block scaled to count like one
/// cumulant (times acf_weight). Levenberg-Marquardt from a moment-ratio start and
/// seeded perturbations of it; the best converged run wins.
/// @throws CalibrationError if no start converges
[[nodiscard]] inline CalibrationResult calibrate(const CalibrationTarget& target, const CalibrationOptions& opt = {}) {
    const auto& c = target.cumulants;
    if (!(c.mean > 0.0) || !(c.variance > 0.0))
        throw std::invalid_argument("calibration needs positive mean and variance");
    if (!(c.skewness > 0.0) || !(c.kurtosis > 0.0))
        throw std::invalid_argument("positive jumps imply positive skewness and kurtosis");
    detail::CalibrationFunctor fn;
    fn.log_target[0] = std::log(c.mean);
    fn.log_target[1] = std::log(c.variance);
    fn.log_target[2] = std::log(c.skewness);
    fn.log_target[3] = std::log(c.kurtosis);
    for (const auto& [h, a] : target.acf)
        if (h > 0.0 && a > 0.0 && std::isfinite(a)) {
            fn.lags.push_back(h);
            fn.log_acf.push_back(std::log(a));
        }
    if (fn.lags.size() < 10) throw std::invalid_argument("need positive ACF values at 10 or more lags");
    fn.acf_scale = std::sqrt(opt.acf_weight / static_cast<double>(fn.lags.size()));

    const Eigen::VectorXd x0 = detail::pack(detail::moment_start(target));
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> jitter(0.0, 0.5);

    CalibrationResult best;
    best.residual = std::numeric_limits<double>::infinity();
    double best_any = best.residual;
    for (int s = 0; s < opt.starts; ++s) {
        Eigen::VectorXd x = x0;
        if (s > 0)
            for (int i = 0; i < 5; ++i) x[i] += jitter(rng);
        Eigen::LevenbergMarquardt<detail::CalibrationFunctor> lm(fn);
        lm.setMaxfev(opt.max_evaluations);
        lm.setXtol(1e-12);
        lm.setFtol(1e-14);
        const auto status = lm.minimize(x);
        Eigen::VectorXd f(fn.values());
        fn(x, f);
        const double res = f.norm();
        if (!std::isfinite(res)) continue;
        best_any = std::min(best_any, res);
        using namespace Eigen::LevenbergMarquardtSpace;
        const bool ok = status == RelativeReductionTooSmall || status == RelativeErrorTooSmall ||
                        status == RelativeErrorAndReductionTooSmall || status == CosinusTooSmall;
        if (!ok) continue;
        ++best.converged_starts;
        if (res < best.residual) {
            best.residual = res;
            best.model = detail::unpack(x);
        }
    }
    if (best.converged_starts == 0)
        throw CalibrationError("no calibration start converged", best_any);
    best.fitted = benchmark_summary(best.model);
    return best;
}

}  // namespace supou
