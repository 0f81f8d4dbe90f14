#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "supou/errors.hpp"

namespace supou {

/// Gamma law of reversion speeds, density c_pi r^(A-1) e^(-r/B).
struct GammaReversionMeasure {
    double A = 1.502;  ///< shape
    double B = 0.1282; ///< scale (1/h)

    void validate() const {
        if (!(A > 1.0) || !std::isfinite(A))
            throw std::invalid_argument("reversion shape A must exceed 1");
        if (!(B > 0.0) || !std::isfinite(B))
            throw std::invalid_argument("reversion scale B must be positive");
    }
    [[nodiscard]] double normalization() const {
        return 1.0 / (std::tgamma(A) * std::pow(B, A));
    }
    [[nodiscard]] double density(double r) const {
        if (r <= 0.0) return 0.0;
        return normalization() * std::pow(r, A - 1.0) * std::exp(-r / B);
    }
};

/// Tempered-stable jump measure c_nu z^(-q-1) e^(-p z).
struct TemperedStableLevyMeasure {
    double c_nu = 2.856e-3;
    double p = 7.474e-3;
    double q = -0.2429;

    void validate() const {
        if (!(c_nu >= 0.0) || !std::isfinite(c_nu))
            throw std::invalid_argument("Levy intensity c_nu must be nonnegative");
        if (!(p > 0.0) || !std::isfinite(p))
            throw std::invalid_argument("Levy tilting p must be positive");
        if (!(q < 1.0) || !std::isfinite(q))
            throw std::invalid_argument("Levy stability q must be below 1");
    }
    [[nodiscard]] double density(double z) const {
        if (z <= 0.0) return 0.0;
        return c_nu * std::pow(z, -q - 1.0) * std::exp(-p * z);
    }
    [[nodiscard]] bool finite_activity() const { return q < 0.0; }
    /// Total mass c_nu Gamma(-q) p^q; throws for q >= 0.
    [[nodiscard]] double total_mass() const {
        if (!finite_activity())
            throw InfiniteActivityError("Levy measure has infinite mass for q >= 0");
        return c_nu * std::tgamma(-q) * std::pow(p, q);
    }
    /// int z^k nu(dz) for k - q > 0.
    [[nodiscard]] double moment(double k) const {
        if (!(k - q > 0.0))
            throw DivergentMomentError("Levy moment of order " + std::to_string(k) +
                                       " diverges (k - q <= 0)");
        return c_nu * std::tgamma(k - q) * std::pow(p, q - k);
    }
};

struct BenchmarkModel {
    GammaReversionMeasure reversion;
    TemperedStableLevyMeasure levy;

    void validate() const {
        reversion.validate();
        levy.validate();
    }
    /// int r^-1 pi(dr) = 1 / ((A-1) B)
    [[nodiscard]] double inverse_rate_mean() const {
        return 1.0 / ((reversion.A - 1.0) * reversion.B);
    }
    static BenchmarkModel kazarashi() { return {}; }
};

/// Gamma distribution by shape and scale.
struct GammaMarginal {
    double shape = 1.0;
    double scale = 1.0;

    [[nodiscard]] double mean() const { return shape * scale; }
    [[nodiscard]] double variance() const { return shape * scale * scale; }
    [[nodiscard]] double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        return boost::math::gamma_p(shape, x / scale);
    }
    [[nodiscard]] double pdf(double x) const {
        if (x <= 0.0) return 0.0;
        return boost::math::gamma_p_derivative(shape, x / scale) / scale;
    }
};

/// p_m(dr,dz) proportional to z^m r^-1 pi(dr) nu(dz), normalized.
struct BaseMeasure {
    int m = 1;
    GammaMarginal r_marginal;
    GammaMarginal z_marginal;
    double c_m = 0.0;  ///< benchmark cumulant of order m; for m = 0 the total base mass

    /// int int z^m r^-1 pi nu, i.e. the factor turning E_m back into the raw integral.
    [[nodiscard]] double mass() const { return m == 0 ? c_m : m * c_m; }
};

[[nodiscard]] inline double benchmark_cumulant(const BenchmarkModel& model, int k) {
    model.validate();
    if (k < 1) throw std::invalid_argument("cumulant order must be >= 1");
    return model.levy.moment(k) * model.inverse_rate_mean() / k;
}

[[nodiscard]] inline double benchmark_acf(const BenchmarkModel& model, double h) {
    model.validate();
    if (!(h >= 0.0)) throw std::invalid_argument("lag must be nonnegative");
    if (!(2.0 - model.levy.q > 0.0))
        throw DivergentMomentError("variance is infinite, ACF undefined");
    return std::pow(1.0 + model.reversion.B * h, -(model.reversion.A - 1.0));
}

[[nodiscard]] inline BaseMeasure base_measure(const BenchmarkModel& model, int m) {
    model.validate();
    if (m < 0) throw std::invalid_argument("base measure order must be >= 0");
    const auto& lv = model.levy;
    if (m == 0 && !lv.finite_activity())
        throw InfiniteActivityError("order-0 base measure needs q < 0 (finite activity)");
    if (!(m - lv.q > 0.0))
        throw DivergentMomentError("base measure z-marginal not normalizable (m - q <= 0)");
    BaseMeasure b;
    b.m = m;
    b.r_marginal = {model.reversion.A - 1.0, model.reversion.B};
    b.z_marginal = {m - lv.q, 1.0 / lv.p};
    if (m == 0) {
        b.c_m = lv.total_mass() * model.inverse_rate_mean();
    } else {
        b.c_m = benchmark_cumulant(model, m);
    }
    return b;
}

/// Mean, variance and the dimensionless third and fourth cumulant ratios.
struct CumulantSummary {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  ///< Cum4 / Cum2^2
};

[[nodiscard]] inline CumulantSummary standardize(double c1, double c2, double c3, double c4) {
    return {c1, c2, c3 / std::pow(c2, 1.5), c4 / (c2 * c2)};
}

[[nodiscard]] inline CumulantSummary benchmark_summary(const BenchmarkModel& model) {
    return standardize(benchmark_cumulant(model, 1), benchmark_cumulant(model, 2),
                       benchmark_cumulant(model, 3), benchmark_cumulant(model, 4));
}

}  // namespace supou
