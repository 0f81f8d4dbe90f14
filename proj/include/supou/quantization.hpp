#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "supou/measures.hpp"

namespace supou {

/// Quantile of the unit-scale gamma law at probability u in (0,1).
/// Bracketed bisection in log x, polished with safeguarded Newton steps.
[[nodiscard]] inline double gamma_quantile(double shape, double u) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be positive");
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("probability must lie in (0,1)");
    using boost::math::gamma_p;
    using boost::math::gamma_q;
    // residual in whichever tail is better conditioned
    const bool upper = u > 0.5;
    const double target = upper ? 1.0 - u : u;
    auto resid = [&](double x) { return upper ? target - gamma_q(shape, x) : gamma_p(shape, x) - target; };

    // small-x asymptote P ~ x^a / Gamma(a+1) gives a starting scale
    double x0 = std::pow(u * std::tgamma(shape + 1.0), 1.0 / shape);
    if (!std::isfinite(x0) || x0 <= 0.0) x0 = shape;
    double lo = x0, hi = x0;
    while (resid(lo) > 0.0) lo *= 0.5;
    while (resid(hi) < 0.0) hi *= 2.0;
    if (lo == hi) return lo;

    double x = std::sqrt(lo * hi);
    for (int it = 0; it < 400; ++it) {
        const double f = resid(x);
        if (f == 0.0) return x;
        (f < 0.0 ? lo : hi) = x;
        if (hi - lo <= 1e-15 * hi) break;
        const double d = boost::math::gamma_p_derivative(shape, x);
        double nx = x - f / d;
        if (!(d > 0.0) || !(nx > lo && nx < hi)) {
            nx = hi / lo > 4.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        } else if (std::abs(nx - x) <= 1e-14 * x) {
            return nx;
        }
        x = nx;
    }
    return x;
}

[[nodiscard]] inline double quantile(const GammaMarginal& g, double u) {
    return g.scale * gamma_quantile(g.shape, u);
}

/// Midpoint-quantile nodes of both marginals of a base measure.
struct QuantGrid {
    int M = 0;
    std::vector<double> r;  ///< r-nodes (1/h)
    std::vector<double> z;  ///< z-nodes (m3/s)
    BaseMeasure base;

    [[nodiscard]] std::size_t size() const { return r.size() * z.size(); }
};

[[nodiscard]] inline std::vector<double> midpoint_quantiles(const GammaMarginal& g, int M) {
    if (M < 2) throw std::invalid_argument("grid resolution must be >= 2");
    if (!(g.shape > 0.0)) throw std::invalid_argument("marginal shape must be positive");
    std::vector<double> x(static_cast<std::size_t>(M));
    for (int i = 1; i <= M; ++i)
        x[static_cast<std::size_t>(i - 1)] = quantile(g, (2.0 * i - 1.0) / (2.0 * M));
    return x;
}

[[nodiscard]] inline QuantGrid build_grid(const BaseMeasure& base, int M) {
    QuantGrid g;
    g.M = M;
    g.r = midpoint_quantiles(base.r_marginal, M);
    g.z = midpoint_quantiles(base.z_marginal, M);
    g.base = base;
    return g;
}

/// Fixed-order pairwise summation; the result depends only on the input order.
[[nodiscard]] inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

/// Equal-weight average of f(r,z) over the M x M node pairs.
template <class F>
[[nodiscard]] double discretized_expectation(const QuantGrid& grid, F&& f) {
    const std::size_t M = grid.r.size();
    std::vector<double> row(grid.z.size()), rows(M);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j < grid.z.size(); ++j) {
            const double v = f(grid.r[i], grid.z[j]);
            if (std::isnan(v)) throw std::domain_error("integrand is NaN at a grid node");
            row[j] = v;
        }
        rows[i] = pairwise_sum(row);
    }
    return pairwise_sum(rows) / static_cast<double>(grid.size());
}

}  // namespace supou
