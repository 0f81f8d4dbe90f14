#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "supou/errors.hpp"
#include "supou/measures.hpp"
#include "supou/quantization.hpp"

namespace supou {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

/// |alpha - 1| at or below this uses the KL branch.
inline constexpr double kKlBand = 1e-9;

[[nodiscard]] inline bool kl_branch(double a) { return std::abs(a - 1.0) <= kKlBand; }

/// e^(a L) - 1 - a (e^L - 1) without cancellation near L = 0.
[[nodiscard]] inline double pow_gap(double a, double L) {
    if (std::abs(a * L) < 0.1 && std::abs(L) < 0.1) {
        double s = 0.0, an = a, Ln = L, fact = 1.0;
        for (int n = 2; n <= 16; ++n) {
            an *= a;
            Ln *= L;
            fact *= n;
            s += (an - a) * Ln / fact;
        }
        return s;
    }
    return std::expm1(a * L) - a * std::expm1(L);
}

/// e^L (L - 1) + 1, the KL integrand x ln x - x + 1 at x = e^L.
[[nodiscard]] inline double kl_gap(double L) {
    if (std::abs(L) < 0.1) {
        double s = 0.0, Ln = L, fact = 1.0;
        for (int n = 2; n <= 16; ++n) {
            Ln *= L;
            fact *= n;
            s += (n - 1) * Ln / fact;
        }
        return s;
    }
    return std::exp(L) * (L - 1.0) + 1.0;
}

}  // namespace detail

/// Phi(w0, alpha0, x); +inf for x < 0.
[[nodiscard]] inline double phi_value(double w0, double alpha0, double x) {
    if (x < 0.0) return kInf;
    if (detail::kl_branch(alpha0)) {
        if (x == 0.0) return w0;
        return w0 * detail::kl_gap(std::log(x));
    }
    if (x == 0.0) return w0 / alpha0;
    return w0 * detail::pow_gap(alpha0, std::log(x)) / (alpha0 * (alpha0 - 1.0));
}

/// Monotone extension: zero on [0,1].
[[nodiscard]] inline double phi_bar(double w0, double alpha0, double x) {
    if (x >= 0.0 && x <= 1.0) return 0.0;
    return phi_value(w0, alpha0, x);
}

/// dPhi/dx for x > 0.
[[nodiscard]] inline double phi_derivative(double w0, double alpha0, double x) {
    if (detail::kl_branch(alpha0)) return w0 * std::log(x);
    return w0 * std::expm1((alpha0 - 1.0) * std::log(x)) / (alpha0 - 1.0);
}

/// Convex conjugate Psi(y) = sup_{x >= 0} (x y - Phi(x)).
[[nodiscard]] inline double psi_value(double w0, double alpha0, double y) {
    if (detail::kl_branch(alpha0)) {
        const double t = y / w0;
        if (t > 709.0) return kInf;
        return w0 * std::expm1(t);
    }
    const double d = (alpha0 - 1.0) * y / w0;
    if (d <= -1.0) return -w0 / alpha0;
    const double v = std::expm1(alpha0 / (alpha0 - 1.0) * std::log1p(d));
    return w0 * v / alpha0;
}

/// dPsi/dy, the optimal distortion for argument y.
[[nodiscard]] inline double psi_derivative(double w0, double alpha0, double y) {
    if (detail::kl_branch(alpha0)) {
        const double t = y / w0;
        if (t > 709.0) return kInf;
        return std::exp(t);
    }
    const double d = (alpha0 - 1.0) * y / w0;
    if (d <= -1.0) return 0.0;
    return std::exp(std::log1p(d) / (alpha0 - 1.0));
}

// ---- coefficient families -------------------------------------------------

struct AlphaConstant {
    double a = 2.5;
};
/// a0 at r = 0, a1 for r >= 1, linear in between.
struct AlphaPiecewiseLinearInR {
    double a0 = 2.5;
    double a1 = 5.0;
};
using AlphaFamily = std::variant<AlphaConstant, AlphaPiecewiseLinearInR>;

struct WeightConstant {
    double value = 1.0;
};
/// w(r) = c / (1 - e^(-W r)); c is fixed when the spec is built.
struct WeightRegularizedInverseRate {
    double W = 10.0;
};
using WeightFamily = std::variant<WeightConstant, WeightRegularizedInverseRate>;

struct Coefficients {
    double w_prime;
    double alpha;
};

/// Shape/weight families of the state-dependent divergence, immutable once built.
class DivergenceSpec {
public:
    DivergenceSpec() = default;

    /// @throws IllPosedError when alpha < 1 somewhere
    /// @throws NormalizationError when the regularized weight cannot be normalized
    DivergenceSpec(const BenchmarkModel& model, AlphaFamily alpha, WeightFamily weight, int order)
        : alpha_(alpha), weight_(weight), order_(order) {
        model.validate();
        if (order < 0) throw std::invalid_argument("divergence order m must be >= 0");
        const auto [lo, hi] = alpha_range();
        if (!(lo >= 1.0) || !std::isfinite(hi))
            throw IllPosedError("alpha must stay in [1, inf); got minimum " + std::to_string(lo));
        if (auto* wc = std::get_if<WeightConstant>(&weight_)) {
            if (!(wc->value > 0.0)) throw std::invalid_argument("constant weight must be positive");
            c_ = wc->value;
        } else {
            c_ = regularized_constant(model, std::get<WeightRegularizedInverseRate>(weight_).W);
        }
    }

    /// Constant c such that the regularized weight averages to one under p_1,
    /// i.e. c int int (1 - e^(-W r))^-1 pi(dr) nu(dz) = int int z r^-1 pi(dr) nu(dz).
    [[nodiscard]] static double regularized_constant(const BenchmarkModel& model, double W) {
        if (!(W > 0.0) || !std::isfinite(W))
            throw std::invalid_argument("regularization W must be positive and finite");
        if (!model.levy.finite_activity())
            throw NormalizationError("weight normalization diverges: Levy mass infinite (q >= 0)");
        const auto& pi = model.reversion;
        const double cpi = pi.normalization();
        auto f = [&](double r) {
            return cpi * std::pow(r, pi.A - 1.0) * std::exp(-r / pi.B) / -std::expm1(-W * r);
        };
        boost::math::quadrature::exp_sinh<double> integrator;
        const double e = integrator.integrate(f, 0.0, kInf, 1e-13);
        const double c1 = benchmark_cumulant(model, 1);
        const double c = c1 / (model.levy.total_mass() * e);
        if (!std::isfinite(c) || !(c > 0.0))
            throw NormalizationError("weight normalization integral is not finite");
        return c;
    }

    [[nodiscard]] double alpha(double r) const {
        if (auto* a = std::get_if<AlphaConstant>(&alpha_)) return a->a;
        const auto& pl = std::get<AlphaPiecewiseLinearInR>(alpha_);
        return pl.a0 + (pl.a1 - pl.a0) * std::min(1.0, std::max(0.0, r));
    }
    [[nodiscard]] double alpha_at_zero() const { return alpha(0.0); }
    [[nodiscard]] std::pair<double, double> alpha_range() const {
        if (auto* a = std::get_if<AlphaConstant>(&alpha_)) return {a->a, a->a};
        const auto& pl = std::get<AlphaPiecewiseLinearInR>(alpha_);
        return {std::min(pl.a0, pl.a1), std::max(pl.a0, pl.a1)};
    }
    [[nodiscard]] bool is_kl() const {
        const auto [lo, hi] = alpha_range();
        return detail::kl_branch(lo) && detail::kl_branch(hi);
    }

    /// w(r); only r enters in the shipped families.
    [[nodiscard]] double weight(double r) const {
        if (std::holds_alternative<WeightConstant>(weight_)) return c_;
        const double W = std::get<WeightRegularizedInverseRate>(weight_).W;
        return c_ / -std::expm1(-W * r);
    }
    /// w'(r,z) = r z^-m w(r)
    [[nodiscard]] double w_prime(double r, double z) const {
        const double zm = order_ == 0 ? 1.0 : std::pow(z, -static_cast<double>(order_));
        if (std::holds_alternative<WeightConstant>(weight_)) return r * zm * c_;
        const double W = std::get<WeightRegularizedInverseRate>(weight_).W;
        // r / (1 - e^-Wr) stays finite as r -> 0
        const double rw = W * r < 1e-8 ? 1.0 / W : r / -std::expm1(-W * r);
        return c_ * rw * zm;
    }

    [[nodiscard]] bool bounded_weight() const { return std::holds_alternative<WeightConstant>(weight_); }
    [[nodiscard]] double regularization() const {
        if (auto* w = std::get_if<WeightRegularizedInverseRate>(&weight_)) return w->W;
        return kInf;
    }
    [[nodiscard]] double normalization_constant() const { return c_; }
    [[nodiscard]] int order() const { return order_; }
    [[nodiscard]] const AlphaFamily& alpha_family() const { return alpha_; }
    [[nodiscard]] const WeightFamily& weight_family() const { return weight_; }

private:
    AlphaFamily alpha_{AlphaConstant{}};
    WeightFamily weight_{WeightConstant{}};
    int order_ = 1;
    double c_ = 1.0;
};

[[nodiscard]] inline Coefficients coefficient_eval(const DivergenceSpec& spec, double r, double z) {
    return {spec.w_prime(r, z), spec.alpha(r)};
}

/// Discretized E_m[Phi(w', alpha, phi)].
template <class Field>
[[nodiscard]] double divergence_of(const Field& field, const QuantGrid& grid, const DivergenceSpec& spec) {
    return discretized_expectation(grid, [&](double r, double z) {
        const auto c = coefficient_eval(spec, r, z);
        return phi_value(c.w_prime, c.alpha, field(r, z));
    });
}

/// Luxemburg norm inf{c > 0 : E_m[Phi_bar(w', alpha, |phi|/c)] <= 1} by log-space bisection.
template <class Field>
[[nodiscard]] double luxemburg_norm(const Field& field, const QuantGrid& grid, const DivergenceSpec& spec) {
    const std::size_t M = grid.r.size();
    std::vector<double> vals(grid.size()), wp(grid.size()), al(grid.size());
    double vmax = 0.0;
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < grid.z.size(); ++j) {
            const std::size_t n = i * grid.z.size() + j;
            vals[n] = std::abs(field(grid.r[i], grid.z[j]));
            const auto c = coefficient_eval(spec, grid.r[i], grid.z[j]);
            wp[n] = c.w_prime;
            al[n] = c.alpha;
            vmax = std::max(vmax, vals[n]);
        }
    if (!std::isfinite(vmax)) return kInf;
    if (vmax == 0.0) return 0.0;
    std::vector<double> terms(vals.size());
    auto holds = [&](double c) {
        for (std::size_t n = 0; n < vals.size(); ++n) terms[n] = phi_bar(wp[n], al[n], vals[n] / c);
        return pairwise_sum(terms) / static_cast<double>(terms.size()) <= 1.0;
    };
    double lo = 1e-12, hi = 1e12;
    while (!holds(hi)) hi *= 10.0;  // terminates: hi >= vmax always holds
    while (holds(lo)) {
        lo /= 10.0;
        if (lo < 1e-300) return 0.0;
    }
    while (hi / lo - 1.0 > 1e-8) {
        const double mid = std::sqrt(lo * hi);
        (holds(mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace supou
