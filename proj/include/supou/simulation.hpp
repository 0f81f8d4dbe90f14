#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "supou/dual_optimizer.hpp"
#include "supou/errors.hpp"
#include "supou/measures.hpp"
#include "supou/quantization.hpp"

namespace supou {

inline constexpr double kHoursPerYear = 8760.0;

/// One OU component: reversion speed, compound-Poisson intensity and gamma jump law.
struct Component {
    double r = 0.0;
    double weight = 0.0;     ///< r / (B (A-1) M_sim)
    double lambda = 0.0;     ///< jumps per hour
    double shape = 0.0;      ///< gamma shape -q of the (proposal) jump law
    double rate = 0.0;       ///< gamma rate of the (proposal) jump law
    double jump_mean = 0.0;  ///< E[J] under the actual jump law
    double jump_m2 = 0.0;    ///< E[J^2]
    double envelope = 0.0;   ///< rejection bound; 0 for exact gamma jumps
};

struct ComponentSet {
    std::vector<Component> items;
    double levy_p = 0.0;  ///< undistorted tilting, used by the rejection step
    /// phi*(r, z) for rejection sampling; empty when jumps are exact gamma draws
    std::function<double(double, double)> field;
    std::string provenance = "benchmark";

    [[nodiscard]] std::size_t size() const { return items.size(); }
    [[nodiscard]] double total_intensity() const {
        double s = 0.0;
        for (const auto& c : items) s += c.lambda;
        return s;
    }
    /// sum_i lambda_i E[J_i] / r_i
    [[nodiscard]] double stationary_mean() const {
        double s = 0.0;
        for (const auto& c : items) s += c.lambda * c.jump_mean / c.r;
        return s;
    }
    /// sum_i lambda_i E[J_i^2] / (2 r_i), continuous-time value
    [[nodiscard]] double stationary_variance() const {
        double s = 0.0;
        for (const auto& c : items) s += c.lambda * c.jump_m2 / (2.0 * c.r);
        return s;
    }
};

namespace detail {

/// Midpoint quantiles of gamma(A-1, B) and their superposition weights.
inline void place_components(const BenchmarkModel& model, int M, ComponentSet& set) {
    if (M < 1) throw std::invalid_argument("component count must be positive");
    if (!model.levy.finite_activity())
        throw InfiniteActivityError("jump simulation needs finite activity (q < 0)");
    const double A = model.reversion.A, B = model.reversion.B;
    const GammaMarginal rm{A - 1.0, B};
    set.items.resize(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        auto& c = set.items[static_cast<std::size_t>(i)];
        c.r = quantile(rm, (2.0 * i + 1.0) / (2.0 * M));
        c.weight = c.r / (B * (A - 1.0) * M);
    }
    set.levy_p = model.levy.p;
}

inline void gamma_jumps(Component& c, const TemperedStableLevyMeasure& lv, double rate) {
    const double s = -lv.q;
    c.shape = s;
    c.rate = rate;
    c.lambda = c.weight * lv.c_nu * std::tgamma(s) * std::pow(rate, lv.q);
    c.jump_mean = s / rate;
    c.jump_m2 = s * (s + 1.0) / (rate * rate);
    c.envelope = 0.0;
}

}  // namespace detail

/// Benchmark components (phi = 1).
[[nodiscard]] inline ComponentSet build_components(const BenchmarkModel& model, int M_sim) {
    model.validate();
    ComponentSet set;
    detail::place_components(model, M_sim, set);
    for (auto& c : set.items) detail::gamma_jumps(c, model.levy, model.levy.p);
    return set;
}

/// Components under a worst-case distortion. The KL (0,1) field is an exponential tilt and
/// gives exact gamma jumps with rate p -+ theta(r_i); any other field is sampled by rejection
/// from gamma(-q, p/2) with a per-component bound on phi* e^(-p z / 2).
/// @throws InadmissibleTiltingError if some tilted rate is not positive
[[nodiscard]] inline ComponentSet build_components(const BenchmarkModel& model, const DistortionField& field,
                                                   int M_sim) {
    model.validate();
    ComponentSet set;
    detail::place_components(model, M_sim, set);
    const auto& lv = model.levy;
    const double sgn = field.direction() == Direction::Upper ? 1.0 : -1.0;
    if (field.exponential_tilt()) {
        set.provenance = std::string("kl-tilt-") + to_string(field.direction());
        for (std::size_t i = 0; i < set.items.size(); ++i) {
            auto& c = set.items[i];
            const double rate = lv.p - sgn * field.tilting(c.r);
            if (!(rate > 0.0))
                throw InadmissibleTiltingError("tilted jump rate p - theta(r) is not positive at component " +
                                                   std::to_string(i),
                                               i);
            detail::gamma_jumps(c, lv, rate);
        }
        return set;
    }

    set.provenance = std::string("rejection-") + to_string(field.direction());
    set.field = [field](double r, double z) { return field(r, z); };
    const double s = -lv.q, base = lv.c_nu * std::tgamma(s) * std::pow(lv.p, lv.q);
    const double pe = 0.5 * lv.p;
    boost::math::quadrature::exp_sinh<double> quad;
    for (auto& c : set.items) {
        // moments of phi* under the normalized gamma(-q, p) law
        auto dens = [&](double z) { return std::exp(s * std::log(lv.p) + (s - 1.0) * std::log(z) - lv.p * z - std::lgamma(s)); };
        const double e0 = quad.integrate([&](double z) { return dens(z) * field(c.r, z); }, 0.0, kInf, 1e-10);
        const double e1 = quad.integrate([&](double z) { return z * dens(z) * field(c.r, z); }, 0.0, kInf, 1e-10);
        const double e2 = quad.integrate([&](double z) { return z * z * dens(z) * field(c.r, z); }, 0.0, kInf, 1e-10);
        c.lambda = c.weight * base * e0;
        c.jump_mean = e0 > 0.0 ? e1 / e0 : 0.0;
        c.jump_m2 = e0 > 0.0 ? e2 / e0 : 0.0;
        c.shape = s;
        c.rate = pe;
        // sup_z phi*(r,z) e^(-(p - pe) z): log grid, then a local refinement, then a margin
        auto ratio = [&](double z) { return field(c.r, z) * std::exp(-(lv.p - pe) * z); };
        double best = 0.0, bz = 0.0;
        for (double z = 1e-6 / lv.p; z < 400.0 / lv.p; z *= 1.01) {
            const double v = ratio(z);
            if (v > best) best = v, bz = z;
        }
        for (double z = bz / 1.01; z < bz * 1.01; z *= 1.0001) best = std::max(best, ratio(z));
        c.envelope = 1.02 * std::max(best, ratio(0.0));
    }
    return set;
}

struct SimulationConfig {
    double dt = 0.01;                         ///< integration step (h)
    double sampling = 1.0;                    ///< output step (h)
    double horizon = 50.0 * kHoursPerYear;    ///< recorded length (h)
    double burn_in = 50.0 * kHoursPerYear;    ///< discarded prefix (h)
    std::uint64_t seed = 1;
    bool exact_decay = false;                 ///< e^(-r dt) per step instead of 1 - r dt
    std::vector<double> initial;              ///< X_i at time 0; empty means all zero

    [[nodiscard]] long steps_per_sample() const { return std::lround(sampling / dt); }
    void validate() const {
        if (!(dt > 0.0) || !(sampling > 0.0)) throw std::invalid_argument("time steps must be positive");
        if (dt > sampling) throw std::invalid_argument("integration step exceeds the sampling step");
        if (std::abs(steps_per_sample() * dt - sampling) > 1e-9 * sampling)
            throw std::invalid_argument("sampling step must be an integer multiple of dt");
        if (!(horizon > 0.0) || !(burn_in >= 0.0)) throw std::invalid_argument("horizon must be positive");
        for (double x : initial)
            if (!(x >= 0.0)) throw std::invalid_argument("initial component values must be nonnegative");
    }
};

struct SamplePath {
    std::vector<double> time;   ///< hours after burn-in
    std::vector<double> value;  ///< m3/s
};

/// Euler superposition X = sum_i X_i with X_i <- X_i (1 - r_i dt) + (jumps in the step).
/// Jumps arrive as a Poisson process in continuous time and enter at the end of the step
/// containing them, which has the law of per-step Poisson(lambda dt) counts; between samples
/// only the arrivals are visited. Component i draws from its own stream seeded by (seed, i),
/// starting from cfg.initial (zero by default).
/// @throws StabilityError if r_i dt >= 1 with the explicit decay
[[nodiscard]] inline SamplePath simulate_path(const ComponentSet& comps, const SimulationConfig& cfg) {
    cfg.validate();
    if (!cfg.initial.empty() && cfg.initial.size() != comps.size())
        throw std::invalid_argument("initial state needs one value per component");
    const long S = cfg.steps_per_sample();
    const auto nburn = static_cast<long>(std::llround(cfg.burn_in / cfg.sampling));
    const auto nrec = static_cast<long>(std::llround(cfg.horizon / cfg.sampling));
    SamplePath path;
    path.time.resize(static_cast<std::size_t>(nrec));
    path.value.assign(static_cast<std::size_t>(nrec), 0.0);
    for (long k = 0; k < nrec; ++k) path.time[static_cast<std::size_t>(k)] = (k + 1) * cfg.sampling;

    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& c = comps.items[i];
        if (!cfg.exact_decay && c.r * cfg.dt >= 1.0)
            throw StabilityError("r dt >= 1 at component " + std::to_string(i) + "; reduce dt");
        const double f = cfg.exact_decay ? std::exp(-c.r * cfg.dt) : 1.0 - c.r * cfg.dt;
        std::vector<double> fpow(static_cast<std::size_t>(S) + 1);
        fpow[0] = 1.0;
        for (long j = 1; j <= S; ++j) fpow[static_cast<std::size_t>(j)] = fpow[static_cast<std::size_t>(j - 1)] * f;
        const double fS = fpow[static_cast<std::size_t>(S)];

        std::seed_seq sq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(i)};
        std::mt19937_64 rng(sq);
        std::exponential_distribution<double> gap(c.lambda > 0.0 ? c.lambda : 1.0);
        std::gamma_distribution<double> jump(c.shape > 0.0 ? c.shape : 1.0, c.rate > 0.0 ? 1.0 / c.rate : 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        auto draw_jump = [&]() {
            if (c.envelope == 0.0) return jump(rng);
            for (;;) {
                const double z = jump(rng);
                const double a = comps.field(c.r, z) * std::exp(-(comps.levy_p - c.rate) * z) / c.envelope;
                if (a > 1.0) throw std::logic_error("rejection envelope below the target density");
                if (unif(rng) < a) return z;
            }
        };

        // step index of the next arrival (the step whose end receives it)
        const double inf_step = static_cast<double>((nburn + nrec + 1) * S);
        double t_next = c.lambda > 0.0 ? gap(rng) : kInf;
        auto step_of = [&](double t) { return std::min(std::floor(t / cfg.dt), inf_step); };
        double next = step_of(t_next);
        double x = cfg.initial.empty() ? 0.0 : cfg.initial[i];
        for (long k = 0; k < nburn + nrec; ++k) {
            x *= fS;
            const double end = static_cast<double>((k + 1) * S);
            while (next < end) {
                const auto lag = static_cast<std::size_t>(end - 1.0 - next);
                x += draw_jump() * fpow[lag];
                t_next += gap(rng);
                next = step_of(t_next);
            }
            if (k >= nburn) path.value[static_cast<std::size_t>(k - nburn)] += x;
        }
    }
    return path;
}

}  // namespace supou
