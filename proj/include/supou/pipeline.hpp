#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "supou/calibration.hpp"
#include "supou/config.hpp"
#include "supou/dual_optimizer.hpp"
#include "supou/io.hpp"
#include "supou/pathstats.hpp"
#include "supou/simulation.hpp"

namespace supou {

// ---- fit ------------------------------------------------------------------------

struct SeriesSummary {
    CumulantSummary cumulants;
    std::vector<std::pair<double, double>> acf;  ///< (lag h, value) for present lags
    std::size_t count = 0;
    std::size_t missing = 0;
};

[[nodiscard]] inline SeriesSummary summarize_series(std::span<const double> x, int max_lag, double sampling = 1.0) {
    SeriesSummary s;
    s.cumulants = cumulant_stats(x);
    s.count = x.size();
    for (double v : x) s.missing += is_missing(v) ? 1 : 0;
    const auto acf = empirical_acf(x, static_cast<std::size_t>(max_lag));
    for (std::size_t h = 1; h < acf.size(); ++h)
        if (acf[h]) s.acf.push_back({static_cast<double>(h) * sampling, *acf[h]});
    return s;
}

/// Parameters, then model cumulants next to the empirical value and relative error.
[[nodiscard]] inline Table parameter_table(const BenchmarkModel& m, const std::optional<CumulantSummary>& empirical) {
    Table t;
    t.columns = {"quantity", "model", "empirical", "relative_error"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    t.add({std::string("A"), m.reversion.A, nan, nan});
    t.add({std::string("B"), m.reversion.B, nan, nan});
    t.add({std::string("c_nu"), m.levy.c_nu, nan, nan});
    t.add({std::string("p"), m.levy.p, nan, nan});
    t.add({std::string("q"), m.levy.q, nan, nan});
    const auto s = benchmark_summary(m);
    const double mv[] = {s.mean, s.variance, s.skewness, s.kurtosis};
    const char* names[] = {"mean", "variance", "skewness", "kurtosis"};
    for (int i = 0; i < 4; ++i) {
        double e = nan, rel = nan;
        if (empirical) {
            const double ev[] = {empirical->mean, empirical->variance, empirical->skewness, empirical->kurtosis};
            e = ev[i];
            rel = std::abs(e - mv[i]) / std::abs(mv[i]);
        }
        t.add({std::string(names[i]), mv[i], e, rel});
    }
    return t;
}

// ---- bounds -----------------------------------------------------------------------

struct SweepRow {
    double epsilon = 0.0;
    Direction direction = Direction::Upper;
    std::string status;                 ///< converged, saturated, not-converged
    std::optional<DualSolution> solution;
    double bound = 0.0;                 ///< dual value; grid bound if saturated; last iterate otherwise
    double tau = 0.0, mu = 0.0;
    long iterations = 0;
    std::string note;
};

[[nodiscard]] inline UncertaintyProblem make_problem(const RunConfig& c, Direction d, double eps) {
    UncertaintyProblem p;
    p.k = c.k;
    p.m = c.m;
    p.epsilon = eps;
    p.direction = d;
    p.model = c.model;
    p.spec = DivergenceSpec(c.model, c.alpha, c.weight, c.m);
    return p;
}

/// Warm-started sweep that records failures per row. A failed row does not move the warm start.
[[nodiscard]] inline std::vector<SweepRow> run_sweep(UncertaintyProblem prob, const std::vector<double>& eps,
                                                     const SolverOptions& opt) {
    const auto grid = build_grid(base_measure(prob.model, prob.m), opt.resolution);
    DualEvaluator ev(prob, grid, opt.series_cache);
    std::vector<SweepRow> rows;
    SolverState st{opt.tau0, opt.mu0};
    for (double e : eps) {
        prob.epsilon = e;
        SweepRow row;
        row.epsilon = e;
        row.direction = prob.direction;
        try {
            auto sol = solve_with(prob, grid, ev, opt, st);
            row.status = "converged";
            row.bound = sol.bound;
            row.tau = sol.tau;
            row.mu = sol.mu;
            row.iterations = sol.iterations;
            for (const auto& w : sol.warnings) row.note += (row.note.empty() ? "" : "; ") + w;
            st = {sol.tau, sol.mu};
            row.solution = std::move(sol);
        } catch (const BudgetSaturationError& x) {
            row.status = "saturated";
            row.bound = x.grid_bound;
            row.tau = 0.0;
            row.note = x.what();
        } catch (const NonConvergenceError& x) {
            row.status = "not-converged";
            row.bound = std::numeric_limits<double>::quiet_NaN();
            row.tau = x.tau;
            row.mu = x.mu;
            row.note = x.what();
        }
        ev.reset_cache();
        rows.push_back(std::move(row));
    }
    return rows;
}

/// One row per (direction, eps): bound, change from the benchmark, multipliers, iterations.
[[nodiscard]] inline Table bounds_table(const std::vector<SweepRow>& rows, double benchmark) {
    Table t;
    t.columns = {"direction", "eps", "bound", "relative_change", "tau", "mu", "iterations", "status"};
    for (const auto& r : rows)
        t.add({std::string(to_string(r.direction)), r.epsilon, r.bound, (r.bound - benchmark) / benchmark, r.tau, r.mu,
               static_cast<long long>(r.iterations), r.status});
    return t;
}

/// phi* on the (F_r, F_z) square: midpoint probabilities of the base-measure marginals.
[[nodiscard]] inline Table field_table(const std::vector<SweepRow>& rows, const UncertaintyProblem& proto, int points) {
    Table t;
    t.columns = {"direction", "eps", "F_r", "F_z", "r", "z", "phi"};
    const auto base = base_measure(proto.model, proto.m);
    std::vector<double> u(static_cast<std::size_t>(points)), rs(u.size()), zs(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(points);
        rs[i] = quantile(base.r_marginal, u[i]);
        zs[i] = quantile(base.z_marginal, u[i]);
    }
    for (const auto& row : rows) {
        if (!row.solution) continue;
        auto p = proto;
        p.direction = row.direction;
        p.epsilon = row.epsilon;
        const auto f = distortion_field(*row.solution, p);
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t j = 0; j < u.size(); ++j)
                t.add({std::string(to_string(row.direction)), row.epsilon, u[i], u[j], rs[i], zs[j], f(rs[i], zs[j])});
    }
    return t;
}

// ---- simulation ---------------------------------------------------------------------

struct PreparedComponents {
    ComponentSet set;
    std::optional<DualSolution> solution;  ///< the KL solve behind a distorted run
};

/// Benchmark components or the KL (0,1) worst case at distortion_eps, reached by a
/// warm-started descent through 10^(1 - 0.6 i) above the target.
[[nodiscard]] inline PreparedComponents prepare_components(const RunConfig& c) {
    PreparedComponents out;
    if (c.distortion == DistortionChoice::None) {
        out.set = build_components(c.model, c.components);
        return out;
    }
    const Direction d = c.distortion == DistortionChoice::KlUpper ? Direction::Upper : Direction::Lower;
    UncertaintyProblem p;
    p.k = 1;
    p.m = 0;
    p.direction = d;
    p.model = c.model;
    p.spec = DivergenceSpec(c.model, AlphaConstant{1.0}, c.weight, 0);
    std::vector<double> eps;
    for (double e : default_eps_schedule(1.0, 20))
        if (e > c.distortion_eps * (1.0 + 1e-9)) eps.push_back(e);
    eps.push_back(c.distortion_eps);
    auto opt = c.solver;
    opt.resolution = c.distortion_resolution;
    const auto rows = run_sweep(p, eps, opt);
    const auto& last = rows.back();
    if (!last.solution) throw NonConvergenceError("KL solve for the distorted simulation failed: " + last.note,
                                                  last.tau, last.mu, 0.0, 0.0);
    p.epsilon = c.distortion_eps;
    out.solution = last.solution;
    out.set = build_components(c.model, distortion_field(*last.solution, p), c.components);
    return out;
}

[[nodiscard]] inline Table path_table(const SamplePath& path) {
    Table t;
    t.columns = {"timestamp_hours", "discharge_m3s"};
    t.rows.reserve(path.value.size());
    for (std::size_t i = 0; i < path.value.size(); ++i) {
        const double tt = path.time[i];
        const Cell time = tt == std::floor(tt) && std::abs(tt) < 9e15 ? Cell(static_cast<long long>(tt)) : Cell(tt);
        t.rows.push_back({time, path.value[i]});
    }
    return t;
}

[[nodiscard]] inline Table component_table(const ComponentSet& set) {
    Table t;
    t.columns = {"r", "weight", "lambda", "shape", "rate", "jump_mean", "envelope"};
    for (const auto& c : set.items) t.add({c.r, c.weight, c.lambda, c.shape, c.rate, c.jump_mean, c.envelope});
    return t;
}

// ---- statistics ---------------------------------------------------------------------

[[nodiscard]] inline Table cumulant_table(const CumulantSummary& s, std::size_t count, std::size_t missing) {
    Table t;
    t.columns = {"statistic", "value"};
    t.add({std::string("samples"), static_cast<long long>(count)});
    t.add({std::string("missing"), static_cast<long long>(missing)});
    t.add({std::string("mean"), s.mean});
    t.add({std::string("variance"), s.variance});
    t.add({std::string("skewness"), s.skewness});
    t.add({std::string("kurtosis"), s.kurtosis});
    return t;
}

[[nodiscard]] inline Table acf_table(std::span<const double> x, int max_lag, const BenchmarkModel& model) {
    Table t;
    t.columns = {"lag_h", "empirical", "model"};
    if (x.size() < 2) return t;
    // short records report the lags they have
    const auto acf = empirical_acf(x, std::min(static_cast<std::size_t>(max_lag), x.size() - 1));
    for (std::size_t h = 0; h < acf.size(); ++h)
        t.add({static_cast<long long>(h), acf[h] ? *acf[h] : std::numeric_limits<double>::quiet_NaN(),
               benchmark_acf(model, static_cast<double>(h))});
    return t;
}

/// One row per (threshold, regime) with both fitted duration laws.
[[nodiscard]] inline Table duration_table(std::span<const double> x, double sampling, const std::vector<double>& thresholds) {
    Table t;
    t.columns = {"threshold", "regime", "count", "mean_h", "variance_h2", "cv", "fraction", "exp_rate", "ig_shape",
                 "ig_scale"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double thr : thresholds) {
        const auto st = threshold_durations(x, sampling, thr);
        for (int hi = 1; hi >= 0; --hi) {
            const auto& r = hi ? st.high : st.low;
            double rate = nan, shape = nan, scale = nan;
            if (r.count >= 2) {
                const auto f = fit_duration_moments(r.mean, r.variance);
                rate = f.exp_rate;
                if (f.inverse_gamma) shape = f.inverse_gamma->shape, scale = f.inverse_gamma->scale;
            }
            t.add({thr, std::string(hi ? "high" : "low"), static_cast<long long>(r.count), r.count ? r.mean : nan,
                   r.count > 1 ? r.variance : nan, r.count > 1 ? r.cv : nan, r.fraction, rate, shape, scale});
        }
    }
    return t;
}

[[nodiscard]] inline Table histogram_table(std::span<const double> x, const BinSpec& bins) {
    const auto h = histogram_pdf(x, bins);
    Table t;
    t.columns = {"lo", "hi", "density"};
    for (std::size_t i = 0; i < h.density.size(); ++i) t.add({h.edges[i], h.edges[i + 1], h.density[i]});
    return t;
}

}  // namespace supou
