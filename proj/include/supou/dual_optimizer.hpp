#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "supou/admissibility.hpp"
#include "supou/divergence.hpp"
#include "supou/errors.hpp"
#include "supou/measures.hpp"
#include "supou/quantization.hpp"

namespace supou {

class InadmissibleProblemError : public Error {
public:
    using Error::Error;
};

struct UncertaintyProblem {
    int k = 2;
    int m = 1;
    double epsilon = 1.0;
    Direction direction = Direction::Upper;
    BenchmarkModel model;
    DivergenceSpec spec;

    void validate() const {
        if (!(k > m)) throw std::invalid_argument("cumulant order k must exceed constraint order m");
        if (m < 0) throw std::invalid_argument("constraint order m must be >= 0");
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("budget epsilon must be positive");
        if (spec.order() != m) throw std::invalid_argument("divergence spec order differs from problem order m");
    }
    [[nodiscard]] double sign() const { return direction == Direction::Upper ? 1.0 : -1.0; }
};

struct SolverOptions {
    double omega = 0.95;
    double delta = 0.0;         ///< 0: 1e-5 for m >= 1, 1e-7 for m = 0
    double tau0 = 500.0;
    double mu0 = 100.0;
    double eta_scale = 2.5;     ///< eta_n = eta_scale / eps
    double kappa_scale = 0.25;  ///< kappa_n = kappa_scale / lookahead tau
    long max_iterations = 0;    ///< 0: automatic, see iteration_cap
    int resolution = 512;
    bool series_cache = true;   ///< local Taylor evaluation of the node sums; false = every node every step

    void validate() const {
        if (!(omega > 0.0 && omega < 1.0)) throw std::invalid_argument("omega must lie in (0,1)");
        if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
        if (!(tau0 > 0.0)) throw std::invalid_argument("initial tau must be positive");
        if (max_iterations < 0) throw std::invalid_argument("max_iterations must be nonnegative");
    }
    [[nodiscard]] double tolerance(int m) const {
        if (delta > 0.0) return delta;
        return m == 0 ? 1e-7 : 1e-5;
    }
    /// 5e5 down to eps = 1e-4, growing like 1/eps below (iteration counts grow like eps^-1/2).
    [[nodiscard]] long iteration_cap(double eps) const {
        if (max_iterations > 0) return max_iterations;
        return static_cast<long>(5e5 * std::max(1.0, 1e-4 / eps));
    }
};

struct DualSolution {
    double epsilon = 0.0;
    Direction direction = Direction::Upper;
    double tau = 0.0;
    double mu = 0.0;
    double bound = 0.0;
    long iterations = 0;
    double grad_tau = 0.0;  ///< dF/dtau at (tau, mu)
    double grad_mu = 0.0;   ///< dF/dmu at (tau, mu)
    IntegrabilityReport admissibility;
    std::vector<std::string> warnings;
};

/// Discretized expectations entering F, G and their gradients.
struct DualMoments {
    double phi = 0.0;      ///< E[phi*]
    double Phi = 0.0;      ///< E[Phi(w', alpha, phi*)]
    double Psi = 0.0;      ///< E[Psi(w', alpha, psi)]
    double g_phi = 0.0;    ///< E[(+-z^(k-m)) phi*]
};

namespace detail {

inline constexpr int kSeriesOrder = 10;
inline constexpr int kCoefCount = (kSeriesOrder + 1) * (kSeriesOrder + 2) / 2;

}  // namespace detail

/// Node table of one problem on one grid plus the expectation kernels. The budget
/// eps does not enter, so one evaluator serves a whole eps sweep.
///
/// `fast()` serves E[phi*] and E[Phi] either by summing every node or from a
/// bivariate Taylor expansion in (u, v) = (1/tau, mu/tau) around the last
/// recentering point; nodes outside the expansion's safe radius are summed exactly.
class DualEvaluator {
public:
    DualEvaluator(const UncertaintyProblem& prob, const QuantGrid& grid, bool series_cache = true)
        : m_(prob.m), use_cache_(series_cache) {
        prob.validate();
        if (grid.base.m != prob.m) throw std::invalid_argument("grid built for a different order m");
        const std::size_t M = grid.r.size(), Mz = grid.z.size();
        n_ = M * Mz;
        const double s = prob.sign();
        wp_.resize(n_);
        kap_.resize(n_);
        e_.resize(n_);
        al_.resize(n_);
        g_.resize(n_);
        kl_.resize(n_);
        double gsum = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            const double r = grid.r[i];
            const double a = prob.spec.alpha(r);
            const bool kl = detail::kl_branch(a);
            for (std::size_t j = 0; j < Mz; ++j) {
                const std::size_t n = i * Mz + j;
                const double z = grid.z[j];
                wp_[n] = prob.spec.w_prime(r, z);
                al_[n] = a;
                kl_[n] = kl ? 1 : 0;
                kap_[n] = kl ? 0.0 : (a - 1.0) / wp_[n];
                e_[n] = kl ? 0.0 : 1.0 / (a - 1.0);
                g_[n] = s * std::pow(z, static_cast<double>(prob.k - prob.m));
                gsum += std::abs(g_[n]);
                gmin_ = std::min(gmin_, g_[n]);
                gmax_ = std::max(gmax_, g_[n]);
            }
        }
        gbar_ = gsum / static_cast<double>(n_);
        row_ = Mz;
        rows_.resize(M);
        rows2_.resize(M);
        rows3_.resize(M);
        rows4_.resize(M);
    }

    [[nodiscard]] std::size_t size() const { return n_; }

    /// Every expectation, every node, at (tau, mu).
    [[nodiscard]] DualMoments exact(double tau, double mu) const {
        const double u = 1.0 / tau, v = (m_ == 0 ? 0.0 : mu) / tau;
        const std::size_t M = rows_.size();
        std::vector<double> a(row_), b(row_), c(row_), d(row_);
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j < row_; ++j) {
                const std::size_t n = i * row_ + j;
                double f, F, P;
                node_all(n, u, v, f, F, P);
                a[j] = f;
                b[j] = F;
                c[j] = P;
                d[j] = f == 0.0 ? 0.0 : g_[n] * f;
            }
            rows_[i] = pairwise_sum(a);
            rows2_[i] = pairwise_sum(b);
            rows3_[i] = pairwise_sum(c);
            rows4_[i] = pairwise_sum(d);
        }
        const double N = static_cast<double>(n_);
        return {pairwise_sum(rows_) / N, pairwise_sum(rows2_) / N, pairwise_sum(rows3_) / N,
                pairwise_sum(rows4_) / N};
    }

    /// E[phi*] and E[Phi] at (tau, mu), through the expansion when it is valid.
    DualMoments fast(double tau, double mu) {
        const double u = 1.0 / tau, v = (m_ == 0 ? 0.0 : mu) / tau;
        if (!use_cache_) return direct(u, v);
        if (cache_ && inside(u, v)) {
            ++life_;
            ++stats_.cache_hits;
            return from_cache(u, v);
        }
        if (cache_) retire(u, v);
        if (cooldown_ > 0) {
            --cooldown_;
            return direct(u, v);
        }
        return build(u, v);
    }

    struct Stats {
        long direct_evals = 0;
        long builds = 0;
        long cache_hits = 0;
    };
    [[nodiscard]] const Stats& stats() const { return stats_; }

    /// Least divergence E[Phi(phi)] over distortions with E[phi] = 1 carried by the nodes where
    /// +-z^(k-m) is largest. On those nodes phi = dPsi(lambda), lambda fixed by the mean.
    [[nodiscard]] double extreme_divergence() const {
        std::vector<std::size_t> top;
        double rest = 0.0;
        for (std::size_t n = 0; n < n_; ++n) {
            if (g_[n] == gmax_)
                top.push_back(n);
            else
                rest += phi_value(wp_[n], al_[n], 0.0);
        }
        const double target = static_cast<double>(n_);
        auto mass = [&](double lam) {
            double s = 0.0;
            for (auto n : top) s += psi_derivative(wp_[n], al_[n], lam);
            return s;
        };
        double lo = 0.0, hi = 1.0;
        while (mass(hi) < target) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mass(mid) < target ? lo : hi) = mid;
        }
        double cost = rest;
        const double scale = target / mass(hi);
        for (auto n : top) cost += phi_value(wp_[n], al_[n], scale * psi_derivative(wp_[n], al_[n], hi));
        return cost / target;
    }

    /// Smallest and largest node value of +-z^(k-m). E[phi*] = 1 forces mu strictly inside.
    [[nodiscard]] std::pair<double, double> argument_range() const { return {gmin_, gmax_}; }

    /// Drop the expansion (e.g. before a far jump in the multipliers).
    void reset_cache() {
        cache_.reset();
        speed_ = -1.0;
        cooldown_ = 0;
    }

private:
    // ---- per-node kernels ------------------------------------------------

    void node_all(std::size_t n, double u, double v, double& f, double& F, double& P) const {
        const double psi = g_[n] * u - v;
        const double w = wp_[n];
        if (kl_[n]) {
            const double t = psi / w;
            if (t > 709.0) {
                f = F = P = kInf;
                return;
            }
            f = std::exp(t);
            F = w * kl_gap(t);
            P = w * std::expm1(t);
            return;
        }
        const double a = al_[n];
        const double d = kap_[n] * psi;
        if (d <= -1.0) {
            f = 0.0;
            F = w / a;
            P = -w / a;
            return;
        }
        const double L = std::log1p(d);
        const double Lp = e_[n] * L;
        f = std::exp(Lp);
        F = w * pow_gap(a, Lp) / (a * (a - 1.0));
        P = w * std::expm1((e_[n] + 1.0) * L) / a;
    }

    void node_fast(std::size_t n, double u, double v, double& f, double& F) const {
        const double psi = g_[n] * u - v;
        const double w = wp_[n];
        if (kl_[n]) {
            const double t = psi / w;
            if (t > 709.0) {
                f = F = kInf;
                return;
            }
            f = std::exp(t);
            F = w * kl_gap(t);
            return;
        }
        const double a = al_[n];
        const double d = kap_[n] * psi;
        if (d <= -1.0) {
            f = 0.0;
            F = w / a;
            return;
        }
        const double Lp = e_[n] * std::log1p(d);
        f = std::exp(Lp);
        if (std::abs(a * Lp) < 0.1) {
            F = w * pow_gap(a, Lp) / (a * (a - 1.0));
        } else {
            F = w * (f * (1.0 + d) - 1.0 - a * (f - 1.0)) / (a * (a - 1.0));
        }
    }

    static double pow_gap(double a, double L) { return detail::pow_gap(a, L); }
    static double kl_gap(double L) { return detail::kl_gap(L); }

    DualMoments direct(double u, double v) {
        ++stats_.direct_evals;
        const std::size_t M = rows_.size();
        for (std::size_t i = 0; i < M; ++i) {
            double sf = 0.0, sF = 0.0;
            for (std::size_t j = 0; j < row_; ++j) {
                double f, F;
                node_fast(i * row_ + j, u, v, f, F);
                sf += f;
                sF += F;
            }
            rows_[i] = sf;
            rows2_[i] = sF;
        }
        const double N = static_cast<double>(n_);
        return {pairwise_sum(rows_) / N, pairwise_sum(rows2_) / N, 0.0, 0.0};
    }

    // ---- local expansion -------------------------------------------------

    struct Cache {
        double u0 = 0.0, v0 = 0.0, U = 0.0, V = 0.0, sv = 0.0;
        std::array<double, detail::kCoefCount> cphi{}, cPhi{};
        std::vector<std::uint32_t> exact_nodes;
    };

    [[nodiscard]] static int idx(int a, int b) {
        const int n = a + b;
        return n * (n + 1) / 2 + b;
    }

    [[nodiscard]] bool inside(double u, double v) const {
        return std::abs(u - cache_->u0) <= cache_->U && std::abs(v - cache_->v0) <= cache_->V;
    }

    void retire(double u, double v) {
        const Cache& c = *cache_;
        const double ru = std::abs(u - c.u0) / c.u0;
        const double rv = c.sv > 0.0 ? std::abs(v - c.v0) / c.sv : 0.0;
        speed_ = std::max(ru, rv) / static_cast<double>(std::max(life_, 1L));
        if (life_ < 4) cooldown_ = 32;
        cache_.reset();
    }

    /// Box size for this build. A box of relative size f lives about f/speed hits;
    /// a rebuild costs roughly kBuildCost node evaluations per node, an exact node one per hit.
    [[nodiscard]] double choose_box() {
        static constexpr std::array<double, 6> shares{0.1, 0.03, 0.01, 0.003, 0.001, 0.0003};
        const double N = static_cast<double>(n_);
        double best_f = 0.0, best_cost = kInf;
        std::size_t hi = n_;
        for (double sh : shares) {
            const std::size_t q = static_cast<std::size_t>(sh * N);
            if (q >= hi) continue;
            std::nth_element(limits_.begin(), limits_.begin() + q, limits_.begin() + hi);
            hi = q;
            const double f = std::min(kMaxBox, limits_[q]);
            if (!(f > 1e-9)) continue;
            const double sp = speed_ > 0.0 ? speed_ : 1e-4;
            const double cost = kBuildCost * sp / f + sh;
            if (cost < best_cost) {
                best_cost = cost;
                best_f = f;
            }
        }
        return best_f;
    }

    /// Largest relative box size for which node n stays inside its series
    /// radius (or stays clamped), given spread = f * s over the box.
    [[nodiscard]] double node_limit(std::size_t n, double psi0, double s) const {
        if (kl_[n]) {
            const double t0 = psi0 / wp_[n];
            return t0 < 700.0 ? 0.25 * wp_[n] / s : 0.0;
        }
        const double b0 = 1.0 + kap_[n] * psi0;
        if (b0 == 0.0) return 0.0;
        const double reach = kap_[n] * s;
        if (b0 > 0.0) return std::min(0.1, 0.3 / (e_[n] + 1.0)) * b0 / reach;
        if (b0 < 0.0) return -b0 / reach * (1.0 - 1e-12);
        return 0.0;
    }

    DualMoments build(double u0, double v0) {
        ++stats_.builds;
        life_ = 0;
        auto c = std::make_unique<Cache>();
        c->u0 = u0;
        c->v0 = v0;
        const double sv = m_ == 0 ? 0.0 : std::abs(v0) + u0 * gbar_;

        limits_.resize(n_);
        for (std::size_t n = 0; n < n_; ++n)
            limits_[n] = node_limit(n, g_[n] * u0 - v0, std::abs(g_[n]) * u0 + sv);
        const double f = choose_box();
        if (!(f > 1e-9)) {
            cooldown_ = 32;
            return direct(u0, v0);
        }
        c->U = f * u0;
        c->V = f * sv;
        c->sv = sv;

        const int N = detail::kSeriesOrder;
        const int nb = m_ == 0 ? 0 : N;
        std::array<double, detail::kCoefCount> rowphi{}, rowPhi{};
        std::array<double, N + 1> hphi{}, hPhi{}, Xa{}, Yb{}, fe{}, fe1{};
        double fe_of = std::numeric_limits<double>::quiet_NaN();
        c->cphi.fill(0.0);
        c->cPhi.fill(0.0);

        for (std::size_t i = 0; i < rows_.size(); ++i) {
            rowphi.fill(0.0);
            rowPhi.fill(0.0);
            double row_clamped_Phi = 0.0;
            for (std::size_t j = 0; j < row_; ++j) {
                const std::size_t n = i * row_ + j;
                const double psi0 = g_[n] * u0 - v0;
                const double w = wp_[n];
                if (!(node_limit(n, psi0, std::abs(g_[n]) * u0 + sv) >= f)) {
                    c->exact_nodes.push_back(static_cast<std::uint32_t>(n));
                    continue;
                }
                double X, Y;
                if (kl_[n]) {
                    const double t0 = psi0 / w;
                    const double et = std::exp(t0);
                    for (int k = 0; k <= N; ++k) {
                        hphi[k] = et;
                        hPhi[k] = k == 0 ? w * kl_gap(t0) : w * et * (t0 + k - 1.0);
                    }
                    X = g_[n] / w;
                    Y = -1.0 / w;
                } else {
                    const double a = al_[n], e = e_[n], kap = kap_[n];
                    const double d0 = kap * psi0;
                    const double b0 = 1.0 + d0;
                    if (b0 < 0.0) {
                        row_clamped_Phi += w / a;  // stays clamped at zero over the whole box
                        continue;
                    }
                    if (e != fe_of) {
                        // falling factorials e(e-1)...(e-k+1) and (e-1)...(e-k)
                        fe[0] = fe1[0] = 1.0;
                        for (int k = 1; k <= N; ++k) {
                            fe[k] = fe[k - 1] * (e - k + 1);
                            fe1[k] = fe1[k - 1] * (e - k);
                        }
                        fe_of = e;
                    }
                    const double L = std::log1p(d0);
                    const double be = std::exp(e * L);
                    const double e2w = w * e * e * be;
                    hphi[0] = be;
                    hPhi[0] = w * pow_gap(a, e * L) / (a * (a - 1.0));
                    for (int k = 1; k <= N; ++k) {
                        hphi[k] = be * fe[k];
                        const double t1 = k >= 2 ? (k - 1) * fe1[k - 2] : 0.0;
                        hPhi[k] = e2w * (t1 + fe[k - 1] * d0);
                    }
                    X = kap * g_[n] / b0;
                    Y = -kap / b0;
                }
                // x^n / n! with x = X du + Y dv expands into X^a Y^b du^a dv^b / (a! b!)
                Xa[0] = Yb[0] = 1.0;
                for (int k = 1; k <= N; ++k) {
                    Xa[k] = Xa[k - 1] * X / k;
                    Yb[k] = Yb[k - 1] * Y / k;
                }
                for (int k = 0; k <= N; ++k) {
                    const int bmax = std::min(k, nb);
                    for (int b = 0; b <= bmax; ++b) {
                        const double mono = Xa[k - b] * Yb[b];
                        const int id = idx(k - b, b);
                        rowphi[id] += hphi[k] * mono;
                        rowPhi[id] += hPhi[k] * mono;
                    }
                }
            }
            for (int t = 0; t < detail::kCoefCount; ++t) {
                c->cphi[t] += rowphi[t];
                c->cPhi[t] += rowPhi[t];
            }
            c->cPhi[0] += row_clamped_Phi;
        }
        cache_ = std::move(c);
        return from_cache(u0, v0);
    }

    DualMoments from_cache(double u, double v) const {
        const Cache& c = *cache_;
        const double du = u - c.u0, dv = v - c.v0;
        const int N = detail::kSeriesOrder;
        std::array<double, N + 1> pu{}, pv{};
        pu[0] = pv[0] = 1.0;
        for (int k = 1; k <= N; ++k) {
            pu[k] = pu[k - 1] * du;
            pv[k] = pv[k - 1] * dv;
        }
        const int nb = m_ == 0 ? 0 : N;
        double sphi = 0.0, sPhi = 0.0;
        for (int k = N; k >= 0; --k) {
            const int bmax = std::min(k, nb);
            for (int b = 0; b <= bmax; ++b) {
                const double mono = pu[k - b] * pv[b];
                const int id = idx(k - b, b);
                sphi += c.cphi[id] * mono;
                sPhi += c.cPhi[id] * mono;
            }
        }
        double ephi = 0.0, ePhi = 0.0;
        for (std::uint32_t n : c.exact_nodes) {
            double f, F;
            node_fast(n, u, v, f, F);
            ephi += f;
            ePhi += F;
        }
        const double Nn = static_cast<double>(n_);
        return {(sphi + ephi) / Nn, (sPhi + ePhi) / Nn, 0.0, 0.0};
    }

    int m_;
    bool use_cache_;
    std::size_t n_ = 0, row_ = 0;
    std::vector<double> wp_, kap_, e_, al_, g_;
    std::vector<std::uint8_t> kl_;
    double gbar_ = 0.0;
    double gmin_ = kInf, gmax_ = -kInf;
    mutable std::vector<double> rows_, rows2_, rows3_, rows4_;
    std::unique_ptr<Cache> cache_;
    static constexpr double kBuildCost = 8.0;
    double speed_ = -1.0;
    static constexpr double kMaxBox = 0.25;
    std::vector<double> limits_;
    long life_ = 0;
    int cooldown_ = 0;
    Stats stats_;
};

/// Budget in E_m units: eps/(m c_m) for m >= 1, eps itself for m = 0.
[[nodiscard]] inline double dual_budget(const UncertaintyProblem& prob, const BaseMeasure& base) {
    return prob.m == 0 ? prob.epsilon : prob.epsilon / base.mass();
}

namespace detail {

[[nodiscard]] inline double objective_from(double b, double tau, double mu, int m, const DualMoments& mo) {
    if (!std::isfinite(mo.Psi)) return kInf;
    return b * tau + (m == 0 ? 0.0 : mu) + tau * mo.Psi;
}

}  // namespace detail

/// F(tau, mu) (Upper) or G(tau, mu) (Lower); mu is ignored for m = 0.
[[nodiscard]] inline double dual_objective(const UncertaintyProblem& prob, const QuantGrid& grid, double tau, double mu) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    DualEvaluator ev(prob, grid, false);
    return detail::objective_from(dual_budget(prob, grid.base), tau, mu, prob.m, ev.exact(tau, mu));
}

struct DualGradient {
    double d_tau = 0.0;
    double d_mu = 0.0;
};

/// Analytic partial derivatives of the objective: b - E[Phi(phi*)] and 1 - E[phi*].
[[nodiscard]] inline DualGradient dual_gradient(const UncertaintyProblem& prob, const QuantGrid& grid, double tau, double mu) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    DualEvaluator ev(prob, grid, false);
    const auto mo = ev.exact(tau, mu);
    return {dual_budget(prob, grid.base) - mo.Phi, prob.m == 0 ? 0.0 : 1.0 - mo.phi};
}

/// Starting point and momentum carried between runs of a sweep.
struct SolverState {
    double tau = 500.0;
    double mu = 100.0;
};

/// Momentum descent on one problem with a prepared evaluator.
/// The mu-direction uses tau (1 - E[phi*]), the tau-scaled partial derivative.
[[nodiscard]] inline DualSolution solve_with(const UncertaintyProblem& prob, const QuantGrid& grid, DualEvaluator& ev,
                                             const SolverOptions& opt, SolverState start) {
    prob.validate();
    opt.validate();
    auto report = integrability_report(prob.model, prob.spec, prob.k, prob.direction);
    if (!report.admissible) throw InadmissibleProblemError("problem fails the integrability test: " + report.reason);

    const double b = dual_budget(prob, grid.base);
    const bool has_mu = prob.m != 0;
    double eta = opt.eta_scale / prob.epsilon;
    double gt_prev = 0.0;
    int growing_flips = 0;
    const double om = opt.omega;
    // below b = 1 the tau test is relative to the budget, otherwise it passes at the warm start once b < delta
    const double delta = opt.tolerance(prob.m);
    const double tol_tau = delta * std::min(1.0, b);
    const auto [mlo, mhi] = ev.argument_range();
    if (has_mu && ev.extreme_divergence() <= b)
        throw BudgetSaturationError("budget exceeds the divergence of the extreme-node distortion on this grid; "
                                    "refine the grid or lower eps",
                                    prob.sign() * grid.base.mass() / prob.k * mhi);
    double tau = start.tau, mu = has_mu ? start.mu : 0.0;
    double lam = 0.0, rho = 0.0;
    double gt = kInf, gm = kInf, ta = tau, ma = mu;
    ev.reset_cache();

    long it = 0;
    const long cap = opt.iteration_cap(prob.epsilon);
    for (; it < cap; ++it) {
        ta = tau + om * lam;
        ma = mu + om * rho;
        bool plain = false;
        if (!(ta > 0.0)) {
            lam = rho = 0.0;
            ta = tau;
            ma = mu;
            plain = true;
        }
        const auto mo = ev.fast(ta, ma);
        if (!std::isfinite(mo.Phi) || !std::isfinite(mo.phi)) {
            // conjugate saturated: the multiplier is far too small
            lam = rho = 0.0;
            tau = 2.0 * ta;
            mu = ma;
            ev.reset_cache();
            continue;
        }
        gt = b - mo.Phi;
        gm = has_mu ? ta * (1.0 - mo.phi) : 0.0;
        if (std::abs(gt) <= tol_tau && std::abs(gm) * std::max(1.0, 1.0 / ta) <= delta) break;

        const double kap = opt.kappa_scale / ta;
        // a tau gradient that flips sign and grows twice running means the rate is past the
        // local stability limit (steep side near saturation); halve it for the rest of the solve
        if (gt * gt_prev < 0.0) {
            if (std::abs(gt) <= std::abs(gt_prev)) {
                growing_flips = 0;
            } else if (++growing_flips >= 2) {
                eta *= 0.5;
                growing_flips = 0;
            }
        }
        gt_prev = gt;
        const double lam_next = om * lam - eta * gt;
        const double rho_next = om * rho - kap * gm;
        double tau_next = tau + lam;
        double mu_next = mu + rho;
        // tau moves by at most a factor 2 per step; near saturation the gradient spans
        // tens of orders of magnitude and one unguarded step throws tau out of range
        if (tau_next > 0.0 && !plain) {
            lam = std::clamp(lam_next, -0.5 * tau_next, tau_next);
            if (lam * gt > 0.0) lam = 0.0;  // momentum pointing uphill: restart
            rho = rho_next;
        } else {
            // overshoot past tau = 0: plain step without momentum
            tau_next = std::clamp(tau - eta * gt, 0.5 * tau, 2.0 * tau);
            mu_next = mu - kap * gm;
            lam = rho = 0.0;
        }
        tau = tau_next;
        mu = has_mu ? mu_next : 0.0;
        // at tiny tau E[phi*] is huge and one mu step can leave the node range, where
        // phi* is 0 or >= 1 everywhere and the scaled mu gradient vanishes with tau
        if (has_mu && (mu < mlo || mu > mhi)) {
            mu = std::clamp(mu, mlo, mhi);
            rho = 0.0;
        }
    }
    if (it >= cap)
        throw NonConvergenceError("momentum descent hit the iteration limit", ta, ma, gt, gm);

    const auto mo = ev.exact(ta, ma);
    DualSolution sol;
    sol.epsilon = prob.epsilon;
    sol.direction = prob.direction;
    sol.tau = ta;
    sol.mu = has_mu ? ma : 0.0;
    sol.iterations = it;
    sol.grad_tau = b - mo.Phi;
    sol.grad_mu = has_mu ? 1.0 - mo.phi : 0.0;
    sol.bound = prob.sign() * grid.base.mass() / prob.k * detail::objective_from(b, ta, sol.mu, prob.m, mo);
    sol.admissibility = integrability_report(prob.model, prob.spec, prob.k, prob.direction, ta);
    if (!sol.admissibility.admissible) sol.warnings.push_back(sol.admissibility.reason);
    if (has_mu && prob.direction == Direction::Upper && sol.mu < 0.0)
        sol.warnings.push_back("upper multiplier mu is negative");
    if (has_mu && prob.direction == Direction::Lower && sol.mu > 0.0)
        sol.warnings.push_back("lower multiplier mu is positive");
    return sol;
}

[[nodiscard]] inline DualSolution solve(const UncertaintyProblem& prob, const SolverOptions& opt = {}) {
    const auto grid = build_grid(base_measure(prob.model, prob.m), opt.resolution);
    DualEvaluator ev(prob, grid, opt.series_cache);
    return solve_with(prob, grid, ev, opt, {opt.tau0, opt.mu0});
}

/// eps_i = 10^(top - 0.6 i), i = 0..count-1
[[nodiscard]] inline std::vector<double> default_eps_schedule(double top = 2.0, int count = 11) {
    std::vector<double> e(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) e[static_cast<std::size_t>(i)] = std::pow(10.0, top - 0.6 * i);
    return e;
}

/// Warm-started sweep: each eps starts from the previous solution.
[[nodiscard]] inline std::vector<DualSolution> solve_sweep(UncertaintyProblem prob, const std::vector<double>& eps,
                                                           const SolverOptions& opt = {}) {
    const auto grid = build_grid(base_measure(prob.model, prob.m), opt.resolution);
    DualEvaluator ev(prob, grid, opt.series_cache);
    std::vector<DualSolution> out;
    SolverState st{opt.tau0, opt.mu0};
    for (double e : eps) {
        prob.epsilon = e;
        out.push_back(solve_with(prob, grid, ev, opt, st));
        st = {out.back().tau, out.back().mu};
    }
    return out;
}

/// Worst-case distortion phi*(r, z) of a solved problem.
class DistortionField {
public:
    DistortionField(const DualSolution& sol, const UncertaintyProblem& prob)
        : tau_(sol.tau), mu_(prob.m == 0 ? 0.0 : sol.mu), k_(prob.k), m_(prob.m), sign_(prob.sign()),
          spec_(prob.spec), direction_(prob.direction) {}

    [[nodiscard]] double operator()(double r, double z) const {
        const auto c = coefficient_eval(spec_, r, z);
        const double g = sign_ * std::pow(z, static_cast<double>(k_ - m_));
        return psi_derivative(c.w_prime, c.alpha, (g - mu_) / tau_);
    }
    /// For the KL (m,k) = (0,1) field phi* = exp(+-theta(r) z); returns theta(r).
    [[nodiscard]] double tilting(double r) const {
        if (!(spec_.is_kl() && m_ == 0 && k_ == 1))
            throw std::logic_error("tilting is defined for the KL (0,1) field only");
        return 1.0 / (tau_ * spec_.w_prime(r, 1.0));
    }
    [[nodiscard]] bool exponential_tilt() const { return spec_.is_kl() && m_ == 0 && k_ == 1; }
    [[nodiscard]] Direction direction() const { return direction_; }
    [[nodiscard]] double tau() const { return tau_; }
    [[nodiscard]] double mu() const { return mu_; }

private:
    double tau_, mu_;
    int k_, m_;
    double sign_;
    DivergenceSpec spec_;
    Direction direction_;
};

[[nodiscard]] inline DistortionField distortion_field(const DualSolution& sol, const UncertaintyProblem& prob) {
    return DistortionField(sol, prob);
}

struct PrimalReport {
    double mean_constraint_residual = 0.0;  ///< |E_m[phi*] - 1|, 0 for m = 0
    double divergence_residual = 0.0;       ///< |D'(phi*) - b| / b
    double duality_gap = 0.0;               ///< |primal - dual| / |dual|
    double primal_value = 0.0;              ///< +-(mass/k) E_m[z^(k-m) phi*]
    double dual_value = 0.0;
};

[[nodiscard]] inline PrimalReport primal_check(const DualSolution& sol, const UncertaintyProblem& prob, const QuantGrid& grid) {
    DualEvaluator ev(prob, grid, false);
    const auto mo = ev.exact(sol.tau, sol.mu);
    const double b = dual_budget(prob, grid.base);
    PrimalReport rep;
    rep.mean_constraint_residual = prob.m == 0 ? 0.0 : std::abs(mo.phi - 1.0);
    rep.divergence_residual = std::abs(mo.Phi - b) / b;
    // g carries the direction sign, so sign * E[g phi] = E[z^(k-m) phi]
    rep.primal_value = grid.base.mass() / prob.k * prob.sign() * mo.g_phi;
    rep.dual_value = sol.bound;
    rep.duality_gap = std::abs(rep.primal_value - rep.dual_value) / std::abs(rep.dual_value);
    return rep;
}

}  // namespace supou
