#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "supou/simulation.hpp"

using namespace supou;

namespace {

BenchmarkModel reference_model() { return BenchmarkModel::kazarashi(); }

SimulationConfig short_run(double hours, std::uint64_t seed = 1) {
    SimulationConfig cfg;
    cfg.horizon = hours;
    cfg.burn_in = hours;
    cfg.seed = seed;
    return cfg;
}

/// Mean and batch-means standard error.
std::pair<double, double> batch_mean(const std::vector<double>& x, std::size_t batches) {
    const std::size_t len = x.size() / batches;
    std::vector<double> b(batches);
    for (std::size_t i = 0; i < batches; ++i)
        b[i] = std::accumulate(x.begin() + i * len, x.begin() + (i + 1) * len, 0.0) / double(len);
    const double m = std::accumulate(b.begin(), b.end(), 0.0) / double(batches);
    double v = 0.0;
    for (double y : b) v += (y - m) * (y - m);
    v /= double(batches - 1);
    return {m, std::sqrt(v / double(batches))};
}

ComponentSet fast_components() {
    ComponentSet s;
    for (double r : {0.05, 0.2, 1.0}) {
        Component c;
        c.r = r;
        c.lambda = 0.1;
        c.shape = 0.7;
        c.rate = 0.05;
        c.jump_mean = c.shape / c.rate;
        c.jump_m2 = c.shape * (c.shape + 1.0) / (c.rate * c.rate);
        s.items.push_back(c);
    }
    return s;
}

/// A (1,2) alpha = 2.5 Upper field with a moderate tau, for the rejection sampler.
DistortionField polynomial_field(double tau, double mu) {
    UncertaintyProblem p;
    p.k = 2;
    p.m = 1;
    p.epsilon = 1.0;
    p.direction = Direction::Upper;
    p.model = reference_model();
    p.spec = DivergenceSpec(p.model, AlphaConstant{2.5}, WeightRegularizedInverseRate{10.0}, 1);
    DualSolution s;
    s.tau = tau;
    s.mu = mu;
    return distortion_field(s, p);
}

}  // namespace

TEST(Components, IntensitiesAddUpToLevyMass) {
    const auto model = reference_model();
    const auto set = build_components(model, 256);
    const auto& lv = model.levy;
    const double mass = lv.c_nu * std::tgamma(-lv.q) * std::pow(lv.p, lv.q);
    EXPECT_NEAR(set.total_intensity() / mass, 1.0, 0.01);
    double w = 0.0;
    for (const auto& c : set.items) w += c.weight;
    EXPECT_NEAR(w, 1.0, 0.01);
    for (std::size_t i = 1; i < set.size(); ++i) EXPECT_GT(set.items[i].r, set.items[i - 1].r);
}

TEST(Components, StationaryMeanApproachesCumulant) {
    const auto model = reference_model();
    const double c1 = benchmark_cumulant(model, 1), c2 = benchmark_cumulant(model, 2);
    const auto set = build_components(model, 512);
    EXPECT_NEAR(set.stationary_mean() / c1, 1.0, 0.01);
    EXPECT_NEAR(set.stationary_variance() / c2, 1.0, 0.01);
}

TEST(Components, InfiniteActivityRejected) {
    auto model = reference_model();
    model.levy.q = 0.3;
    EXPECT_THROW((void)build_components(model, 16), InfiniteActivityError);
}

TEST(Components, KlTiltRatesPositiveAndShifted) {
    UncertaintyProblem p;
    p.k = 1;
    p.m = 0;
    p.epsilon = 0.631;
    p.model = reference_model();
    p.spec = DivergenceSpec(p.model, AlphaConstant{1.0}, WeightRegularizedInverseRate{10.0}, 0);
    DualSolution s;
    s.tau = 20.0;
    for (auto d : {Direction::Upper, Direction::Lower}) {
        p.direction = d;
        const auto f = distortion_field(s, p);
        const auto set = build_components(p.model, f, 32);
        for (const auto& c : set.items) {
            EXPECT_GT(c.rate, 0.0);
            const double theta = f.tilting(c.r);
            EXPECT_NEAR(c.rate, p.model.levy.p + (d == Direction::Upper ? -theta : theta), 1e-15);
        }
        const auto bench = build_components(p.model, 32);
        if (d == Direction::Upper)
            EXPECT_GT(set.stationary_mean(), bench.stationary_mean());
        else
            EXPECT_LT(set.stationary_mean(), bench.stationary_mean());
    }
}

TEST(Components, KlTiltBeyondDecayRateIsInadmissible) {
    UncertaintyProblem p;
    p.k = 1;
    p.m = 0;
    p.epsilon = 0.631;
    p.direction = Direction::Upper;
    p.model = reference_model();
    p.spec = DivergenceSpec(p.model, AlphaConstant{1.0}, WeightRegularizedInverseRate{10.0}, 0);
    DualSolution s;
    s.tau = 0.5 * p.spec.regularization() / (p.spec.normalization_constant() * p.model.levy.p);
    EXPECT_THROW((void)build_components(p.model, distortion_field(s, p), 32), InadmissibleTiltingError);
}

TEST(Components, RejectionMomentsMatchQuadrature) {
    const auto model = reference_model();
    const auto& lv = model.levy;
    const auto f = polynomial_field(300.0, 20.0);
    const auto set = build_components(model, f, 16);
    const double s = -lv.q;
    for (const auto& c : set.items) {
        auto nu = [&](double z) { return lv.c_nu * std::pow(z, -lv.q - 1.0) * std::exp(-lv.p * z); };
        const double mass = oracle::integrate_half_line([&](double z) { return nu(z) * f(c.r, z); }, 100.0, 1e-10);
        const double m1 = oracle::integrate_half_line([&](double z) { return z * nu(z) * f(c.r, z); }, 100.0, 1e-10);
        EXPECT_NEAR(c.lambda / (c.weight * mass), 1.0, 1e-6);
        EXPECT_NEAR(c.jump_mean / (m1 / mass), 1.0, 1e-6);
        EXPECT_GT(c.envelope, 0.0);
        EXPECT_EQ(c.shape, s);
    }
}

TEST(Simulate, ZeroIntensityDecays) {
    ComponentSet set = fast_components();
    for (auto& c : set.items) c.lambda = 0.0;
    SimulationConfig cfg;
    cfg.burn_in = 0.0;
    cfg.horizon = 200.0;
    cfg.initial = {5.0, 5.0, 5.0};
    const auto path = simulate_path(set, cfg);
    for (std::size_t t = 1; t < path.value.size(); ++t) EXPECT_LT(path.value[t], path.value[t - 1]);
    // Euler factor (1 - r dt)^(t/dt)
    const double want = 5.0 * (std::pow(1.0 - 0.05 * 0.01, 100.0 * 200) + std::pow(1.0 - 0.2 * 0.01, 100.0 * 200) +
                               std::pow(1.0 - 0.01, 100.0 * 200));
    EXPECT_NEAR(path.value.back(), want, 1e-9 * want);
}

TEST(Simulate, SeedDeterminism) {
    const auto set = build_components(reference_model(), 16);
    const auto cfg = short_run(2000.0, 7);
    const auto a = simulate_path(set, cfg), b = simulate_path(set, cfg);
    EXPECT_EQ(a.value, b.value);
    auto other = cfg;
    other.seed = 8;
    EXPECT_NE(simulate_path(set, other).value, a.value);
}

TEST(Simulate, PathIsNonnegative) {
    const auto path = simulate_path(build_components(reference_model(), 64), short_run(5.0 * kHoursPerYear));
    EXPECT_TRUE(std::all_of(path.value.begin(), path.value.end(), [](double v) { return v >= 0.0; }));
    EXPECT_EQ(path.value.size(), std::size_t(5 * 8760));
    EXPECT_DOUBLE_EQ(path.time.front(), 1.0);
}

TEST(Simulate, StationaryMeanWithinThreeStandardErrors) {
    const auto set = fast_components();
    const auto path = simulate_path(set, short_run(2e6, 3));
    const auto [m, se] = batch_mean(path.value, 100);
    EXPECT_LT(std::abs(m - set.stationary_mean()), 3.0 * se) << m << " vs " << set.stationary_mean();
}

TEST(Simulate, RejectionSamplerHitsTargetMean) {
    const auto model = reference_model();
    auto set = build_components(model, polynomial_field(300.0, 20.0), 16);
    // the fastest component only: short memory, so batch means are reliable
    set.items = {set.items.back()};
    const auto& c = set.items.front();
    const auto path = simulate_path(set, short_run(4e6, 5));
    const auto [m, se] = batch_mean(path.value, 100);
    const double want = c.lambda * c.jump_mean / c.r;
    EXPECT_LT(std::abs(m - want), 3.0 * se) << m << " vs " << want;
}

TEST(Simulate, ExplicitDecayStability) {
    ComponentSet set = fast_components();
    SimulationConfig cfg = short_run(10.0);
    cfg.dt = 1.0;
    EXPECT_THROW((void)simulate_path(set, cfg), StabilityError);
    cfg.exact_decay = true;
    EXPECT_NO_THROW((void)simulate_path(set, cfg));
}

TEST(Simulate, ConfigValidation) {
    SimulationConfig cfg;
    cfg.dt = 0.03;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.horizon = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.initial = {-1.0};
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    const auto set = fast_components();
    cfg = short_run(10.0);
    cfg.initial = {1.0};
    EXPECT_THROW((void)simulate_path(set, cfg), std::invalid_argument);
}
