#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "supou/pathstats.hpp"
#include "supou/simulation.hpp"

using namespace supou;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> square_wave(int periods, int high, int low) {
    std::vector<double> x;
    for (int i = 0; i < periods; ++i) {
        x.insert(x.end(), high, 5.0);
        x.insert(x.end(), low, 1.0);
    }
    return x;
}

/// Full-scale benchmark path (2000 yr after 2000 yr burn-in), built once.
const SamplePath& long_benchmark_path() {
    static const SamplePath path = [] {
        SimulationConfig cfg;
        cfg.horizon = cfg.burn_in = 2000.0 * kHoursPerYear;
        cfg.seed = 1;
        return simulate_path(build_components(BenchmarkModel::kazarashi(), 64), cfg);
    }();
    return path;
}

}  // namespace

TEST(Cumulants, ConstantSeriesHasNoShape) {
    const std::vector<double> x(10, 3.0);
    const auto s = series_moments(x);
    EXPECT_EQ(s.variance, 0.0);
    EXPECT_THROW((void)cumulant_stats(x), std::domain_error);
    EXPECT_THROW((void)series_moments(std::vector<double>{kNaN, kNaN, 1.0}), std::invalid_argument);
}

TEST(Cumulants, MissingValuesAreSkipped) {
    const auto a = cumulant_stats(std::vector<double>{1.0, 2.0, 4.0, 8.0});
    const auto b = cumulant_stats(std::vector<double>{kNaN, 1.0, 2.0, kNaN, 4.0, 8.0});
    EXPECT_DOUBLE_EQ(a.mean, b.mean);
    EXPECT_DOUBLE_EQ(a.skewness, b.skewness);
}

TEST(Cumulants, GammaSample) {
    std::mt19937_64 rng(11);
    std::gamma_distribution<double> g(2.0, 1.0);
    std::vector<double> x(1'000'000);
    for (auto& v : x) v = g(rng);
    const auto c = cumulant_stats(x);
    EXPECT_NEAR(c.mean, 2.0, 0.02);
    EXPECT_NEAR(c.variance, 2.0, 0.04);
    EXPECT_NEAR(c.skewness / (2.0 / std::sqrt(2.0)), 1.0, 0.05);
    EXPECT_NEAR(c.kurtosis / 3.0, 1.0, 0.1);  // 6 / shape
}

TEST(Acf, LagZeroAndWhiteNoise) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(100'000);
    for (auto& v : x) v = n(rng);
    const auto acf = empirical_acf(x, 50);
    ASSERT_TRUE(acf[0]);
    EXPECT_EQ(*acf[0], 1.0);
    for (std::size_t h = 1; h <= 50; ++h) {
        ASSERT_TRUE(acf[h]);
        EXPECT_LT(std::abs(*acf[h]), 0.02) << h;
    }
}

TEST(Acf, PairwiseDeletionAndAbsentLags) {
    std::vector<double> x{1.0, kNaN, 3.0, kNaN, 5.0, 2.0};
    const auto acf = empirical_acf(x, 4);
    EXPECT_FALSE(acf[1]);  // only the pair (5, 2)
    EXPECT_TRUE(acf[2]);   // (1, 3), (3, 5)
    EXPECT_FALSE(acf[3]);  // (3, 2)
    EXPECT_THROW((void)empirical_acf(x, 6), std::invalid_argument);
}

TEST(Durations, SquareWave) {
    const auto x = square_wave(20, 10, 20);
    const auto st = threshold_durations(x, 1.0, 3.0);
    // the first high run starts the series and the final low run ends it
    EXPECT_EQ(st.high_durations.size(), 19u);
    EXPECT_EQ(st.low_durations.size(), 19u);
    for (double d : st.high_durations) EXPECT_EQ(d, 10.0);
    for (double d : st.low_durations) EXPECT_EQ(d, 20.0);
    EXPECT_DOUBLE_EQ(st.high.fraction, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(st.high.fraction + st.low.fraction, 1.0);
    EXPECT_EQ(st.high.cv, 0.0);
    EXPECT_EQ(st.high.mean, 10.0);
}

TEST(Durations, SamplingStepAndMissingSplits) {
    auto x = square_wave(6, 4, 4);
    x[13] = kNaN;  // inside the second low run
    const auto st = threshold_durations(x, 2.0, 3.0);
    for (double d : st.high_durations) EXPECT_EQ(d, 8.0);
    EXPECT_EQ(st.low_durations.size(), 4u);  // the split run and the final run drop out
    EXPECT_DOUBLE_EQ(st.high.fraction + st.low.fraction, 1.0);
}

TEST(Durations, PartitionOfAnalyzedTime) {
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> e(0.1);
    std::vector<double> x(20'000);
    for (auto& v : x) v = e(rng);
    const auto st = threshold_durations(x, 1.0, 7.0);
    EXPECT_DOUBLE_EQ(st.high.fraction + st.low.fraction, 1.0);
    double closed = 0.0;
    for (double d : st.high_durations) closed += d;
    for (double d : st.low_durations) closed += d;
    // everything but the two truncated end runs
    EXPECT_LE(closed, double(x.size()));
    EXPECT_GT(closed, double(x.size()) - 200.0);
}

TEST(DurationModels, PublishedMomentMaps) {
    // inputs and outputs are both rounded: the image of the input box must meet the output interval
    struct Case {
        double mean, dmean, var, dvar, zeta, theta, dtheta;
    };
    for (const auto& c : {Case{21.98, 0.005, 1.254e5, 0.0005e5, 2.004, 22.07, 0.005},
                          Case{7.28, 0.005, 1.083e4, 0.0005e4, 2.005, 7.315, 0.0005}}) {
        const auto f = fit_duration_moments(c.mean, c.var);
        ASSERT_TRUE(f.inverse_gamma);
        EXPECT_NEAR(f.inverse_gamma->shape, c.zeta, 0.0005);
        double lo = 1e300, hi = -1e300;
        for (double m : {c.mean - c.dmean, c.mean + c.dmean})
            for (double v : {c.var - c.dvar, c.var + c.dvar}) {
                const auto g = fit_duration_moments(m, v);
                lo = std::min(lo, g.inverse_gamma->scale);
                hi = std::max(hi, g.inverse_gamma->scale);
            }
        EXPECT_LE(lo, c.theta + c.dtheta);
        EXPECT_GE(hi, c.theta - c.dtheta);
        EXPECT_NEAR(f.exp_rate, 1.0 / c.mean, 1e-15);
    }
}

TEST(DurationModels, MomentFitIsExact) {
    for (double mean : {0.5, 7.0, 300.0})
        for (double var : {0.1, 50.0, 1e6}) {
            const auto f = fit_duration_moments(mean, var);
            EXPECT_NEAR(f.inverse_gamma->mean() / mean, 1.0, 1e-13);
            // variance goes through zeta - 2, which cancels as zeta -> 2
            const double zeta = f.inverse_gamma->shape;
            EXPECT_NEAR(f.inverse_gamma->variance() / var, 1.0, 1e-14 * zeta / (zeta - 2.0));
            EXPECT_GT(f.inverse_gamma->shape, 2.0);
        }
}

TEST(DurationModels, InverseGammaRoundTrip) {
    const double zeta = 3.0, theta = 5.0;
    const double beta = theta;  // vartheta is the density's scale
    std::mt19937_64 rng(21);
    std::gamma_distribution<double> g(zeta, 1.0);
    std::vector<double> y(1'000'000);
    for (auto& v : y) v = beta / g(rng);
    const auto f = fit_duration_models(y);
    ASSERT_TRUE(f.inverse_gamma);
    // the moment map recovers (shape, scale) of the density whose mean is scale / (shape - 1)
    EXPECT_NEAR(f.inverse_gamma->shape / zeta, 1.0, 0.05);
    EXPECT_NEAR(f.inverse_gamma->scale / theta, 1.0, 0.05);
}

TEST(DurationModels, PdfIntegratesToOne) {
    const InverseGammaFit f{3.0, 5.0};
    double s = 0.0;
    const double h = 1e-3;
    for (double y = h / 2; y < 2000.0; y += h) s += f.pdf(y) * h;
    EXPECT_NEAR(s, 1.0, 1e-3);
}

TEST(DurationModels, ZeroVarianceIsExponentialOnly) {
    const auto f = fit_duration_models(std::vector<double>{4.0, 4.0, 4.0});
    EXPECT_FALSE(f.inverse_gamma);
    EXPECT_DOUBLE_EQ(f.exp_rate, 0.25);
    EXPECT_THROW((void)fit_duration_models(std::vector<double>{4.0}), std::invalid_argument);
}

TEST(Histogram, SingleValueOneBin) {
    const auto h = histogram_pdf(std::vector<double>(5, 2.0), {1.0, 3.0, 1, false});
    EXPECT_DOUBLE_EQ(h.density[0], 0.5);
}

TEST(Histogram, NormalizedLinearAndLog) {
    std::mt19937_64 rng(4);
    std::lognormal_distribution<double> d(1.0, 1.5);
    std::vector<double> x(50'000);
    for (auto& v : x) v = d(rng);
    for (bool lg : {false, true}) {
        const auto h = histogram_pdf(x, {0.01, 500.0, 40, lg});
        double s = 0.0;
        for (std::size_t i = 0; i < h.density.size(); ++i) s += h.density[i] * (h.edges[i + 1] - h.edges[i]);
        EXPECT_NEAR(s, 1.0, 1e-12);
        EXPECT_EQ(h.edges.size(), 41u);
        EXPECT_GT(h.outside, 0u);
    }
    EXPECT_THROW((void)histogram_pdf(x, {0.0, 1.0, 4, true}), std::invalid_argument);
    EXPECT_THROW((void)histogram_pdf(x, {1.0, 1.0, 4, false}), std::invalid_argument);
}

// ---- long benchmark path ------------------------------------------------------

TEST(LongPath, CumulantsMatchModel) {
    const auto model = BenchmarkModel::kazarashi();
    const auto want = benchmark_summary(model);
    const auto got = cumulant_stats(long_benchmark_path().value);
    EXPECT_NEAR(got.mean / want.mean, 1.0, 0.05);
    EXPECT_NEAR(got.variance / want.variance, 1.0, 0.05);
    EXPECT_NEAR(got.skewness / want.skewness, 1.0, 0.05);
    EXPECT_NEAR(got.kurtosis / want.kurtosis, 1.0, 0.05);
}

TEST(LongPath, AcfMatchesClosedForm) {
    const auto model = BenchmarkModel::kazarashi();
    const auto acf = empirical_acf(long_benchmark_path().value, 100);
    for (std::size_t h = 0; h <= 100; ++h) {
        ASSERT_TRUE(acf[h]);
        EXPECT_NEAR(*acf[h], benchmark_acf(model, double(h)), 0.05) << h;
    }
}

TEST(LongPath, ThresholdDurations) {
    const auto& x = long_benchmark_path().value;
    const auto st = threshold_durations(x, 1.0, 20.0);
    EXPECT_NEAR(st.high.fraction / 0.2214, 1.0, 0.15);
    EXPECT_NEAR(st.high.mean / 21.98, 1.0, 0.15);
    EXPECT_GE(st.low.cv, 0.95);
    EXPECT_LE(st.low.cv, 1.20);
    EXPECT_GT(st.high.cv, 2.0);
    // exponential law rejected for high flow, plausible for low flow
    EXPECT_GT(st.high.cv, 1.5);
    EXPECT_LT(st.low.cv, 1.5);
}
