#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "supou/measures.hpp"

namespace supou {

/// Missing samples are NaN throughout.
[[nodiscard]] inline bool is_missing(double x) { return std::isnan(x); }

struct SeriesMoments {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  ///< population (1/n) central moment
    double m3 = 0.0;
    double m4 = 0.0;
};

/// Central moments of the non-missing values; two passes for accuracy.
[[nodiscard]] inline SeriesMoments series_moments(std::span<const double> x) {
    SeriesMoments s;
    double sum = 0.0;
    for (double v : x)
        if (!is_missing(v)) {
            sum += v;
            ++s.count;
        }
    if (s.count < 2) throw std::invalid_argument("need at least two non-missing values");
    s.mean = sum / static_cast<double>(s.count);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        if (is_missing(v)) continue;
        const double d = v - s.mean, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double n = static_cast<double>(s.count);
    s.variance = m2 / n;
    s.m3 = m3 / n;
    s.m4 = m4 / n;
    return s;
}

/// Sample mean, variance, skewness k3/k2^1.5 and kurtosis k4/k2^2 (cumulant ratios, as in `measures`).
/// @throws std::domain_error for a constant series
[[nodiscard]] inline CumulantSummary cumulant_stats(std::span<const double> x) {
    const auto s = series_moments(x);
    if (!(s.variance > 0.0)) throw std::domain_error("constant series: skewness and kurtosis are undefined");
    const double k4 = s.m4 - 3.0 * s.variance * s.variance;
    return standardize(s.mean, s.variance, s.m3, k4);
}

/// Autocorrelation at lags 0..max_lag with pairwise deletion of missing values.
/// Centering and normalization use the mean and variance of all present values.
/// A lag with fewer than two complete pairs is absent.
[[nodiscard]] inline std::vector<std::optional<double>> empirical_acf(std::span<const double> x, std::size_t max_lag) {
    if (x.size() <= max_lag) throw std::invalid_argument("series shorter than the largest lag");
    const auto s = series_moments(x);
    std::vector<double> d(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) d[t] = x[t] - s.mean;
    std::vector<std::optional<double>> out(max_lag + 1);
    out[0] = 1.0;
    for (std::size_t h = 1; h <= max_lag; ++h) {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 0; t + h < x.size(); ++t) {
            const double p = d[t] * d[t + h];
            if (std::isnan(p)) continue;
            acc += p;
            ++n;
        }
        if (n >= 2) out[h] = acc / static_cast<double>(n) / s.variance;
    }
    return out;
}

struct RegimeStats {
    std::size_t count = 0;   ///< complete runs
    double mean = 0.0;       ///< h
    double variance = 0.0;   ///< h^2, unbiased
    double cv = 0.0;
    double fraction = 0.0;   ///< share of non-missing samples in this regime
};

struct DurationStats {
    double threshold = 0.0;
    RegimeStats high;  ///< above the threshold
    RegimeStats low;   ///< not above
    std::vector<double> high_durations;
    std::vector<double> low_durations;
};

namespace detail {

inline RegimeStats summarize_runs(const std::vector<double>& d) {
    RegimeStats r;
    r.count = d.size();
    if (d.empty()) return r;
    double s = 0.0;
    for (double v : d) s += v;
    r.mean = s / static_cast<double>(d.size());
    if (d.size() > 1) {
        double q = 0.0;
        for (double v : d) q += (v - r.mean) * (v - r.mean);
        r.variance = q / static_cast<double>(d.size() - 1);
    }
    r.cv = std::sqrt(r.variance) / r.mean;
    return r;
}

}  // namespace detail

/// Runs above / not above x_thr measured in hours. Runs touching either end of the series or
/// a missing sample are truncated and left out of the duration lists; every non-missing sample
/// still counts towards the occurrence fractions.
[[nodiscard]] inline DurationStats threshold_durations(std::span<const double> x, double sampling, double x_thr) {
    if (x.empty()) throw std::invalid_argument("empty path");
    if (!(sampling > 0.0)) throw std::invalid_argument("sampling step must be positive");
    DurationStats st;
    st.threshold = x_thr;
    std::size_t nhigh = 0, nlow = 0;
    std::size_t t = 0;
    while (t < x.size()) {
        if (is_missing(x[t])) {
            ++t;
            continue;
        }
        const bool high = x[t] > x_thr;
        const std::size_t start = t;
        while (t < x.size() && !is_missing(x[t]) && (x[t] > x_thr) == high) ++t;
        const std::size_t len = t - start;
        (high ? nhigh : nlow) += len;
        const bool closed = start > 0 && !is_missing(x[start - 1]) && t < x.size() && !is_missing(x[t]);
        if (closed) (high ? st.high_durations : st.low_durations).push_back(static_cast<double>(len) * sampling);
    }
    st.high = detail::summarize_runs(st.high_durations);
    st.low = detail::summarize_runs(st.low_durations);
    const double n = static_cast<double>(nhigh + nlow);
    if (n > 0) {
        st.high.fraction = static_cast<double>(nhigh) / n;
        st.low.fraction = static_cast<double>(nlow) / n;
    }
    return st;
}

/// Density vartheta^zeta / Gamma(zeta) y^(-zeta-1) e^(-vartheta/y).
struct InverseGammaFit {
    double shape = 0.0;  ///< zeta
    double scale = 0.0;  ///< vartheta (h)

    [[nodiscard]] double mean() const { return scale / (shape - 1.0); }
    [[nodiscard]] double variance() const { return mean() * mean() / (shape - 2.0); }
    [[nodiscard]] double pdf(double y) const {
        if (!(y > 0.0)) return 0.0;
        return std::exp(shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(y) - scale / y);
    }
};

struct DurationModels {
    double exp_rate = 0.0;                       ///< 1/mean
    std::optional<InverseGammaFit> inverse_gamma;  ///< absent when the variance is zero
};

/// Moment fit: exponential rate 1/mean; inverse gamma with zeta = 2 + mean^2/var, vartheta = mean (zeta - 1).
[[nodiscard]] inline DurationModels fit_duration_moments(double mean, double variance) {
    if (!(mean > 0.0)) throw std::invalid_argument("mean duration must be positive");
    if (!(variance >= 0.0)) throw std::invalid_argument("variance must be nonnegative");
    DurationModels out;
    out.exp_rate = 1.0 / mean;
    if (variance > 0.0) {
        InverseGammaFit f;
        f.shape = 2.0 + mean * mean / variance;
        f.scale = mean * (f.shape - 1.0);
        out.inverse_gamma = f;
    }
    return out;
}

[[nodiscard]] inline DurationModels fit_duration_models(std::span<const double> durations) {
    if (durations.size() < 2) throw std::invalid_argument("need at least two durations");
    const auto r = detail::summarize_runs({durations.begin(), durations.end()});
    return fit_duration_moments(r.mean, r.variance);
}

struct BinSpec {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t count = 10;
    bool log_scale = false;
};

struct Histogram {
    std::vector<double> edges;    ///< count + 1 edges
    std::vector<double> density;  ///< per bin, integrates to 1 over the in-range samples
    std::size_t outside = 0;      ///< non-missing samples outside [lo, hi]
};

[[nodiscard]] inline Histogram histogram_pdf(std::span<const double> x, const BinSpec& spec) {
    if (spec.count == 0) throw std::invalid_argument("need at least one bin");
    if (!(spec.hi > spec.lo)) throw std::invalid_argument("bin range is empty");
    if (spec.log_scale && !(spec.lo > 0.0)) throw std::invalid_argument("log bins need a positive lower edge");
    Histogram h;
    const std::size_t n = spec.count;
    h.edges.resize(n + 1);
    const double a = spec.log_scale ? std::log(spec.lo) : spec.lo;
    const double b = spec.log_scale ? std::log(spec.hi) : spec.hi;
    for (std::size_t i = 0; i <= n; ++i) {
        const double e = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
        h.edges[i] = spec.log_scale ? std::exp(e) : e;
    }
    h.edges.front() = spec.lo;
    h.edges.back() = spec.hi;
    std::vector<double> counts(n, 0.0);
    double inside = 0.0;
    for (double v : x) {
        if (is_missing(v)) continue;
        if (v < spec.lo || v > spec.hi) {
            ++h.outside;
            continue;
        }
        const double u = spec.log_scale ? std::log(v) : v;
        auto i = static_cast<std::size_t>((u - a) / (b - a) * static_cast<double>(n));
        i = std::min(i, n - 1);
        // rounding at interior edges: defer to the explicit edge values
        while (i > 0 && v < h.edges[i]) --i;
        while (i + 1 < n && v >= h.edges[i + 1]) ++i;
        counts[i] += 1.0;
        inside += 1.0;
    }
    h.density.resize(n, 0.0);
    if (inside > 0.0)
        for (std::size_t i = 0; i < n; ++i) h.density[i] = counts[i] / (inside * (h.edges[i + 1] - h.edges[i]));
    return h;
}

}  // namespace supou
