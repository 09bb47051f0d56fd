#ifndef SIL_INTERVAL_STATS_HPP
#define SIL_INTERVAL_STATS_HPP

// Short-interval sums S(k) = sum_{k+1 <= n <= k+h} f(n) for k in [X, 2X), and the
// statistics built on them.
//
// For real x in (k, k+1) the window {n : x <= n <= x + h} is exactly {k+1, ..., k+h},
// so x -> S(x) is a step function and
//   (1/X) * integral_X^{2X} |S(x)/h - m|^2 dx = (1/X) * sum_{k=X}^{2X-1} |S(k)/h - m|^2
// with no quadrature error. Every statistic here is such a finite sum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sil/error.hpp"
#include "sil/multiplicative.hpp"
#include "sil/numeric.hpp"

namespace sil {

inline constexpr std::size_t kReductionChunk = std::size_t{1} << 20;

/// Maps a window sum S to the normalized deviation S/h - m.
///
/// With an exact integer mean numerator and integer S the numerator S*X - sum*h is
/// formed in integer arithmetic, so the only rounding is the final division.
class DeviationModel {
public:
    DeviationModel(std::uint64_t X, std::uint64_t h, bool subtract_mean, const MeanValue& mean)
        : X_(X), h_(h), subtract_(subtract_mean), mean_(mean) {}

    [[nodiscard]] double operator()(double S) const noexcept {
        if (!subtract_) {
            return S / static_cast<double>(h_);
        }
        if (mean_.exact_sum && S == std::trunc(S)) {
            const auto num = static_cast<__int128>(static_cast<std::int64_t>(S)) * X_ -
                             static_cast<__int128>(*mean_.exact_sum) * h_;
            return static_cast<double>(num) / (static_cast<double>(h_) * static_cast<double>(X_));
        }
        return S / static_cast<double>(h_) - mean_.value;
    }

    [[nodiscard]] double subtracted_mean() const noexcept { return subtract_ ? mean_.value : 0.0; }

private:
    std::uint64_t X_;
    std::uint64_t h_;
    bool subtract_;
    MeanValue mean_;
};

/// Partial sums for the variance and the exceptional count over a run of k.
struct DeviationPartial {
    CompensatedSum sum_squares;
    std::uint64_t exceptional = 0;
    std::uint64_t count = 0;

    void merge(const DeviationPartial& other) noexcept {
        sum_squares.merge(other.sum_squares);
        exceptional += other.exceptional;
        count += other.count;
    }
};

inline DeviationPartial accumulate_deviation(std::span<const double> sums, const DeviationModel& model, double threshold) {
    DeviationPartial part;
    for (const double S : sums) {
        const double d = model(S);
        part.sum_squares.add(d * d);
        if (std::abs(d) >= threshold) {
            ++part.exceptional;
        }
    }
    part.count = sums.size();
    return part;
}

/// Default Chebyshev threshold (log X)^(-1/9).
inline double default_threshold(std::uint64_t X) { return std::pow(std::log(static_cast<double>(X)), -1.0 / 9.0); }

struct IntervalSumSeries {
    std::uint64_t X = 0;
    std::uint64_t h = 0;
    std::optional<double> delta;
    /// sums[i] = S(X + i).
    std::vector<double> sums;
    bool subtract_mean = false;
    MeanValue mean;

    [[nodiscard]] double at(std::uint64_t k) const { return sums.at(k - X); }
    [[nodiscard]] DeviationModel deviation() const { return {X, h, subtract_mean, mean}; }
};

namespace detail {

inline bool all_integral(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == std::trunc(x); });
}

inline double direct_window_sum(std::span<const double> values, std::uint64_t first_n, std::uint64_t k, std::uint64_t h) {
    CompensatedSum s;
    for (std::uint64_t n = k + 1; n <= k + h; ++n) {
        s.add(values[n - first_n]);
    }
    return s.value();
}

} // namespace detail

/// S(k) for k in [X, 2X) from values of f starting at n = first_n.
///
/// Needs values on [X+1, 2X+h-1], plus n = X when subtract_mean (the mean runs over
/// [X, 2X]). Integer-valued input uses the exact sliding recurrence; real input is
/// re-anchored by a direct compensated sum every 1024 steps.
inline IntervalSumSeries sliding_sums(std::span<const double> values, std::uint64_t first_n, std::uint64_t X,
                                      std::uint64_t h, bool subtract_mean = false) {
    if (h < 1) {
        throw ValidationError("window length h must be at least 1");
    }
    if (X < 1) {
        throw ValidationError("X must be at least 1");
    }
    const std::uint64_t need_lo = subtract_mean ? X : X + 1;
    const std::uint64_t need_hi = std::max(2 * X + h - 1, subtract_mean ? 2 * X : 0);
    if (first_n > need_lo || first_n + values.size() <= need_hi) {
        throw RangeError("values cover [" + std::to_string(first_n) + ", " + std::to_string(first_n + values.size()) +
                         ") but the series needs [" + std::to_string(need_lo) + ", " + std::to_string(need_hi) + "]");
    }
    IntervalSumSeries series;
    series.X = X;
    series.h = h;
    series.subtract_mean = subtract_mean;
    series.mean.X = X;
    if (subtract_mean) {
        const auto mean_values = values.subspan(X - first_n, X + 1);
        if (detail::all_integral(mean_values)) {
            std::int64_t s = 0;
            for (const double v : mean_values) {
                s += static_cast<std::int64_t>(v);
            }
            series.mean.exact_sum = s;
            series.mean.value = static_cast<double>(s) / static_cast<double>(X);
        } else {
            CompensatedSum s;
            for (const double v : mean_values) {
                s.add(v);
            }
            series.mean.value = s.value() / static_cast<double>(X);
        }
    }
    const bool integral = detail::all_integral(values.subspan(X + 1 - first_n, X + h - 1));
    series.sums.resize(X);
    double S = detail::direct_window_sum(values, first_n, X, h);
    series.sums[0] = S;
    for (std::uint64_t i = 1; i < X; ++i) {
        const std::uint64_t k = X + i;
        if (!integral && i % 1024 == 0) {
            S = detail::direct_window_sum(values, first_n, k, h);
        } else {
            S += values[k + h - first_n] - values[k - first_n];
        }
        series.sums[i] = S;
    }
    // Spot check against direct summation at 100 reproducible positions.
    for (std::uint64_t j = 0; j < 100; ++j) {
        const std::uint64_t k = X + splitmix64(j ^ (X << 20) ^ h) % X;
        const double direct = detail::direct_window_sum(values, first_n, k, h);
        const double tol = integral ? 0.0 : 1e-9 * static_cast<double>(h);
        if (std::abs(direct - series.at(k)) > tol) {
            throw Error("sliding recurrence disagrees with direct summation at k = " + std::to_string(k));
        }
    }
    return series;
}

struct VarianceReport {
    std::uint64_t X = 0;
    std::optional<double> delta;
    std::uint64_t h = 0;
    double variance = 0.0;
    double threshold = 0.0;
    double exceptional_fraction = 0.0;
    double mean = 0.0;
    bool subtract_mean = false;

    /// exceptional_fraction <= variance / threshold^2.
    [[nodiscard]] bool chebyshev_holds() const noexcept {
        return exceptional_fraction * threshold * threshold <= variance;
    }
    /// 0 <= variance <= (1 + |m|)^2, 0 <= exceptional_fraction <= 1.
    [[nodiscard]] bool in_range() const noexcept {
        const double cap = (1.0 + std::abs(mean)) * (1.0 + std::abs(mean));
        return variance >= 0.0 && variance <= cap * (1.0 + 1e-12) && exceptional_fraction >= 0.0 &&
               exceptional_fraction <= 1.0;
    }
};

/// Builds the report from a completed reduction.
inline VarianceReport make_variance_report(std::uint64_t X, std::optional<double> delta, std::uint64_t h,
                                           const DeviationModel& model, bool subtract_mean, double threshold,
                                           const DeviationPartial& total) {
    VarianceReport r;
    r.X = X;
    r.delta = delta;
    r.h = h;
    r.variance = total.sum_squares.value() / static_cast<double>(X);
    r.threshold = threshold;
    r.exceptional_fraction = static_cast<double>(total.exceptional) / static_cast<double>(X);
    r.mean = model.subtracted_mean();
    r.subtract_mean = subtract_mean;
    return r;
}

inline DeviationPartial reduce_series(const IntervalSumSeries& series, double threshold) {
    const auto model = series.deviation();
    DeviationPartial total;
    for (std::size_t lo = 0; lo < series.sums.size(); lo += kReductionChunk) {
        const std::size_t len = std::min(kReductionChunk, series.sums.size() - lo);
        total.merge(accumulate_deviation(std::span<const double>(series.sums).subspan(lo, len), model, threshold));
    }
    return total;
}

/// V = (1/X) sum_{k=X}^{2X-1} |S(k)/h - m|^2, together with the exceptional fraction at `threshold`.
inline VarianceReport compute_variance(const IntervalSumSeries& series, double threshold) {
    if (!(threshold > 0.0)) {
        throw ValidationError("threshold must be positive");
    }
    const auto total = reduce_series(series, threshold);
    return make_variance_report(series.X, series.delta, series.h, series.deviation(), series.subtract_mean, threshold,
                                total);
}

inline VarianceReport compute_variance(const IntervalSumSeries& series) {
    return compute_variance(series, default_threshold(series.X));
}

/// Fraction of k in [X, 2X) with |S(k)/h - m| >= threshold.
inline double exceptional_measure(const IntervalSumSeries& series, double threshold) {
    if (!(threshold > 0.0)) {
        throw ValidationError("threshold must be positive");
    }
    const auto total = reduce_series(series, threshold);
    return static_cast<double>(total.exceptional) / static_cast<double>(series.X);
}

} // namespace sil

#endif
