#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sil/interval_stats.hpp"

using namespace sil;

namespace {

std::vector<double> values_of(const MultiplicativeFunction& f, std::uint64_t lo, std::uint64_t hi) {
    const FactorSieve sieve(SieveConfig{}, hi);
    return evaluate_range(f, {lo, hi}, sieve);
}

IntervalSumSeries series_for(const MultiplicativeFunction& f, std::uint64_t X, std::uint64_t h, bool subtract = false) {
    const auto v = values_of(f, X, 2 * X + h);
    return sliding_sums(v, X, X, h, subtract);
}

} // namespace

TEST(SlidingSums, ConstantOne) {
    const auto s = series_for(constant_one(), 500, 17);
    ASSERT_EQ(s.sums.size(), 500U);
    for (const double S : s.sums) {
        EXPECT_EQ(S, 17.0);
    }
}

TEST(SlidingSums, LiouvilleSmall) {
    const auto s = series_for(liouville(), 10, 3);
    const int expect = oracle::liouville(11) + oracle::liouville(12) + oracle::liouville(13);
    EXPECT_EQ(s.at(10), expect);
    EXPECT_EQ(s.at(10), -3.0);
}

TEST(SlidingSums, AlternatingEvenWindowCancels) {
    const std::uint64_t X = 1000;
    const std::uint64_t h = 6;
    std::vector<double> v;
    for (std::uint64_t n = X; n < 2 * X + h; ++n) {
        v.push_back(n % 2 ? -1.0 : 1.0);
    }
    const auto s = sliding_sums(v, X, X, h);
    for (const double S : s.sums) {
        EXPECT_EQ(S, 0.0);
    }
}

TEST(SlidingSums, RecurrenceAndDirectAgree) {
    const std::uint64_t X = 20000;
    const std::uint64_t h = 141;
    const auto v = values_of(liouville(), X, 2 * X + h);
    const auto s = sliding_sums(v, X, X, h);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        const std::uint64_t k = X + rng() % X;
        int direct = 0;
        for (std::uint64_t n = k + 1; n <= k + h; ++n) {
            direct += oracle::liouville(n);
        }
        ASSERT_EQ(s.at(k), direct) << k;
    }
    for (std::uint64_t k = X; k + 1 < 2 * X; ++k) {
        ASSERT_EQ(s.at(k + 1) - s.at(k), v[k + 1 + h - X] - v[k + 1 - X]);
        ASSERT_LE(std::abs(s.at(k)), static_cast<double>(h));
    }
}

TEST(SlidingSums, RealValuesStayAccurate) {
    const std::uint64_t X = 50000;
    const std::uint64_t h = 300;
    std::vector<double> v;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::uint64_t n = X; n < 2 * X + h; ++n) {
        v.push_back(u(rng));
    }
    const auto s = sliding_sums(v, X, X, h);
    for (std::uint64_t k = X; k < 2 * X; k += 997) {
        long double d = 0;
        for (std::uint64_t n = k + 1; n <= k + h; ++n) {
            d += v[n - X];
        }
        ASSERT_NEAR(s.at(k), static_cast<double>(d), 1e-11);
    }
}

TEST(SlidingSums, InsufficientCoverage) {
    std::vector<double> v(100, 1.0);
    EXPECT_THROW(sliding_sums(v, 50, 80, 5), RangeError);
    EXPECT_THROW(sliding_sums(v, 41, 40, 5, true), RangeError);
    EXPECT_NO_THROW(sliding_sums(v, 41, 40, 5, false));
    EXPECT_THROW(sliding_sums(v, 10, 40, 0), ValidationError);
}

TEST(Variance, MatchesBruteForceDoubleLoop) {
    const std::uint64_t X = 10000;
    const std::uint64_t h = window_length(X, 0.5);
    ASSERT_EQ(h, 100U);
    auto s = series_for(liouville(), X, h);
    s.delta = 0.5;
    const auto rep = compute_variance(s);
    // Exact: V = sum_k S(k)^2 / (h^2 X), with S(k) from trial division.
    std::int64_t sum_sq = 0;
    for (std::uint64_t k = X; k < 2 * X; ++k) {
        std::int64_t S = 0;
        for (std::uint64_t n = k + 1; n <= k + h; ++n) {
            S += oracle::liouville(n);
        }
        sum_sq += S * S;
    }
    const double expect = static_cast<double>(sum_sq) / (static_cast<double>(h * h) * static_cast<double>(X));
    EXPECT_NEAR(rep.variance, expect, 1e-12 * expect);
    EXPECT_TRUE(rep.in_range());
    EXPECT_TRUE(rep.chebyshev_holds());
}

TEST(Variance, MeanSubtractedBruteForce) {
    const std::uint64_t X = 3000;
    const std::uint64_t h = 40;
    const auto v = values_of(liouville(), X, 2 * X + h);
    const auto s = sliding_sums(v, X, X, h, true);
    std::int64_t total = 0;
    for (std::uint64_t n = X; n <= 2 * X; ++n) {
        total += oracle::liouville(n);
    }
    ASSERT_EQ(s.mean.exact_sum, total);
    // sum_k (S X - total h)^2 / (h X)^2 / X in exact integers.
    __int128 acc = 0;
    for (std::uint64_t k = X; k < 2 * X; ++k) {
        std::int64_t S = 0;
        for (std::uint64_t n = k + 1; n <= k + h; ++n) {
            S += oracle::liouville(n);
        }
        const __int128 d = static_cast<__int128>(S) * X - static_cast<__int128>(total) * h;
        acc += d * d;
    }
    const double expect =
        static_cast<double>(acc) / (static_cast<double>(h * X) * static_cast<double>(h * X) * static_cast<double>(X));
    EXPECT_NEAR(compute_variance(s).variance, expect, 1e-12 * expect);
}

TEST(Variance, ConstantOneMeanSubtracted) {
    // The mean over [X, 2X] is (X+1)/X while every window average is 1, so V = 1/X^2 exactly.
    for (const std::uint64_t X : {100ULL, 10000ULL}) {
        const auto s = series_for(constant_one(), X, 10, true);
        const auto rep = compute_variance(s);
        const double expect = 1.0 / (static_cast<double>(X) * static_cast<double>(X));
        EXPECT_NEAR(rep.variance, expect, 1e-15 * expect);
        EXPECT_LE(rep.variance, 1e-4);
        EXPECT_EQ(exceptional_measure(s, 0.5), 0.0);
    }
}

TEST(Variance, SignFlipInvariance) {
    const std::uint64_t X = 40000;
    const std::uint64_t h = window_length(X, 0.4);
    auto v = values_of(random_sign(3), X, 2 * X + h);
    auto neg = v;
    for (auto& x : neg) {
        x = -x;
    }
    for (const bool subtract : {false, true}) {
        const auto a = compute_variance(sliding_sums(v, X, X, h, subtract));
        const auto b = compute_variance(sliding_sums(neg, X, X, h, subtract));
        EXPECT_EQ(a.variance, b.variance);
        EXPECT_EQ(a.exceptional_fraction, b.exceptional_fraction);
    }
}

TEST(Variance, ChebyshevForEveryThreshold) {
    const std::uint64_t X = 30000;
    for (const auto& f : {liouville(), mobius(), random_sign(8), constant_one()}) {
        for (const double delta : {0.2, 0.5, 0.8}) {
            for (const bool subtract : {false, true}) {
                const auto h = window_length(X, delta);
                const auto s = series_for(f, X, h, subtract);
                for (const double th : {0.01, 0.05, 0.1, 0.3, default_threshold(X), 0.9, 2.5}) {
                    const auto rep = compute_variance(s, th);
                    EXPECT_TRUE(rep.chebyshev_holds()) << f.name() << " " << delta << " " << th;
                    EXPECT_TRUE(rep.in_range());
                    EXPECT_EQ(rep.exceptional_fraction, exceptional_measure(s, th));
                }
            }
        }
    }
}

TEST(Exceptional, ThresholdAboveRangeIsZero) {
    const std::uint64_t X = 20000;
    const auto s = series_for(liouville(), X, window_length(X, 0.5), true);
    EXPECT_EQ(exceptional_measure(s, 1.0 + std::abs(s.mean.value) + 1e-9), 0.0);
    EXPECT_THROW(exceptional_measure(s, 0.0), ValidationError);
}

TEST(Exceptional, MillionAgainstLogPower) {
    const std::uint64_t X = 1'000'000;
    const auto s = series_for(liouville(), X, window_length(X, 0.5));
    const double th = default_threshold(X);
    const auto rep = compute_variance(s, th);
    EXPECT_LE(rep.exceptional_fraction, rep.variance * std::pow(std::log(1e6), 2.0 / 9.0));
}

TEST(WindowLength, FloorAndValidation) {
    EXPECT_EQ(window_length(10000, 0.5), 100U);
    EXPECT_EQ(window_length(1'000'000, 0.5), 1000U);
    EXPECT_EQ(window_length(1000, 1.0 / 3.0), 10U);
    EXPECT_THROW(window_length(100, 1.5), ValidationError);
    EXPECT_THROW(window_length(100, 0.0), ValidationError);
    try {
        window_length(100, 1.5);
    } catch (const ValidationError& e) {
        EXPECT_STREQ(e.what(), "delta must be in (0,1)");
    }
}

TEST(Variance, ScaledTrendAcrossX) {
    // variance * (log X)^{1/3} should not jump by more than half between decades.
    double prev = 0.0;
    for (const std::uint64_t X : {100'000ULL, 1'000'000ULL, 10'000'000ULL}) {
        const auto s = series_for(liouville(), X, window_length(X, 0.5));
        const double scaled = compute_variance(s).variance * std::cbrt(std::log(static_cast<double>(X)));
        if (prev > 0.0) {
            EXPECT_LE(scaled, 1.5 * prev) << X;
        }
        prev = scaled;
    }
}
