#ifndef SIL_NUMERIC_HPP
#define SIL_NUMERIC_HPP

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <system_error>

#include "sil/error.hpp"

namespace sil {

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
public:
    CompensatedSum() = default;
    explicit CompensatedSum(double initial) : sum_(initial) {}

    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }

    /// Folds another partial sum in; used for ordered reductions of chunk partials.
    void merge(const CompensatedSum& other) noexcept {
        add(other.sum_);
        add(other.comp_);
    }

    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

class CompensatedComplexSum {
public:
    void add(std::complex<double> z) noexcept {
        re_.add(z.real());
        im_.add(z.imag());
    }
    void merge(const CompensatedComplexSum& other) noexcept {
        re_.merge(other.re_);
        im_.merge(other.im_);
    }
    [[nodiscard]] std::complex<double> value() const noexcept { return {re_.value(), im_.value()}; }

private:
    CompensatedSum re_;
    CompensatedSum im_;
};

inline std::uint64_t isqrt(std::uint64_t n) noexcept {
    auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
    while (r > 0 && r > n / r) {
        --r;
    }
    while ((r + 1) <= n / (r + 1)) {
        ++r;
    }
    return r;
}

/// Window length h = floor(X^delta), robust against pow() landing just below an integer.
inline std::uint64_t window_length(std::uint64_t X, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw ValidationError("delta must be in (0,1)");
    }
    const double v = std::pow(static_cast<double>(X), delta);
    const auto h = static_cast<std::uint64_t>(std::floor(v * (1.0 + 1e-12)));
    if (h < 1) {
        throw ValidationError("window length floor(X^delta) must be at least 1");
    }
    return h;
}

/// Locale-independent shortest-general formatting with 17 significant digits.
inline std::string format17(double x) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
    if (ec != std::errc{}) {
        return "nan";
    }
    return std::string(buf.data(), ptr);
}

/// SplitMix64 finalizer; used to derive reproducible per-prime signs from a seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace sil

#endif
