#ifndef SIL_SIEVE_HPP
#define SIL_SIEVE_HPP

// Segmented factorization sieve.
//
// For every integer n in a half-open block [lo, hi) the sieve records
//   big_omega(n)          number of prime factors counted with multiplicity,
//   lambda(n)             (-1)^big_omega(n),
//   window_omega(n)       number of distinct primes p in the closed window [P, Q] dividing n,
//   window_square_flag(n) whether p^2 | n for some prime p in [P, Q].
//
// No factorizations are stored. Each segment walks the prime powers p^k of the
// base primes p <= sqrt(hi - 1) and multiplies a running product of the
// removed part; whatever is left over is a single prime larger than sqrt(hi - 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sil/error.hpp"
#include "sil/numeric.hpp"

namespace sil {

inline constexpr std::uint64_t kRangeCap = std::uint64_t{1} << 63;

/// Half-open integer interval [lo, hi).
struct IntegerRange {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;

    [[nodiscard]] std::uint64_t size() const noexcept { return hi > lo ? hi - lo : 0; }
    [[nodiscard]] bool empty() const noexcept { return hi <= lo; }
    friend bool operator==(const IntegerRange&, const IntegerRange&) = default;
};

/// Closed real window [lower, upper] of primes; integer p belongs iff lower <= p <= upper.
struct PrimeWindow {
    double lower = 2.0;
    double upper = 2.0;

    [[nodiscard]] bool contains(std::uint64_t p) const noexcept {
        const auto x = static_cast<double>(p);
        return lower <= x && x <= upper;
    }
    friend bool operator==(const PrimeWindow&, const PrimeWindow&) = default;
};

struct SieveConfig {
    std::uint64_t block_size = std::uint64_t{1} << 22;
    PrimeWindow window{};
    /// Longest range a single materialized FactorBlock may cover.
    std::uint64_t max_block_length = std::uint64_t{1} << 30;

    void validate() const {
        if (block_size < 1) {
            throw ValidationError("block_size must be at least 1");
        }
        if (!(window.lower >= 2.0) || !(window.lower <= window.upper) || !std::isfinite(window.upper)) {
            throw ValidationError("prime window must satisfy 2 <= P <= Q");
        }
    }
};

struct FactorBlock {
    IntegerRange range;
    PrimeWindow window;
    std::vector<std::uint8_t> big_omega;
    std::vector<std::int8_t> lambda;
    std::vector<std::uint8_t> window_omega;
    std::vector<std::uint8_t> window_square_flag;

    [[nodiscard]] std::size_t size() const noexcept { return big_omega.size(); }
    [[nodiscard]] bool empty() const noexcept { return big_omega.empty(); }

    void resize(std::size_t n) {
        big_omega.assign(n, 0);
        lambda.assign(n, 1);
        window_omega.assign(n, 0);
        window_square_flag.assign(n, 0);
    }
};

namespace detail {

/// Plain sieve of Eratosthenes for the primes <= limit.
inline std::vector<std::uint32_t> small_primes(std::uint64_t limit) {
    std::vector<std::uint32_t> primes;
    if (limit < 2) {
        return primes;
    }
    std::vector<bool> composite(limit + 1, false);
    for (std::uint64_t i = 2; i <= limit; ++i) {
        if (composite[i]) {
            continue;
        }
        primes.push_back(static_cast<std::uint32_t>(i));
        for (std::uint64_t j = i * i; j <= limit; j += i) {
            composite[j] = true;
        }
    }
    return primes;
}

inline std::uint64_t first_multiple_at_least(std::uint64_t m, std::uint64_t lo) noexcept {
    const std::uint64_t r = lo % m;
    return r == 0 ? lo : lo + (m - r);
}

inline void check_cap(std::uint64_t hi) {
    if (hi > kRangeCap) {
        throw CapacityError("range exceeds 2^63");
    }
}

} // namespace detail

/// Segmented sieve of Eratosthenes; ascending primes in the inclusive real interval [lower, upper].
inline std::vector<std::uint64_t> primes_in(double lower, double upper, std::uint64_t segment = std::uint64_t{1} << 20) {
    std::vector<std::uint64_t> out;
    if (!(upper >= 2.0) || !(lower <= upper)) {
        return out;
    }
    if (upper >= static_cast<double>(kRangeCap)) {
        throw CapacityError("prime interval exceeds 2^63");
    }
    const auto lo = static_cast<std::uint64_t>(std::max(2.0, std::ceil(lower)));
    const auto hi = static_cast<std::uint64_t>(std::floor(upper));
    if (lo > hi) {
        return out;
    }
    const auto base = detail::small_primes(isqrt(hi));
    std::vector<std::uint8_t> composite;
    for (std::uint64_t seg_lo = lo; seg_lo <= hi;) {
        const std::uint64_t seg_hi = std::min(hi, seg_lo + segment - 1);
        composite.assign(seg_hi - seg_lo + 1, 0);
        for (const std::uint64_t p : base) {
            if (p * p > seg_hi) {
                break;
            }
            std::uint64_t start = std::max(p * p, detail::first_multiple_at_least(p, seg_lo));
            for (std::uint64_t m = start; m <= seg_hi; m += p) {
                composite[m - seg_lo] = 1;
            }
        }
        for (std::uint64_t i = 0; i < composite.size(); ++i) {
            if (!composite[i]) {
                out.push_back(seg_lo + i);
            }
        }
        if (seg_hi == hi) {
            break;
        }
        seg_lo = seg_hi + 1;
    }
    return out;
}

/// Factorization sieve with its base primes precomputed for every n < upper_bound.
///
/// Immutable after construction; `fill`, `block` and `for_each_segment` are safe
/// to call concurrently.
class FactorSieve {
public:
    FactorSieve(SieveConfig config, std::uint64_t upper_bound) : config_(config), upper_bound_(upper_bound) {
        config_.validate();
        detail::check_cap(upper_bound);
        const std::uint64_t root = upper_bound > 1 ? isqrt(upper_bound - 1) : 0;
        for (const auto p : primes_in(2.0, static_cast<double>(root))) {
            base_.push_back(static_cast<std::uint32_t>(p));
        }
    }

    [[nodiscard]] const SieveConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::uint64_t upper_bound() const noexcept { return upper_bound_; }
    [[nodiscard]] std::span<const std::uint32_t> base_primes() const noexcept { return base_; }

    /// Sieves [range.lo, range.hi) into out[offset, offset + range.size()).
    void fill(IntegerRange range, FactorBlock& out, std::size_t offset) const {
        check(range);
        std::vector<std::uint64_t> removed(std::min<std::uint64_t>(range.size(), kTile));
        for (std::uint64_t lo = range.lo; lo < range.hi;) {
            const std::uint64_t hi = lo + std::min(kTile, range.hi - lo);
            fill_tile({lo, hi}, out, offset + (lo - range.lo), removed);
            lo = hi;
        }
    }

    [[nodiscard]] FactorBlock block(IntegerRange range) const {
        if (range.size() > config_.max_block_length) {
            throw CapacityError("block of " + std::to_string(range.size()) +
                                " integers exceeds the configured memory budget of " +
                                std::to_string(config_.max_block_length));
        }
        FactorBlock out;
        out.range = range.empty() ? IntegerRange{range.lo, range.lo} : range;
        out.window = config_.window;
        out.resize(range.size());
        for (std::uint64_t lo = range.lo; lo < range.hi; lo += std::min(config_.block_size, range.hi - lo)) {
            const std::uint64_t hi = lo + std::min(config_.block_size, range.hi - lo);
            fill({lo, hi}, out, lo - range.lo);
        }
        return out;
    }

    /// Calls fn(const FactorBlock&) for consecutive segments of at most block_size integers.
    template <class Fn>
    void for_each_segment(IntegerRange range, Fn&& fn) const {
        check(range);
        FactorBlock seg;
        seg.window = config_.window;
        for (std::uint64_t lo = range.lo; lo < range.hi;) {
            const std::uint64_t hi = lo + std::min(config_.block_size, range.hi - lo);
            seg.range = {lo, hi};
            seg.resize(hi - lo);
            fill(seg.range, seg, 0);
            fn(std::as_const(seg));
            lo = hi;
        }
    }

    /// Value-accumulation mode: out[i] = prod over p^k || n of value(p, k), n = range.lo + i.
    ///
    /// `value` is called once per (base prime, exponent) pair occurring in the range
    /// and once per n for the large cofactor prime, with k = 1.
    template <class ValueFn>
    void accumulate_values(IntegerRange range, ValueFn&& value, std::span<double> out) const {
        check(range);
        if (out.size() < range.size()) {
            throw RangeError("output span shorter than range");
        }
        for (std::uint64_t lo = range.lo; lo < range.hi;) {
            const std::uint64_t hi = lo + std::min(kTile, range.hi - lo);
            accumulate_segment({lo, hi}, value, out.subspan(lo - range.lo, hi - lo));
            lo = hi;
        }
    }

private:
    // Inner cache tile; segments of block_size integers are processed in tiles of this length.
    static constexpr std::uint64_t kTile = std::uint64_t{1} << 16;

    void fill_tile(IntegerRange range, FactorBlock& out, std::size_t offset, std::vector<std::uint64_t>& removed) const {
        const std::size_t len = range.size();
        std::fill_n(removed.begin(), len, std::uint64_t{1});
        auto* omega = out.big_omega.data() + offset;
        auto* wom = out.window_omega.data() + offset;
        auto* flag = out.window_square_flag.data() + offset;
        std::fill_n(omega, len, std::uint8_t{0});
        std::fill_n(wom, len, std::uint8_t{0});
        std::fill_n(flag, len, std::uint8_t{0});
        const std::uint64_t last = range.hi - 1;
        const PrimeWindow& window = config_.window;
        for (const std::uint64_t p : base_) {
            if (p > last / p) {
                break;
            }
            const bool in_window = window.contains(p);
            std::uint64_t pk = p;
            for (unsigned k = 1;; ++k) {
                for (std::uint64_t m = detail::first_multiple_at_least(pk, range.lo); m < range.hi; m += pk) {
                    const std::size_t i = m - range.lo;
                    ++omega[i];
                    removed[i] *= p;
                    if (in_window) {
                        if (k == 1) {
                            ++wom[i];
                        } else if (k == 2) {
                            flag[i] = 1;
                        }
                    }
                }
                if (pk > last / p) {
                    break;
                }
                pk *= p;
            }
        }
        auto* lam = out.lambda.data() + offset;
        for (std::size_t i = 0; i < len; ++i) {
            const std::uint64_t n = range.lo + i;
            if (removed[i] < n) {
                ++omega[i];
                if (window.contains(n / removed[i])) {
                    ++wom[i];
                }
            }
            lam[i] = (omega[i] & 1U) ? std::int8_t{-1} : std::int8_t{1};
        }
    }

    void check(IntegerRange range) const {
        if (range.empty()) {
            return;
        }
        if (range.lo == 0) {
            throw ValidationError("ranges start at n = 1");
        }
        detail::check_cap(range.hi);
        if (range.hi > upper_bound_) {
            throw RangeError("range end " + std::to_string(range.hi) + " exceeds sieve bound " +
                             std::to_string(upper_bound_));
        }
    }

    template <class ValueFn>
    void accumulate_segment(IntegerRange range, ValueFn& value, std::span<double> out) const {
        const std::size_t len = range.size();
        std::vector<std::uint64_t> removed(len, 1);
        std::vector<std::uint8_t> exponent(len, 0);
        std::fill(out.begin(), out.end(), 1.0);
        const std::uint64_t last = range.hi - 1;
        std::vector<double> power_values;
        for (const std::uint64_t p : base_) {
            if (p > last / p) {
                break;
            }
            const std::uint64_t first = detail::first_multiple_at_least(p, range.lo);
            if (first >= range.hi) {
                continue;
            }
            std::uint64_t pk = p;
            unsigned max_k = 1;
            for (unsigned k = 1;; ++k) {
                for (std::uint64_t m = detail::first_multiple_at_least(pk, range.lo); m < range.hi; m += pk) {
                    exponent[m - range.lo] = static_cast<std::uint8_t>(k);
                    removed[m - range.lo] *= p;
                    max_k = k;
                }
                if (pk > last / p) {
                    break;
                }
                pk *= p;
            }
            power_values.assign(max_k + 1, std::numeric_limits<double>::quiet_NaN());
            for (std::uint64_t m = first; m < range.hi; m += p) {
                const std::size_t i = m - range.lo;
                const unsigned k = exponent[i];
                if (std::isnan(power_values[k])) {
                    power_values[k] = value(p, k);
                }
                out[i] *= power_values[k];
            }
        }
        for (std::size_t i = 0; i < len; ++i) {
            const std::uint64_t n = range.lo + i;
            if (removed[i] < n) {
                out[i] *= value(n / removed[i], 1U);
            }
        }
    }

    SieveConfig config_;
    std::uint64_t upper_bound_;
    std::vector<std::uint32_t> base_;
};

/// One-shot sieve of a single block.
inline FactorBlock sieve_block(IntegerRange range, const SieveConfig& config) {
    const FactorSieve sieve(config, std::max<std::uint64_t>(range.hi, 2));
    return sieve.block(range);
}

/// #{n in [X, 2X] : no prime factor of n lies in [P, Q]}.
inline std::uint64_t rough_count(std::uint64_t X, double P, double Q, std::uint64_t block_size = std::uint64_t{1} << 22) {
    if (!(P >= 2.0 && P <= Q && Q <= 2.0 * static_cast<double>(X))) {
        throw ValidationError("rough_count requires 2 <= P <= Q <= 2X");
    }
    SieveConfig config;
    config.block_size = block_size;
    config.window = {P, Q};
    const FactorSieve sieve(config, 2 * X + 1);
    std::uint64_t count = 0;
    sieve.for_each_segment({X, 2 * X + 1}, [&](const FactorBlock& seg) {
        count += static_cast<std::uint64_t>(std::count(seg.window_omega.begin(), seg.window_omega.end(), 0));
    });
    return count;
}

} // namespace sil

#endif
