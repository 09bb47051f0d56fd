#ifndef SIL_TESTS_ORACLES_HPP
#define SIL_TESTS_ORACLES_HPP

// Trial-division reference implementations. Nothing in here touches the sieve.

#include <cstdint>
#include <utility>
#include <vector>

namespace sil::oracle {

struct Factorization {
    std::vector<std::pair<std::uint64_t, unsigned>> factors;

    [[nodiscard]] unsigned big_omega() const {
        unsigned s = 0;
        for (const auto& [p, k] : factors) {
            s += k;
        }
        return s;
    }
    [[nodiscard]] int lambda() const { return (big_omega() % 2 == 0) ? 1 : -1; }

    [[nodiscard]] unsigned window_omega(double P, double Q) const {
        unsigned c = 0;
        for (const auto& [p, k] : factors) {
            c += (P <= static_cast<double>(p) && static_cast<double>(p) <= Q) ? 1 : 0;
        }
        return c;
    }
    [[nodiscard]] bool window_square(double P, double Q) const {
        for (const auto& [p, k] : factors) {
            if (k >= 2 && P <= static_cast<double>(p) && static_cast<double>(p) <= Q) {
                return true;
            }
        }
        return false;
    }
};

inline Factorization factor(std::uint64_t n) {
    Factorization f;
    for (std::uint64_t p = 2; p <= n / p; p += (p == 2 ? 1 : 2)) {
        unsigned k = 0;
        while (n % p == 0) {
            n /= p;
            ++k;
        }
        if (k) {
            f.factors.emplace_back(p, k);
        }
    }
    if (n > 1) {
        f.factors.emplace_back(n, 1);
    }
    return f;
}

inline bool is_prime(std::uint64_t n) {
    if (n < 2) {
        return false;
    }
    for (std::uint64_t d = 2; d <= n / d; ++d) {
        if (n % d == 0) {
            return false;
        }
    }
    return true;
}

inline int liouville(std::uint64_t n) { return factor(n).lambda(); }

} // namespace sil::oracle

#endif
