#ifndef SIL_DECOMP_HPP
#define SIL_DECOMP_HPP

// Weighted prime-window decomposition of sum_{X <= n <= 2X} lambda(n) n^{-1-it} over a prime
// window [P, Q], and its splitting into short multiplicative ranges of primes.
//
// With omega_W(m) = #{p in [P, Q] : p | m} and a_m = lambda(m) / (omega_W(m) + 1):
//
//   lhs      = sum_{X <= n <= 2X} lambda(n) n^{-s}
//   main     = sum_{P <= p <= Q} lambda(p) p^{-s} sum_{X <= mp <= 2X} a_m m^{-s}
//   rough    = sum_{X <= n <= 2X, no prime factor in [P, Q]} lambda(n) n^{-s}
//   residual = lhs - main - rough.
//
// A windowed n with k = omega_W(n) has r representations n = pm with p in the
// window, p not dividing m (weight 1/k each), and q with p | m (weight 1/(k+1)).
// Its residual weight is lambda(n) (1 - r/k - q/(k+1)), which vanishes exactly when
// q = 0, i.e. when no window prime divides n twice. The audit below tracks r and q
// as integers so this support statement is checked without rounding.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sil/dirichlet.hpp"
#include "sil/error.hpp"
#include "sil/numeric.hpp"
#include "sil/sieve.hpp"

namespace sil {

/// Sieve data and weights a_m shared by every evaluation of one (X, P, Q) instance.
class RamareContext {
public:
    RamareContext(std::uint64_t X, double P, double Q, std::uint64_t m_max = 0) : X_(X), window_{P, Q} {
        if (X < 1) {
            throw ValidationError("X must be at least 1");
        }
        if (!(P >= 2.0 && P <= Q && Q <= 2.0 * static_cast<double>(X))) {
            throw ValidationError("window must satisfy 2 <= P <= Q <= 2X");
        }
        top_ = std::max<std::uint64_t>(2 * X, m_max);
        SieveConfig config;
        config.window = window_;
        block_ = sieve_block({1, top_ + 1}, config);
        primes_ = primes_in(P, Q);
        auto weights = std::make_shared<std::vector<double>>(top_ + 1, 0.0);
        for (std::uint64_t m = 1; m <= top_; ++m) {
            (*weights)[m] = static_cast<double>(block_.lambda[m - 1]) / (block_.window_omega[m - 1] + 1.0);
        }
        weights_ = std::move(weights);
        plain_.assign(X + 1, 0);
        squared_.assign(X + 1, 0);
        for (const std::uint64_t p : primes_) {
            for (std::uint64_t m = (X + p - 1) / p; m <= (2 * X) / p; ++m) {
                const std::uint64_t i = p * m - X;
                if (m % p == 0) {
                    ++squared_[i];
                } else {
                    ++plain_[i];
                }
            }
        }
    }

    [[nodiscard]] std::uint64_t X() const noexcept { return X_; }
    [[nodiscard]] const PrimeWindow& window() const noexcept { return window_; }
    [[nodiscard]] const std::vector<std::uint64_t>& primes() const noexcept { return primes_; }
    /// Largest n covered by the sieve data.
    [[nodiscard]] std::uint64_t top() const noexcept { return top_; }
    [[nodiscard]] int lambda(std::uint64_t n) const { return block_.lambda[n - 1]; }
    [[nodiscard]] unsigned window_omega(std::uint64_t n) const { return block_.window_omega[n - 1]; }
    [[nodiscard]] bool square_flag(std::uint64_t n) const { return block_.window_square_flag[n - 1] != 0; }
    /// a_m = lambda(m) / (omega_W(m) + 1), indexed by m in [0, top]; entry 0 is unused.
    [[nodiscard]] const std::shared_ptr<const std::vector<double>>& weights() const noexcept { return weights_; }

    /// Representations n = pm (p in window, p does not divide m) for n in [X, 2X].
    [[nodiscard]] unsigned plain_representations(std::uint64_t n) const { return plain_[n - X_]; }
    /// Representations n = pm (p in window, p | m) for n in [X, 2X].
    [[nodiscard]] unsigned squared_representations(std::uint64_t n) const { return squared_[n - X_]; }

    /// Numerator of the exact per-n residual weight, over the denominator k(k+1), k = omega_W(n).
    [[nodiscard]] std::int64_t residual_numerator(std::uint64_t n) const {
        const std::int64_t k = window_omega(n);
        if (k == 0) {
            return 0;
        }
        return k * (k + 1) - static_cast<std::int64_t>(plain_representations(n)) * (k + 1) -
               static_cast<std::int64_t>(squared_representations(n)) * k;
    }

    [[nodiscard]] double residual_weight(std::uint64_t n) const {
        const double k = window_omega(n);
        return k == 0.0 ? 0.0 : static_cast<double>(residual_numerator(n)) / (k * (k + 1.0));
    }

    /// u[m] = m^{-1-it} for m in [1, top]; entry 0 is unused.
    [[nodiscard]] std::vector<std::complex<double>> phases(double t) const {
        std::vector<std::complex<double>> u(top_ + 1);
        for (std::uint64_t m = 1; m <= top_; ++m) {
            const double phase = t * std::log(static_cast<double>(m));
            u[m] = std::complex<double>(std::cos(phase), -std::sin(phase)) / static_cast<double>(m);
        }
        return u;
    }

    /// Coefficients on [X, 2X] of sum_p p^{-s} sum_m a_m m^{-s}, i.e. sum over p | n of a_{n/p}.
    [[nodiscard]] DirichletPoly bilinear_poly() const {
        std::vector<double> c(X_ + 1, 0.0);
        for (const std::uint64_t p : primes_) {
            for (std::uint64_t m = (X_ + p - 1) / p; m <= (2 * X_) / p; ++m) {
                c[p * m - X_] += (*weights_)[m];
            }
        }
        return DirichletPoly::dense(X_, std::move(c));
    }

    [[nodiscard]] DirichletPoly rough_poly() const {
        std::vector<double> c(X_ + 1, 0.0);
        for (std::uint64_t n = X_; n <= 2 * X_; ++n) {
            c[n - X_] = window_omega(n) == 0 ? lambda(n) : 0.0;
        }
        return DirichletPoly::dense(X_, std::move(c));
    }

    [[nodiscard]] DirichletPoly lambda_poly() const {
        std::vector<double> c(X_ + 1);
        for (std::uint64_t n = X_; n <= 2 * X_; ++n) {
            c[n - X_] = lambda(n);
        }
        return DirichletPoly::dense(X_, std::move(c));
    }

private:
    std::uint64_t X_;
    PrimeWindow window_;
    std::uint64_t top_ = 0;
    FactorBlock block_;
    std::vector<std::uint64_t> primes_;
    std::shared_ptr<const std::vector<double>> weights_;
    std::vector<std::uint8_t> plain_;
    std::vector<std::uint8_t> squared_;
};

struct RamareDecomposition {
    std::uint64_t X = 0;
    PrimeWindow window;
    double t = 0.0;
    std::complex<double> lhs;
    std::complex<double> main;
    /// sum_p p^{-s} sum_m a_m m^{-s}, i.e. main without the factor lambda(p) = -1.
    std::complex<double> bilinear;
    std::complex<double> rough;
    std::complex<double> residual;
    /// The residual rebuilt from the exact per-n weights.
    std::complex<double> residual_audit;
    /// sum_{X <= n <= 2X} 1/n, the scale for relative errors.
    double mass = 0.0;
    std::uint64_t residual_support_count = 0;
    std::uint64_t square_flag_count = 0;
    /// Every n with a nonzero residual weight has window_square_flag set, and conversely.
    bool support_matches = true;

    /// |lhs - (main + rough + residual_audit)| / mass.
    [[nodiscard]] double additivity_error() const { return std::abs(lhs - (main + rough + residual_audit)) / mass; }
};

inline RamareDecomposition ramare_decompose(const RamareContext& ctx, double t) {
    const std::uint64_t X = ctx.X();
    const auto u = ctx.phases(t);
    const auto& a = *ctx.weights();
    RamareDecomposition r;
    r.X = X;
    r.window = ctx.window();
    r.t = t;

    CompensatedComplexSum lhs;
    CompensatedComplexSum rough;
    CompensatedComplexSum audit;
    CompensatedSum mass;
    for (std::uint64_t n = X; n <= 2 * X; ++n) {
        const double lam = ctx.lambda(n);
        lhs.add(lam * u[n]);
        mass.add(1.0 / static_cast<double>(n));
        if (ctx.window_omega(n) == 0) {
            rough.add(lam * u[n]);
        }
        const std::int64_t num = ctx.residual_numerator(n);
        const bool flagged = ctx.square_flag(n);
        r.square_flag_count += flagged ? 1 : 0;
        if (num != 0) {
            ++r.residual_support_count;
            audit.add(lam * ctx.residual_weight(n) * u[n]);
        }
        if ((num != 0) != flagged) {
            r.support_matches = false;
        }
    }

    CompensatedComplexSum main;
    CompensatedComplexSum bilinear;
    for (const std::uint64_t p : ctx.primes()) {
        CompensatedComplexSum inner;
        for (std::uint64_t m = (X + p - 1) / p; m <= (2 * X) / p; ++m) {
            inner.add(a[m] * u[m]);
        }
        const std::complex<double> term = u[p] * inner.value();
        bilinear.add(term);
        main.add(static_cast<double>(ctx.lambda(p)) * term);
    }
    r.lhs = lhs.value();
    r.main = main.value();
    r.bilinear = bilinear.value();
    r.rough = rough.value();
    r.residual = r.lhs - r.main - r.rough;
    r.residual_audit = audit.value();
    r.mass = mass.value();
    return r;
}

inline RamareDecomposition ramare_decompose(std::uint64_t X, double P, double Q, double t) {
    const RamareContext ctx(X, P, Q);
    return ramare_decompose(ctx, t);
}

/// One bin j: the primes of [e^{j/H}, e^{(j+1)/H}) within [P, Q], and the cofactors
/// X e^{-(j+1)/H} <= m <= 2X e^{-j/H} with coefficients a_m.
struct DyadicFactor {
    std::int64_t j = 0;
    double bin_lower = 0.0;
    double bin_upper = 0.0;
    DirichletPoly primes;
    DirichletPoly cofactors;
    std::uint64_t m_lo = 0;
    std::uint64_t m_hi = 0;
};

struct DyadicSplit {
    std::uint64_t X = 0;
    PrimeWindow window;
    double H = 0.0;
    std::int64_t j_lo = 0;
    std::int64_t j_hi = 0;
    std::vector<DyadicFactor> factors;
    /// d_m on [X e^{-1/H}, X).
    DirichletPoly boundary_lower;
    /// d_m on (2X, 2X e^{1/H}].
    DirichletPoly boundary_upper;

    [[nodiscard]] double max_abs_boundary() const {
        return std::max(boundary_lower.max_abs_coefficient(), boundary_upper.max_abs_coefficient());
    }
};

namespace detail {

struct BinEdges {
    double H;
    [[nodiscard]] double at(std::int64_t j) const { return std::exp(static_cast<double>(j) / H); }
    /// The j with at(j) <= p < at(j + 1), consistent with the rounded edges.
    [[nodiscard]] std::int64_t bin_of(std::uint64_t p) const {
        const double x = static_cast<double>(p);
        auto j = static_cast<std::int64_t>(std::floor(H * std::log(x)));
        while (at(j) > x) {
            --j;
        }
        while (at(j + 1) <= x) {
            ++j;
        }
        return j;
    }
};

} // namespace detail

inline constexpr std::uint64_t kMaxDyadicBins = std::uint64_t{1} << 22;

/// Splits the bilinear form into bins of primes; d_m is the exact over-count created by
/// dropping X <= mp <= 2X, accumulated pair by pair.
inline DyadicSplit dyadic_split(std::uint64_t X, double P, double Q, double H) {
    if (!(H >= 1.0) || !std::isfinite(H)) {
        throw ValidationError("H must be at least 1");
    }
    if (!(P >= 2.0 && P <= Q && Q <= 2.0 * static_cast<double>(X))) {
        throw ValidationError("window must satisfy 2 <= P <= Q <= 2X");
    }
    const detail::BinEdges edges{H};
    DyadicSplit split;
    split.X = X;
    split.window = {P, Q};
    split.H = H;
    split.j_lo = static_cast<std::int64_t>(std::floor(H * std::log(P)));
    split.j_hi = static_cast<std::int64_t>(std::ceil(H * std::log(Q)));
    const auto primes = primes_in(P, Q);
    if (!primes.empty()) {
        split.j_lo = std::min(split.j_lo, edges.bin_of(primes.front()));
        split.j_hi = std::max(split.j_hi, edges.bin_of(primes.back()));
    }
    const auto bins = static_cast<std::uint64_t>(split.j_hi - split.j_lo + 1);
    if (bins > kMaxDyadicBins) {
        throw CapacityError("dyadic split needs " + std::to_string(bins) + " bins; lower H or narrow [P, Q]");
    }
    const double Xd = static_cast<double>(X);
    // m range of bin j: m * at(j+1) >= X and m * at(j) <= 2X, evaluated in the same rounding
    // as the bin membership test so that [X/p, 2X/p] always lies inside it.
    auto m_lo_of = [&](std::int64_t j) {
        const double e = edges.at(j + 1);
        auto m = static_cast<std::uint64_t>(std::max(1.0, std::floor(Xd / e)));
        while (m > 1 && static_cast<double>(m - 1) * e >= Xd) {
            --m;
        }
        while (static_cast<double>(m) * e < Xd) {
            ++m;
        }
        return m;
    };
    auto m_hi_of = [&](std::int64_t j) {
        const double e = edges.at(j);
        auto m = static_cast<std::uint64_t>(std::floor(2.0 * Xd / e));
        while (static_cast<double>(m + 1) * e <= 2.0 * Xd) {
            ++m;
        }
        while (m > 0 && static_cast<double>(m) * e > 2.0 * Xd) {
            --m;
        }
        return m;
    };
    const std::uint64_t m_max = m_hi_of(split.j_lo);
    const RamareContext ctx(X, P, Q, m_max);
    const auto& weights = ctx.weights();

    std::vector<std::vector<std::pair<std::uint64_t, double>>> bin_primes(bins);
    for (const auto p : primes) {
        bin_primes[static_cast<std::size_t>(edges.bin_of(p) - split.j_lo)].emplace_back(p, 1.0);
    }
    const double lower_edge = Xd * std::exp(-1.0 / H);
    const double upper_edge = 2.0 * Xd * std::exp(1.0 / H);
    const auto low_first = static_cast<std::uint64_t>(std::max(1.0, std::floor(lower_edge)));
    const auto up_last = static_cast<std::uint64_t>(std::ceil(upper_edge));
    std::vector<double> d_low(X - low_first, 0.0);
    std::vector<double> d_up(up_last - 2 * X, 0.0);

    split.factors.reserve(bins);
    for (std::uint64_t b = 0; b < bins; ++b) {
        DyadicFactor f;
        f.j = split.j_lo + static_cast<std::int64_t>(b);
        f.bin_lower = edges.at(f.j);
        f.bin_upper = edges.at(f.j + 1);
        f.m_lo = m_lo_of(f.j);
        f.m_hi = std::min(m_hi_of(f.j), m_max);
        f.cofactors = DirichletPoly::dense_view(weights, 0, f.m_lo, f.m_hi);
        for (const auto& [p, one] : bin_primes[b]) {
            for (std::uint64_t m = f.m_lo; m <= f.m_hi; ++m) {
                const std::uint64_t n = p * m;
                if (n < X) {
                    if (n < low_first) {
                        throw Error("over-count at n = " + std::to_string(n) + " falls below X e^{-1/H}");
                    }
                    d_low[n - low_first] += (*weights)[m];
                } else if (n > 2 * X) {
                    if (n > up_last) {
                        throw Error("over-count at n = " + std::to_string(n) + " exceeds 2X e^{1/H}");
                    }
                    d_up[n - 2 * X - 1] += (*weights)[m];
                }
            }
        }
        f.primes = DirichletPoly::sparse(std::move(bin_primes[b]));
        split.factors.push_back(std::move(f));
    }
    if (!d_low.empty()) {
        split.boundary_lower = DirichletPoly::dense(low_first, std::move(d_low));
    }
    if (!d_up.empty()) {
        split.boundary_upper = DirichletPoly::dense(2 * X + 1, std::move(d_up));
    }
    return split;
}

/// sum_j Q_{j,H}(1+it) F_{j,H}(1+it).
inline std::complex<double> factored_sum(const DyadicSplit& split, double t) {
    CompensatedComplexSum total;
    for (const auto& f : split.factors) {
        if (f.primes.empty()) {
            continue;
        }
        total.add(eval(f.primes, t) * eval(f.cofactors, t));
    }
    return total.value();
}

/// sum_j Q_j F_j - boundary_lower - boundary_upper; equals the bilinear form at the same t.
inline std::complex<double> reconstruct(const DyadicSplit& split, double t) {
    return factored_sum(split, t) - eval(split.boundary_lower, t) - eval(split.boundary_upper, t);
}

struct BinSup {
    std::int64_t j = 0;
    std::size_t prime_count = 0;
    double sup = 0.0;
    double t_at = 0.0;
};

/// Sampled sup of |Q_{j,H}(1+it)| over [T0, T] on each bin's mean-square grid.
inline std::vector<BinSup> qjh_sup_profile(const DyadicSplit& split, double T0, double T, const GridOptions& options = {}) {
    if (!(T0 >= 0.0 && T0 < T)) {
        throw ValidationError("qjh_sup_profile requires 0 <= T0 < T");
    }
    if (T > static_cast<double>(split.X)) {
        throw ValidationError("qjh_sup_profile requires T <= X");
    }
    std::vector<BinSup> out;
    out.reserve(split.factors.size());
    for (const auto& f : split.factors) {
        BinSup row;
        row.j = f.j;
        f.primes.for_each([&](std::uint64_t, double) { ++row.prime_count; });
        if (row.prime_count > 0) {
            const auto s = grid_sup(f.primes, T0, T, options);
            row.sup = s.value;
            row.t_at = s.t;
        }
        out.push_back(row);
    }
    return out;
}

} // namespace sil

#endif
