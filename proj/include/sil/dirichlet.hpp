#ifndef SIL_DIRICHLET_HPP
#define SIL_DIRICHLET_HPP

// Dirichlet polynomials F(1+it) = sum_n a_n n^{-1-it} on the line Re s = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sil/error.hpp"
#include "sil/multiplicative.hpp"
#include "sil/numeric.hpp"
#include "sil/parallel.hpp"
#include "sil/sieve.hpp"

namespace sil {

/// Coefficients a_n on a support [N1, N2], stored densely (possibly as a view into a
/// shared array) or sparsely as sorted (n, a_n) pairs.
class DirichletPoly {
public:
    DirichletPoly() = default;

    static DirichletPoly dense(std::uint64_t first, std::vector<double> coeffs) {
        auto base = std::make_shared<const std::vector<double>>(std::move(coeffs));
        const std::uint64_t len = base->size();
        if (len == 0) {
            return {};
        }
        return dense_view(std::move(base), first, first, first + len - 1);
    }

    /// Coefficients base[n - base_first] for n in [lo, hi]; the range is clipped to the array.
    static DirichletPoly dense_view(std::shared_ptr<const std::vector<double>> base, std::uint64_t base_first,
                                   std::uint64_t lo, std::uint64_t hi) {
        DirichletPoly p;
        lo = std::max(lo, base_first);
        hi = std::min<std::uint64_t>(hi, base_first + base->size() - 1);
        if (base->empty() || lo > hi) {
            return p;
        }
        if (lo == 0) {
            throw ValidationError("Dirichlet polynomial support starts at n = 1");
        }
        p.base_ = std::move(base);
        p.base_first_ = base_first;
        p.lo_ = lo;
        p.hi_ = hi;
        return p;
    }

    /// Entries must be strictly increasing in n.
    static DirichletPoly sparse(std::vector<std::pair<std::uint64_t, double>> entries) {
        DirichletPoly p;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].first == 0 || (i > 0 && entries[i].first <= entries[i - 1].first)) {
                throw ValidationError("sparse Dirichlet polynomial entries must be strictly increasing and >= 1");
            }
        }
        if (!entries.empty()) {
            p.lo_ = entries.front().first;
            p.hi_ = entries.back().first;
        }
        p.sparse_ = std::make_shared<const std::vector<std::pair<std::uint64_t, double>>>(std::move(entries));
        return p;
    }

    [[nodiscard]] bool is_sparse() const noexcept { return sparse_ != nullptr; }
    [[nodiscard]] bool empty() const noexcept { return !base_ && (!sparse_ || sparse_->empty()); }
    [[nodiscard]] std::uint64_t lower() const noexcept { return lo_; }
    [[nodiscard]] std::uint64_t upper() const noexcept { return hi_; }

    /// Calls fn(n, a_n) for every stored coefficient in increasing n (zeros included for dense storage).
    template <class Fn>
    void for_each(Fn&& fn) const {
        if (base_) {
            for (std::uint64_t n = lo_; n <= hi_; ++n) {
                fn(n, (*base_)[n - base_first_]);
            }
        } else if (sparse_) {
            for (const auto& [n, a] : *sparse_) {
                fn(n, a);
            }
        }
    }

    [[nodiscard]] double coefficient(std::uint64_t n) const {
        if (base_) {
            return (n >= lo_ && n <= hi_) ? (*base_)[n - base_first_] : 0.0;
        }
        if (sparse_) {
            const auto it = std::lower_bound(sparse_->begin(), sparse_->end(), n,
                                             [](const auto& e, std::uint64_t v) { return e.first < v; });
            return (it != sparse_->end() && it->first == n) ? it->second : 0.0;
        }
        return 0.0;
    }

    /// sum |a_n|^2 / n^2, the mean value theorem's diagonal.
    [[nodiscard]] double square_sum() const {
        CompensatedSum s;
        for_each([&](std::uint64_t n, double a) {
            const double w = a / static_cast<double>(n);
            s.add(w * w);
        });
        return s.value();
    }

    /// sum |a_n| / n, an upper bound for |F(1+it)|.
    [[nodiscard]] double l1_mass() const {
        CompensatedSum s;
        for_each([&](std::uint64_t n, double a) { s.add(std::abs(a) / static_cast<double>(n)); });
        return s.value();
    }

    [[nodiscard]] double max_abs_coefficient() const {
        double m = 0.0;
        for_each([&](std::uint64_t, double a) { m = std::max(m, std::abs(a)); });
        return m;
    }

private:
    std::shared_ptr<const std::vector<double>> base_;
    std::uint64_t base_first_ = 0;
    std::shared_ptr<const std::vector<std::pair<std::uint64_t, double>>> sparse_;
    std::uint64_t lo_ = 0;
    std::uint64_t hi_ = 0;
};

/// Dense polynomial with a_n = f(n) on [X, 2X].
inline DirichletPoly function_poly(const MultiplicativeFunction& f, std::uint64_t X, const FactorSieve& sieve) {
    return DirichletPoly::dense(X, evaluate_range(f, {X, 2 * X + 1}, sieve));
}

inline DirichletPoly function_poly(const MultiplicativeFunction& f, std::uint64_t X) {
    const FactorSieve sieve(SieveConfig{}, 2 * X + 1);
    return function_poly(f, X, sieve);
}

/// a_p = 1 on the primes P <= p <= Q.
inline DirichletPoly prime_poly(double P, double Q) {
    if (!(P >= 2.0 && P <= Q)) {
        throw ValidationError("prime_poly requires 2 <= P <= Q");
    }
    std::vector<std::pair<std::uint64_t, double>> entries;
    for (const auto p : primes_in(P, Q)) {
        entries.emplace_back(p, 1.0);
    }
    return DirichletPoly::sparse(std::move(entries));
}

/// F(1+it) by fixed-order compensated summation.
inline std::complex<double> eval(const DirichletPoly& poly, double t) {
    CompensatedSum re;
    CompensatedSum im;
    poly.for_each([&](std::uint64_t n, double a) {
        if (a == 0.0) {
            return;
        }
        const double w = a / static_cast<double>(n);
        const double phase = t * std::log(static_cast<double>(n));
        re.add(w * std::cos(phase));
        im.add(-w * std::sin(phase));
    });
    return {re.value(), im.value()};
}

struct GridOptions {
    /// Coarse step is step_scale / log(N2); the refined grid halves it.
    double step_scale = 0.1;
    /// Largest refined grid (number of t samples) a single request may use.
    std::uint64_t max_points = std::uint64_t{1} << 27;
    unsigned threads = 1;
};

namespace detail {

inline constexpr std::size_t kLanes = 16;
inline constexpr std::size_t kTermBlock = 1024;
inline constexpr std::size_t kGridTile = 512;

/// Nonzero terms as frequency log n and weight a_n / n, padded to a multiple of kLanes.
struct TermArrays {
    std::vector<double> omega;
    std::vector<double> weight;

    explicit TermArrays(const DirichletPoly& poly) {
        poly.for_each([&](std::uint64_t n, double a) {
            if (a != 0.0) {
                omega.push_back(std::log(static_cast<double>(n)));
                weight.push_back(a / static_cast<double>(n));
            }
        });
        while (omega.size() % kLanes != 0) {
            omega.push_back(0.0);
            weight.push_back(0.0);
        }
    }
    [[nodiscard]] std::size_t size() const noexcept { return omega.size(); }
};

/// Samples F(1 + i(t0 + j dt)) for j in [first, first + out.size()).
///
/// Phases are seeded exactly at the start of each call and advanced by a complex
/// rotation per step, so a tile of kGridTile samples costs one complex multiply per
/// (term, sample).
inline void eval_tile(const TermArrays& terms, std::span<const double> rot_re, std::span<const double> rot_im,
                      double t0, double dt, std::size_t first, std::span<std::complex<double>> out) {
    const std::size_t count = out.size();
    std::vector<double> acc_re(count, 0.0);
    std::vector<double> acc_im(count, 0.0);
    std::vector<double> zr_store(kTermBlock);
    std::vector<double> zi_store(kTermBlock);
    double* __restrict zr = zr_store.data();
    double* __restrict zi = zi_store.data();
    const double t_start = t0 + static_cast<double>(first) * dt;
    for (std::size_t b0 = 0; b0 < terms.size(); b0 += kTermBlock) {
        const std::size_t blen = std::min(kTermBlock, terms.size() - b0);
        for (std::size_t i = 0; i < blen; ++i) {
            const double phase = t_start * terms.omega[b0 + i];
            zr[i] = terms.weight[b0 + i] * std::cos(phase);
            zi[i] = -terms.weight[b0 + i] * std::sin(phase);
        }
        const double* __restrict cr = rot_re.data() + b0;
        const double* __restrict ci = rot_im.data() + b0;
        for (std::size_t j = 0; j < count; ++j) {
            double sr[kLanes] = {};
            double si[kLanes] = {};
            for (std::size_t i = 0; i < blen; i += kLanes) {
                for (std::size_t l = 0; l < kLanes; ++l) {
                    const double x = zr[i + l];
                    const double y = zi[i + l];
                    sr[l] += x;
                    si[l] += y;
                    zr[i + l] = x * cr[i + l] - y * ci[i + l];
                    zi[i + l] = x * ci[i + l] + y * cr[i + l];
                }
            }
            double re = 0.0;
            double im = 0.0;
            for (std::size_t l = 0; l < kLanes; ++l) {
                re += sr[l];
                im += si[l];
            }
            acc_re[j] += re;
            acc_im[j] += im;
        }
    }
    for (std::size_t j = 0; j < count; ++j) {
        out[j] = {acc_re[j], acc_im[j]};
    }
}

} // namespace detail

/// Evaluates F on the uniform grid t_j = t0 + j dt, j < count, in tiles of 512 samples.
///
/// `tile_fn(first_index, samples)` reduces one tile to a partial result; partials are
/// returned in tile order, so any reduction over them is independent of `threads`.
template <class TileFn>
auto grid_reduce(const DirichletPoly& poly, double t0, double dt, std::size_t count, unsigned threads, TileFn&& tile_fn) {
    using Partial = decltype(tile_fn(std::size_t{0}, std::span<const std::complex<double>>{}));
    const detail::TermArrays terms(poly);
    std::vector<double> rot_re(terms.size());
    std::vector<double> rot_im(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        rot_re[i] = std::cos(dt * terms.omega[i]);
        rot_im[i] = -std::sin(dt * terms.omega[i]);
    }
    const std::size_t tiles = (count + detail::kGridTile - 1) / detail::kGridTile;
    std::vector<Partial> partials(tiles);
    parallel_for(tiles, threads, [&](std::size_t tile) {
        const std::size_t first = tile * detail::kGridTile;
        const std::size_t len = std::min(detail::kGridTile, count - first);
        std::vector<std::complex<double>> samples(len);
        detail::eval_tile(terms, rot_re, rot_im, t0, dt, first, samples);
        partials[tile] = tile_fn(first, std::span<const std::complex<double>>(samples));
    });
    return partials;
}

/// All samples of F on the grid t_j = t0 + j dt.
inline std::vector<std::complex<double>> eval_grid(const DirichletPoly& poly, double t0, double dt, std::size_t count,
                                                   unsigned threads = 1) {
    auto tiles = grid_reduce(poly, t0, dt, count, threads, [](std::size_t, std::span<const std::complex<double>> s) {
        return std::vector<std::complex<double>>(s.begin(), s.end());
    });
    std::vector<std::complex<double>> out;
    out.reserve(count);
    for (auto& tile : tiles) {
        out.insert(out.end(), tile.begin(), tile.end());
    }
    return out;
}

struct TimeGrid {
    double t1 = 0.0;
    double t2 = 0.0;
    /// Coarse step; the refined grid uses step / 2.
    double step = 0.0;
    std::size_t intervals = 0;

    [[nodiscard]] std::size_t refined_points() const noexcept { return 2 * intervals + 1; }
};

/// Coarse step step_scale / log N2, shrunk so [t1, t2] holds a whole number of steps.
inline TimeGrid make_grid(std::uint64_t n2, double t1, double t2, const GridOptions& options) {
    if (!(t1 <= t2) || !std::isfinite(t1) || !std::isfinite(t2)) {
        throw ValidationError("time range must satisfy T1 <= T2");
    }
    const double log_n2 = std::log(static_cast<double>(std::max<std::uint64_t>(n2, 2)));
    const double nominal = options.step_scale / log_n2;
    TimeGrid g{t1, t2, nominal, 0};
    if (t2 == t1) {
        return g;
    }
    const double intervals = std::ceil((t2 - t1) / nominal);
    if (2.0 * intervals + 1.0 > static_cast<double>(options.max_points)) {
        throw CapacityError("t-grid over [" + format17(t1) + ", " + format17(t2) + "] needs " +
                            format17(2.0 * intervals + 1.0) + " samples, budget is " +
                            std::to_string(options.max_points) + "; request a shorter t-range or a smaller X");
    }
    g.intervals = static_cast<std::size_t>(intervals);
    g.step = (t2 - t1) / intervals;
    return g;
}

inline TimeGrid make_grid(const DirichletPoly& poly, double t1, double t2, const GridOptions& options) {
    return make_grid(poly.upper(), t1, t2, options);
}

struct MeanSquareEstimate {
    double t1 = 0.0;
    double t2 = 0.0;
    double grid_step = 0.0;
    /// Trapezoid estimate of the integral of |F(1+it)|^2 at grid_step.
    double value = 0.0;
    /// Same at grid_step / 2.
    double refined_value = 0.0;
    double rel_gap = 0.0;

    [[nodiscard]] bool accepted() const noexcept { return rel_gap <= 0.01; }
};

/// Trapezoid estimates of the integral over [t1, t2] of |F(1+it)|^2 at the coarse and the refined step.
inline MeanSquareEstimate mean_square(const DirichletPoly& poly, double t1, double t2, const GridOptions& options = {}) {
    if (!(t1 >= 0.0 && t1 < t2)) {
        throw ValidationError("mean_square requires 0 <= T1 < T2");
    }
    MeanSquareEstimate est;
    est.t1 = t1;
    est.t2 = t2;
    if (poly.empty()) {
        est.grid_step = make_grid(poly, t1, t2, options).step;
        return est;
    }
    const TimeGrid grid = make_grid(poly, t1, t2, options);
    est.grid_step = grid.step;
    const double fine = grid.step / 2.0;
    const std::size_t last = grid.refined_points() - 1;
    struct Partial {
        CompensatedSum coarse;
        CompensatedSum refined;
    };
    const auto partials = grid_reduce(poly, t1, fine, grid.refined_points(), options.threads,
                                      [last](std::size_t first, std::span<const std::complex<double>> s) {
                                          Partial p;
                                          for (std::size_t i = 0; i < s.size(); ++i) {
                                              const std::size_t j = first + i;
                                              const double w = (j == 0 || j == last) ? 0.5 : 1.0;
                                              const double v = std::norm(s[i]);
                                              p.refined.add(w * v);
                                              if (j % 2 == 0) {
                                                  p.coarse.add(w * v);
                                              }
                                          }
                                          return p;
                                      });
    CompensatedSum coarse;
    CompensatedSum refined;
    for (const auto& p : partials) {
        coarse.merge(p.coarse);
        refined.merge(p.refined);
    }
    est.value = coarse.value() * grid.step;
    est.refined_value = refined.value() * fine;
    est.rel_gap = std::abs(est.value - est.refined_value) / std::max(est.refined_value, 1e-300);
    return est;
}

/// Mean square of the product F(1+it) G(1+it) over [t1, t2], on the grid of a polynomial
/// supported up to N2 = upper(F) * upper(G). Both factors are sampled in chunks.
inline MeanSquareEstimate product_mean_square(const DirichletPoly& a, const DirichletPoly& b, double t1, double t2,
                                              const GridOptions& options = {}) {
    if (!(t1 >= 0.0 && t1 < t2)) {
        throw ValidationError("mean_square requires 0 <= T1 < T2");
    }
    MeanSquareEstimate est;
    est.t1 = t1;
    est.t2 = t2;
    const std::uint64_t n2 = std::max<std::uint64_t>(a.upper(), 1) * std::max<std::uint64_t>(b.upper(), 1);
    const TimeGrid grid = make_grid(n2, t1, t2, options);
    est.grid_step = grid.step;
    if (a.empty() || b.empty()) {
        return est;
    }
    const double fine = grid.step / 2.0;
    const std::size_t total = grid.refined_points();
    constexpr std::size_t kChunk = std::size_t{1} << 18;
    CompensatedSum coarse;
    CompensatedSum refined;
    for (std::size_t first = 0; first < total; first += kChunk) {
        const std::size_t len = std::min(kChunk, total - first);
        const double t0 = t1 + static_cast<double>(first) * fine;
        const auto fa = eval_grid(a, t0, fine, len, options.threads);
        const auto fb = eval_grid(b, t0, fine, len, options.threads);
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t j = first + i;
            const double w = (j == 0 || j == total - 1) ? 0.5 : 1.0;
            const double v = std::norm(fa[i] * fb[i]);
            refined.add(w * v);
            if (j % 2 == 0) {
                coarse.add(w * v);
            }
        }
    }
    est.value = coarse.value() * grid.step;
    est.refined_value = refined.value() * fine;
    est.rel_gap = std::abs(est.value - est.refined_value) / std::max(est.refined_value, 1e-300);
    return est;
}

/// Mean value theorem ratio 2 * int_0^T |F|^2 / ((T + N2) sum a_n^2 / n^2).
///
/// The factor 2 accounts for [-T, 0]: |F(1-it)| = |F(1+it)| for real coefficients.
inline double mvt_ratio(const DirichletPoly& poly, double T, const GridOptions& options = {}) {
    if (!(T > 0.0)) {
        throw ValidationError("mvt_ratio requires T > 0");
    }
    const double diagonal = poly.square_sum();
    if (poly.empty() || diagonal == 0.0) {
        return 0.0;
    }
    const auto est = mean_square(poly, 0.0, T, options);
    return 2.0 * est.refined_value / ((T + static_cast<double>(poly.upper())) * diagonal);
}

struct SupSample {
    double t = 0.0;
    double value = 0.0;
    std::size_t samples = 0;
};

/// Largest |F(1+it)| over the refined mean-square grid on [t1, t2].
inline SupSample grid_sup(const DirichletPoly& poly, double t1, double t2, const GridOptions& options = {}) {
    SupSample best{t1, 0.0, 0};
    if (poly.empty()) {
        return best;
    }
    const TimeGrid grid = make_grid(poly, t1, t2, options);
    const double fine = grid.step / 2.0;
    const std::size_t count = grid.refined_points();
    best.samples = count;
    const auto partials = grid_reduce(poly, t1, fine, count, options.threads,
                                      [&](std::size_t first, std::span<const std::complex<double>> s) {
                                          std::pair<double, std::size_t> m{-1.0, first};
                                          for (std::size_t i = 0; i < s.size(); ++i) {
                                              const double v = std::abs(s[i]);
                                              if (v > m.first) {
                                                  m = {v, first + i};
                                              }
                                          }
                                          return m;
                                      });
    double value = -1.0;
    std::size_t at = 0;
    for (const auto& [v, j] : partials) {
        if (v > value) {
            value = v;
            at = j;
        }
    }
    best.value = value;
    best.t = t1 + static_cast<double>(at) * fine;
    return best;
}

struct Lemma2Row {
    double t = 0.0;
    double abs_value = 0.0;
    /// log X / (1 + |t|) + (log X)^{-A}
    double bound = 0.0;
    double ratio = 0.0;
};

/// |P(1+it)| for the prime polynomial over [P, Q] against log X/(1+|t|) + (log X)^{-A}.
inline std::vector<Lemma2Row> lemma2_profile(double P, double Q, std::uint64_t X, std::span<const double> t_samples,
                                             double A = 2.0) {
    if (X < 3) {
        throw ValidationError("lemma2_profile requires X >= 3");
    }
    const auto poly = prime_poly(P, Q);
    const double L = std::log(static_cast<double>(X));
    std::vector<Lemma2Row> rows;
    rows.reserve(t_samples.size());
    for (const double t : t_samples) {
        if (!(std::abs(t) <= static_cast<double>(X))) {
            throw ValidationError("lemma2_profile samples must satisfy |t| <= X");
        }
        Lemma2Row row;
        row.t = t;
        row.abs_value = std::abs(eval(poly, t));
        row.bound = L / (1.0 + std::abs(t)) + std::pow(L, -A);
        row.ratio = row.abs_value / row.bound;
        rows.push_back(row);
    }
    return rows;
}

struct Lemma1Profile {
    std::uint64_t X = 0;
    double A = 0.0;
    double t_max = 0.0;
    SupSample sup;
};

/// Sampled sup over 0 <= t <= (log X)^A of |sum_{X <= n <= 2X} a_n n^{-1-it}|.
inline Lemma1Profile lemma1_profile(const DirichletPoly& poly, std::uint64_t X, double A, const GridOptions& options = {}) {
    if (X < 100) {
        throw ValidationError("lemma1_profile requires X >= 100");
    }
    if (!(A > 0.0)) {
        throw ValidationError("lemma1_profile requires A > 0");
    }
    Lemma1Profile prof;
    prof.X = X;
    prof.A = A;
    prof.t_max = std::pow(std::log(static_cast<double>(X)), A);
    prof.sup = grid_sup(poly, 0.0, prof.t_max, options);
    return prof;
}

inline Lemma1Profile lemma1_profile(std::uint64_t X, double A, const GridOptions& options = {}) {
    return lemma1_profile(function_poly(liouville(), X), X, A, options);
}

} // namespace sil

#endif
