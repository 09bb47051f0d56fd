#ifndef SIL_PIPELINE_HPP
#define SIL_PIPELINE_HPP

// End-to-end runs: streaming variance rows, the variance/mean-square comparison,
// the term-by-term bound chain and multi-X scaling studies.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sil/block_cache.hpp"
#include "sil/decomp.hpp"
#include "sil/dirichlet.hpp"
#include "sil/error.hpp"
#include "sil/interval_stats.hpp"
#include "sil/multiplicative.hpp"
#include "sil/numeric.hpp"
#include "sil/parallel.hpp"
#include "sil/sieve.hpp"

namespace sil {

struct VarianceOptions {
    bool subtract_mean = false;
    std::optional<double> threshold;
    unsigned threads = 1;
    const BlockCache* cache = nullptr;
};

/// The variance report for (f, X, delta) without materializing all of [X, 2X + h].
///
/// k in [X, 2X) is processed in chunks of kReductionChunk; each chunk re-sieves the
/// values it needs, so memory stays O(kReductionChunk + h). Chunks are reduced in
/// order with the same partition as compute_variance, which makes the two paths
/// agree bit for bit.
inline VarianceReport streaming_variance(const MultiplicativeFunction& f, std::uint64_t X, double delta,
                                         const VarianceOptions& options = {}) {
    if (X < 2) {
        throw ValidationError("X must be at least 2");
    }
    const std::uint64_t h = window_length(X, delta);
    const double threshold = options.threshold.value_or(default_threshold(X));
    if (!(threshold > 0.0)) {
        throw ValidationError("threshold must be positive");
    }
    const FactorSieve sieve(SieveConfig{}, 2 * X + h + 1);
    MeanValue mean{X, 0.0, std::nullopt};
    if (options.subtract_mean) {
        mean = mean_over(f, X, sieve);
    }
    const DeviationModel model(X, h, options.subtract_mean, mean);
    const bool integral = f.integer_valued();
    const std::size_t chunks = (X + kReductionChunk - 1) / kReductionChunk;
    std::vector<DeviationPartial> partials(chunks);
    parallel_for(chunks, std::max(1U, options.threads), [&](std::size_t c) {
        const std::uint64_t k0 = X + c * kReductionChunk;
        const std::uint64_t k1 = std::min<std::uint64_t>(k0 + kReductionChunk, 2 * X);
        const IntegerRange range{k0 + 1, k1 + h};
        std::vector<double> values;
        if (options.cache != nullptr && f.constant_on_primes()) {
            values = evaluate_on_block(f, options.cache->get(sieve, range));
        } else {
            values = evaluate_range(f, range, sieve);
        }
        // values[i] = f(k0 + 1 + i)
        std::vector<double> sums(k1 - k0);
        double S = detail::direct_window_sum(values, k0 + 1, k0, h);
        sums[0] = S;
        for (std::uint64_t k = k0 + 1; k < k1; ++k) {
            if (!integral && (k - X) % 1024 == 0) {
                S = detail::direct_window_sum(values, k0 + 1, k, h);
            } else {
                S += values[k + h - k0 - 1] - values[k - k0 - 1];
            }
            sums[k - k0] = S;
        }
        partials[c] = accumulate_deviation(sums, model, threshold);
    });
    DeviationPartial total;
    for (const auto& p : partials) {
        total.merge(p);
    }
    return make_variance_report(X, delta, h, model, options.subtract_mean, threshold, total);
}

struct PipelineConfig {
    std::uint64_t X = 0;
    double delta = 0.5;
    double epsilon = 0.05;
    double A = 2.0;
    std::optional<double> H;
    std::optional<double> T0;
    std::optional<double> P;
    std::optional<double> Q;
    /// Accept explicit P, Q in place of the defaults.
    bool force_window = false;
    MultiplicativeFunction f = liouville();
    bool subtract_mean = false;
    std::optional<double> threshold;
    GridOptions grid;
    /// Largest (nonzero terms) x (samples) product for which a [T, 2T] window is integrated on the grid.
    double window_ops_budget = 2e10;
    const BlockCache* cache = nullptr;
};

struct PipelineParameters {
    std::uint64_t X = 0;
    double delta = 0.0;
    std::uint64_t h = 0;
    double log_X = 0.0;
    double T0 = 0.0;
    /// (log X)^10 before capping at X^{1-delta} / 4.
    double T0_uncapped = 0.0;
    double H = 0.0;
};

inline PipelineParameters resolve(const PipelineConfig& config) {
    if (config.X < 16) {
        throw ValidationError("X must be at least 16");
    }
    PipelineParameters p;
    p.X = config.X;
    p.delta = config.delta;
    p.h = window_length(config.X, config.delta);
    p.log_X = std::log(static_cast<double>(config.X));
    p.T0_uncapped = std::pow(p.log_X, 10.0);
    p.T0 = config.T0.value_or(std::min(p.T0_uncapped, std::pow(static_cast<double>(config.X), 1.0 - config.delta) / 4.0));
    if (!(p.T0 >= 0.0) || !std::isfinite(p.T0)) {
        throw ValidationError("T0 must be finite and nonnegative");
    }
    p.H = config.H.value_or(std::pow(p.log_X, 5.0));
    if (!(p.H >= 1.0) || !std::isfinite(p.H)) {
        throw ValidationError("H must be at least 1");
    }
    return p;
}

/// The prime window [P, Q]: exp((log X)^{2/3 + epsilon}) and X^{delta/3} unless forced.
inline PrimeWindow resolve_window(const PipelineConfig& config) {
    const double log_X = std::log(static_cast<double>(config.X));
    if ((config.P || config.Q) && !config.force_window) {
        throw ValidationError("--P/--Q replace the default window only together with --force-window");
    }
    if (config.force_window && !(config.P && config.Q)) {
        throw ValidationError("--force-window needs both --P and --Q");
    }
    if (!(config.epsilon > 0.0 && config.epsilon < 1.0 / 3.0)) {
        throw ValidationError("epsilon must be in (0,1/3)");
    }
    const double P = config.P.value_or(std::exp(std::pow(log_X, 2.0 / 3.0 + config.epsilon)));
    const double Q = config.Q.value_or(std::pow(static_cast<double>(config.X), config.delta / 3.0));
    if (P > Q) {
        throw ValidationError("prime window is empty at X = " + std::to_string(config.X) + ": P = " + format17(P) +
                              " exceeds Q = " + format17(Q) + "; choose one with --force-window --P <P> --Q <Q>");
    }
    if (!(P >= 2.0) || !(Q <= 2.0 * static_cast<double>(config.X))) {
        throw ValidationError("window must satisfy 2 <= P <= Q <= 2X");
    }
    return {P, Q};
}

struct Lemma3Window {
    double T = 0.0;
    MeanSquareEstimate estimate;
    /// The window exceeded the grid budget; estimate is the diagonal (T2 - T1) sum a^2/n^2.
    bool heuristic = false;
};

struct Lemma3Comparison {
    std::uint64_t X = 0;
    double delta = 0.0;
    std::uint64_t h = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    /// rhs and ratio rebuilt from the coarse-step estimates.
    double rhs_coarse = 0.0;
    double ratio_coarse = 0.0;
    /// |ratio - ratio_coarse| / ratio.
    double refinement_change = 0.0;
    MeanSquareEstimate small_t;
    double tail_max = 0.0;
    double tail_T = 0.0;
    std::vector<Lemma3Window> windows;
    std::size_t heuristic_windows = 0;
    double mvt_ratio_max = 0.0;
    bool all_accepted = true;

    [[nodiscard]] bool stable() const noexcept { return refinement_change <= 0.05; }
};

namespace detail {

inline double safe_ratio(double num, double den) {
    if (num == 0.0 && den == 0.0) {
        return 0.0;
    }
    return den == 0.0 ? std::numeric_limits<double>::infinity() : num / den;
}

inline std::size_t nonzero_terms(const DirichletPoly& poly) {
    std::size_t n = 0;
    poly.for_each([&](std::uint64_t, double a) { n += a != 0.0 ? 1 : 0; });
    return n;
}

} // namespace detail

/// lhs against the integral of |F|^2 over [0, X^{1-delta}] plus the max over dyadic
/// T in [X^{1-delta}, X^2] of (X^{1-delta}/T) times the integral over [T, 2T].
inline Lemma3Comparison lemma3_compare(const DirichletPoly& F, double lhs, std::uint64_t X, double delta,
                                       const PipelineConfig& config) {
    Lemma3Comparison c;
    c.X = X;
    c.delta = delta;
    c.h = window_length(X, delta);
    c.lhs = lhs;
    const double T1 = std::pow(static_cast<double>(X), 1.0 - delta);
    const double top = static_cast<double>(X) * static_cast<double>(X);
    const double diagonal = F.square_sum();
    const double n2 = static_cast<double>(F.upper());
    const auto terms = static_cast<double>(detail::nonzero_terms(F));
    if (terms == 0.0) {
        c.small_t.t1 = 0.0;
        c.small_t.t2 = T1;
        for (double T = T1; T <= top; T *= 2.0) {
            c.windows.push_back({T, MeanSquareEstimate{T, 2.0 * T, 0.0, 0.0, 0.0, 0.0}, false});
        }
        c.ratio = detail::safe_ratio(lhs, 0.0);
        c.ratio_coarse = c.ratio;
        return c;
    }
    c.small_t = mean_square(F, 0.0, T1, config.grid);
    c.all_accepted = c.small_t.accepted();
    c.mvt_ratio_max = 2.0 * c.small_t.refined_value / ((T1 + n2) * diagonal);
    double tail_coarse = 0.0;
    for (double T = T1; T <= top; T *= 2.0) {
        Lemma3Window w;
        w.T = T;
        const double samples = 2.0 * std::ceil(T / make_grid(F, T, 2.0 * T, GridOptions{config.grid.step_scale,
                                                                                   std::numeric_limits<std::size_t>::max(),
                                                                                   1})
                                                        .step) +
                               1.0;
        if (samples * terms <= config.window_ops_budget) {
            w.estimate = mean_square(F, T, 2.0 * T, config.grid);
            c.all_accepted = c.all_accepted && w.estimate.accepted();
            c.mvt_ratio_max = std::max(c.mvt_ratio_max, w.estimate.refined_value / ((T + n2) * diagonal));
        } else {
            w.heuristic = true;
            ++c.heuristic_windows;
            w.estimate.t1 = T;
            w.estimate.t2 = 2.0 * T;
            w.estimate.value = T * diagonal;
            w.estimate.refined_value = T * diagonal;
        }
        const double weighted = (T1 / T) * w.estimate.refined_value;
        if (weighted > c.tail_max) {
            c.tail_max = weighted;
            c.tail_T = T;
        }
        tail_coarse = std::max(tail_coarse, (T1 / T) * w.estimate.value);
        c.windows.push_back(w);
    }
    c.rhs = c.small_t.refined_value + c.tail_max;
    c.rhs_coarse = c.small_t.value + tail_coarse;
    c.ratio = detail::safe_ratio(lhs, c.rhs);
    c.ratio_coarse = detail::safe_ratio(lhs, c.rhs_coarse);
    c.refinement_change = c.ratio > 0.0 ? std::abs(c.ratio - c.ratio_coarse) / c.ratio : 0.0;
    return c;
}

inline constexpr std::uint64_t kLemma3MaxX = 10'000'000;

inline Lemma3Comparison lemma3_compare(const PipelineConfig& config) {
    const auto params = resolve(config);
    if (config.X > kLemma3MaxX) {
        throw CapacityError("lemma3 comparison at X = " + std::to_string(config.X) +
                            " exceeds the t-grid budget; use X <= 10000000");
    }
    VarianceOptions vo;
    vo.threads = config.grid.threads;
    vo.cache = config.cache;
    const auto variance = streaming_variance(config.f, config.X, config.delta, vo);
    const auto F = function_poly(config.f, config.X);
    auto c = lemma3_compare(F, variance.variance, config.X, config.delta, config);
    c.h = params.h;
    return c;
}

/// A measured term next to the scale it is claimed to be bounded by.
struct ScaledTerm {
    MeanSquareEstimate estimate;
    double scale = 0.0;
    double ratio = 0.0;
};

struct Lemma4Report {
    std::uint64_t X = 0;
    double delta = 0.0;
    double T = 0.0;
    double T0 = 0.0;
    PrimeWindow window;
    double H = 0.0;
    std::size_t bins = 0;
    std::size_t nonempty_bins = 0;
    /// Integral over [0, min(T0, T)].
    MeanSquareEstimate small_t;
    /// Integral over [T0, T] of the full polynomial sum lambda(n) n^{-1-it}.
    MeanSquareEstimate large_t;
    /// The bilinear form integrated directly over [T0, T].
    MeanSquareEstimate product_direct;
    /// Integral over [T0, T] of |Q_j F_j|^2, maximized over bins.
    double product_bin_max = 0.0;
    /// nonempty_bins * sum_j of the per-bin integrals (Cauchy-Schwarz over j).
    double product_cauchy_schwarz = 0.0;
    /// bins^2 * product_bin_max.
    double product_shape = 0.0;
    /// Against (T/X + 1) log P / log Q.
    ScaledTerm rough;
    /// Against (T/X + 1) / H.
    ScaledTerm boundary_lower;
    ScaledTerm boundary_upper;
    /// small_t + large_t.
    double total = 0.0;
    /// (log X)^{-1/3+eps} (T/X + 1) + (log X)^12 (T/X^{1-delta/3} + (log X)^{-18}).
    double shape_bound = 0.0;
    double shape_ratio = 0.0;
    /// (log X)^{-(1/3-eps)} (T/X + 1) + T/X^{1-delta/2}.
    double closing_bound = 0.0;
    double closing_ratio = 0.0;
    bool empty_product = false;
    bool all_accepted = true;
};

/// Every term of the mean-square bound chain measured separately for lambda on [X, 2X].
inline Lemma4Report lemma4_chain(const PipelineConfig& config, double T) {
    const auto params = resolve(config);
    const auto window = resolve_window(config);
    if (!(T > 0.0 && T <= static_cast<double>(config.X))) {
        throw ValidationError("lemma4 chain requires 0 < T <= X");
    }
    Lemma4Report r;
    r.X = config.X;
    r.delta = config.delta;
    r.T = T;
    r.T0 = params.T0;
    r.window = window;
    r.H = params.H;
    const double X = static_cast<double>(config.X);
    const double log_X = params.log_X;
    const auto& grid = config.grid;

    const RamareContext ctx(config.X, window.lower, window.upper);
    const auto lam = ctx.lambda_poly();
    auto accept = [&](const MeanSquareEstimate& e) {
        r.all_accepted = r.all_accepted && e.accepted();
        return e;
    };
    r.small_t = accept(mean_square(lam, 0.0, std::min(params.T0, T), grid));
    const double growth = T / X + 1.0;
    r.shape_bound = std::pow(log_X, -1.0 / 3.0 + config.epsilon) * growth +
                    std::pow(log_X, 12.0) * (T / std::pow(X, 1.0 - config.delta / 3.0) + std::pow(log_X, -18.0));
    r.closing_bound = std::pow(log_X, -(1.0 / 3.0 - config.epsilon)) * growth + T / std::pow(X, 1.0 - config.delta / 2.0);

    const auto split = dyadic_split(config.X, window.lower, window.upper, params.H);
    r.bins = split.factors.size();
    for (const auto& f : split.factors) {
        r.nonempty_bins += f.primes.empty() ? 0 : 1;
    }
    r.rough.scale = growth * std::log(window.lower) / std::log(window.upper);
    r.boundary_lower.scale = growth / params.H;
    r.boundary_upper.scale = growth / params.H;
    if (T <= params.T0) {
        r.empty_product = true;
        r.total = r.small_t.refined_value;
        r.shape_ratio = detail::safe_ratio(r.total, r.shape_bound);
        r.closing_ratio = detail::safe_ratio(r.total, r.closing_bound);
        return r;
    }
    const double T0 = params.T0;
    r.large_t = accept(mean_square(lam, T0, T, grid));
    r.product_direct = accept(mean_square(ctx.bilinear_poly(), T0, T, grid));
    CompensatedSum bin_sum;
    for (const auto& f : split.factors) {
        if (f.primes.empty()) {
            continue;
        }
        const auto e = accept(product_mean_square(f.primes, f.cofactors, T0, T, grid));
        bin_sum.add(e.refined_value);
        r.product_bin_max = std::max(r.product_bin_max, e.refined_value);
    }
    r.product_cauchy_schwarz = static_cast<double>(r.nonempty_bins) * bin_sum.value();
    r.product_shape = static_cast<double>(r.bins) * static_cast<double>(r.bins) * r.product_bin_max;
    auto scaled = [&](ScaledTerm& term, const DirichletPoly& poly) {
        term.estimate = poly.empty() ? MeanSquareEstimate{T0, T, 0.0, 0.0, 0.0, 0.0}
                                     : accept(mean_square(poly, T0, T, grid));
        term.ratio = detail::safe_ratio(term.estimate.refined_value, term.scale);
    };
    scaled(r.rough, ctx.rough_poly());
    scaled(r.boundary_lower, split.boundary_lower);
    scaled(r.boundary_upper, split.boundary_upper);
    r.total = r.small_t.refined_value + r.large_t.refined_value;
    r.shape_ratio = detail::safe_ratio(r.total, r.shape_bound);
    r.closing_ratio = detail::safe_ratio(r.total, r.closing_bound);
    return r;
}

struct StudyOptions {
    bool subtract_mean = false;
    std::optional<double> threshold;
    unsigned threads = 1;
    const BlockCache* cache = nullptr;
    /// Rows with X above this skip the mean-square comparison.
    std::uint64_t lemma3_max_X = 100'000;
    bool timing = false;
    GridOptions grid;
    double window_ops_budget = 2e10;
};

struct StudyRow {
    std::uint64_t X = 0;
    double delta = 0.0;
    std::uint64_t h = 0;
    double variance = 0.0;
    /// variance * (log X)^{1/3}.
    double scaled_variance = 0.0;
    double threshold = 0.0;
    double exceptional_fraction = 0.0;
    double mean = 0.0;
    bool chebyshev = true;
    bool in_range = true;
    std::optional<double> lemma3_lhs;
    std::optional<double> lemma3_rhs;
    std::optional<double> lemma3_ratio;
    std::optional<double> mvt_ratio_max;
    std::optional<bool> lemma3_stable;
    std::optional<double> seconds;
};

struct ScalingStudy {
    std::string f_name;
    bool subtract_mean = false;
    std::vector<StudyRow> rows;

    /// Variance strictly decreasing in X for the given delta.
    [[nodiscard]] bool variance_decreasing(double delta) const {
        const StudyRow* prev = nullptr;
        for (const auto& row : rows) {
            if (row.delta != delta) {
                continue;
            }
            if (prev != nullptr && !(row.variance < prev->variance)) {
                return false;
            }
            prev = &row;
        }
        return true;
    }

    /// variance * (log X)^{1/3} never grows by more than 50% between consecutive X.
    [[nodiscard]] bool scaled_trend_bounded(double delta) const {
        const StudyRow* prev = nullptr;
        for (const auto& row : rows) {
            if (row.delta != delta) {
                continue;
            }
            if (prev != nullptr && !(row.scaled_variance <= 1.5 * prev->scaled_variance)) {
                return false;
            }
            prev = &row;
        }
        return true;
    }

    /// Names of failed hard invariants; empty when the study is clean.
    [[nodiscard]] std::vector<std::string> flags() const {
        std::vector<std::string> out;
        for (const auto& row : rows) {
            const std::string at = " at X=" + std::to_string(row.X) + " delta=" + format17(row.delta);
            if (!row.chebyshev) {
                out.push_back("chebyshev" + at);
            }
            if (!row.in_range) {
                out.push_back("range" + at);
            }
            if (!std::isfinite(row.variance) || !std::isfinite(row.scaled_variance)) {
                out.push_back("nonfinite" + at);
            }
            if (row.lemma3_ratio && (!std::isfinite(*row.lemma3_ratio) || *row.lemma3_ratio < 0.0)) {
                out.push_back("lemma3_ratio" + at);
            }
            if (row.lemma3_stable && !*row.lemma3_stable) {
                out.push_back("lemma3_refinement" + at);
            }
        }
        return out;
    }
};

inline ScalingStudy scaling_study(std::vector<double> deltas, std::vector<std::uint64_t> X_list,
                                  const MultiplicativeFunction& f, const StudyOptions& options = {}) {
    if (deltas.empty() || X_list.empty()) {
        throw ValidationError("study needs at least one X and one delta");
    }
    std::sort(X_list.begin(), X_list.end());
    X_list.erase(std::unique(X_list.begin(), X_list.end()), X_list.end());
    std::sort(deltas.begin(), deltas.end());
    deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());
    for (const double d : deltas) {
        window_length(2, d);
    }
    ScalingStudy study;
    study.f_name = f.name();
    study.subtract_mean = options.subtract_mean;
    for (const auto X : X_list) {
        if (X < 16) {
            throw ValidationError("study X values must be at least 16");
        }
        for (const double delta : deltas) {
            const auto start = std::chrono::steady_clock::now();
            VarianceOptions vo;
            vo.subtract_mean = options.subtract_mean;
            vo.threshold = options.threshold;
            vo.threads = options.threads;
            vo.cache = options.cache;
            const auto rep = streaming_variance(f, X, delta, vo);
            StudyRow row;
            row.X = X;
            row.delta = delta;
            row.h = rep.h;
            row.variance = rep.variance;
            row.scaled_variance = rep.variance * std::cbrt(std::log(static_cast<double>(X)));
            row.threshold = rep.threshold;
            row.exceptional_fraction = rep.exceptional_fraction;
            row.mean = rep.mean;
            row.chebyshev = rep.chebyshev_holds();
            row.in_range = rep.in_range();
            if (X <= options.lemma3_max_X) {
                double lhs = rep.variance;
                if (options.subtract_mean) {
                    VarianceOptions plain = vo;
                    plain.subtract_mean = false;
                    lhs = streaming_variance(f, X, delta, plain).variance;
                }
                PipelineConfig pc;
                pc.X = X;
                pc.delta = delta;
                pc.grid = options.grid;
                pc.grid.threads = options.threads;
                pc.window_ops_budget = options.window_ops_budget;
                const auto cmp = lemma3_compare(function_poly(f, X), lhs, X, delta, pc);
                row.lemma3_lhs = cmp.lhs;
                row.lemma3_rhs = cmp.rhs;
                row.lemma3_ratio = cmp.ratio;
                row.mvt_ratio_max = cmp.mvt_ratio_max;
                row.lemma3_stable = cmp.stable();
            }
            if (options.timing) {
                row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            }
            study.rows.push_back(row);
        }
    }
    return study;
}

} // namespace sil

#endif
