#ifndef SIL_CLI_HPP
#define SIL_CLI_HPP

// The `sil` command line: subcommands sieve, variance, meansq, ramare, dyadic,
// lemma-profiles and study. Exit codes: 0 success, 2 bad input or capacity,
// 3 a checked invariant failed.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sil/block_cache.hpp"
#include "sil/decomp.hpp"
#include "sil/dirichlet.hpp"
#include "sil/error.hpp"
#include "sil/interval_stats.hpp"
#include "sil/multiplicative.hpp"
#include "sil/numeric.hpp"
#include "sil/pipeline.hpp"
#include "sil/sieve.hpp"

namespace sil::cli {

using nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInvariant = 3;

struct Options {
    std::vector<std::string> X;
    std::vector<std::string> delta;
    std::string f = "liouville";
    std::string f_file;
    std::uint64_t seed = 0;
    std::optional<unsigned> threads;
    std::string out;
    std::string format;
    std::string cache_dir;
    std::optional<double> P;
    std::optional<double> Q;
    std::optional<double> t;
    std::optional<double> H;
    std::optional<double> T1;
    std::optional<double> T2;
    std::optional<double> T;
    double A = 2.0;
    bool force_window = false;
    double epsilon = 0.05;
    std::optional<double> threshold;
    bool subtract_mean = false;
    bool timing = false;
    bool dump = false;
    std::string poly = "f";
    std::optional<std::string> lo;
    std::optional<std::string> hi;
    std::string lemma3_max_X = "100000";
};

namespace detail {

/// Integer flag values may be written as 1000000 or 1e6.
inline std::uint64_t parse_count(const std::string& flag, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::logic_error&) {
        throw ValidationError(flag + " must be a positive integer, got '" + text + "'");
    }
    if (used != text.size() || !(v >= 1.0) || v != std::floor(v) || v >= 9.2e18) {
        throw ValidationError(flag + " must be a positive integer, got '" + text + "'");
    }
    if (text.find_first_of(".eE") == std::string::npos) {
        return std::stoull(text);
    }
    return static_cast<std::uint64_t>(v);
}

inline double parse_real(const std::string& flag, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::logic_error&) {
        throw ValidationError(flag + " must be a number, got '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) {
        throw ValidationError(flag + " must be a number, got '" + text + "'");
    }
    return v;
}

inline std::vector<std::string> split_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::stringstream ss(item);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (!part.empty()) {
                out.push_back(part);
            }
        }
    }
    return out;
}

inline std::uint64_t single_X(const Options& o) {
    const auto items = split_list(o.X);
    if (items.size() != 1) {
        throw ValidationError("--X takes exactly one value for this command");
    }
    return parse_count("--X", items.front());
}

inline double single_delta(const Options& o) {
    const auto items = split_list(o.delta);
    if (items.size() > 1) {
        throw ValidationError("--delta takes exactly one value for this command");
    }
    const double d = items.empty() ? 0.5 : parse_real("--delta", items.front());
    window_length(2, d);
    return d;
}

inline double require(const std::optional<double>& v, const std::string& flag) {
    if (!v) {
        throw ValidationError(flag + " is required");
    }
    return *v;
}

inline MultiplicativeFunction make_function(const Options& o) {
    if (!o.f_file.empty()) {
        return load_definition(o.f_file);
    }
    if (o.f == "liouville") {
        return liouville();
    }
    if (o.f == "mobius") {
        return mobius();
    }
    if (o.f == "one") {
        return constant_one();
    }
    if (o.f == "random") {
        return random_sign(o.seed);
    }
    throw ValidationError("unknown function '" + o.f + "' (liouville, mobius, one, random)");
}

inline unsigned thread_count(const Options& o) {
    if (o.threads) {
        if (*o.threads < 1) {
            throw ValidationError("--threads must be at least 1");
        }
        return *o.threads;
    }
    if (const char* env = std::getenv("SIL_THREADS"); env != nullptr && *env != '\0') {
        const auto n = parse_count("SIL_THREADS", env);
        return static_cast<unsigned>(n);
    }
    return 1;
}

inline std::unique_ptr<BlockCache> open_cache(const Options& o) {
    std::string dir = o.cache_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("SIL_CACHE_DIR"); env != nullptr) {
            dir = env;
        }
    }
    if (dir.empty()) {
        return nullptr;
    }
    return std::make_unique<BlockCache>(dir);
}

inline ordered_json complex_json(std::complex<double> z) { return {{"re", z.real()}, {"im", z.imag()}}; }

inline ordered_json estimate_json(const MeanSquareEstimate& e) {
    return {{"t1", e.t1},       {"t2", e.t2},
            {"grid_step", e.grid_step}, {"value", e.value},
            {"refined_value", e.refined_value}, {"rel_gap", e.rel_gap},
            {"accepted", e.accepted()}};
}

inline ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

/// Where results go: the --out file when given, else the caller's stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) {
                throw ValidationError("cannot write output file " + path);
            }
            stream_ = &file_;
        }
    }
    std::ostream& stream() { return *stream_; }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

inline bool want_json(const Options& o, bool json_default) {
    if (o.format == "json") {
        return true;
    }
    if (o.format == "csv") {
        return false;
    }
    if (!o.format.empty()) {
        throw ValidationError("--format must be csv or json");
    }
    if (o.out.size() >= 5 && o.out.compare(o.out.size() - 5, 5, ".json") == 0) {
        return true;
    }
    if (o.out.size() >= 4 && o.out.compare(o.out.size() - 4, 4, ".csv") == 0) {
        return false;
    }
    return json_default;
}

inline ordered_json header(const std::string& command) {
    ordered_json j;
    j["schema"] = 1;
    j["command"] = command;
    return j;
}

inline void write_json(std::ostream& os, const ordered_json& j) { os << j.dump(2) << '\n'; }

inline std::string seconds_since(std::chrono::steady_clock::time_point start) {
    return format17(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

// ---- subcommands -----------------------------------------------------------

inline int cmd_sieve(const Options& o, std::ostream& os) {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    if (o.lo || o.hi) {
        if (!o.lo || !o.hi) {
            throw ValidationError("--lo and --hi go together");
        }
        lo = parse_count("--lo", *o.lo);
        hi = parse_count("--hi", *o.hi);
    } else {
        const auto X = single_X(o);
        lo = X;
        hi = 2 * X + 1;
    }
    if (hi < lo) {
        throw ValidationError("--hi must not be below --lo");
    }
    SieveConfig config;
    config.window = {o.P.value_or(2.0), o.Q.value_or(o.P.value_or(2.0))};
    config.validate();
    const auto cache = open_cache(o);
    const bool json = want_json(o, false);
    Sink sink(o.out, os);
    const FactorSieve sieve(config, std::max<std::uint64_t>(hi, 2));
    std::int64_t lambda_sum = 0;
    std::uint64_t rough = 0;
    std::uint64_t flagged = 0;
    auto& out = sink.stream();
    if (o.dump) {
        out << "n,big_omega,lambda,window_omega,window_square_flag\n";
    }
    auto consume = [&](const FactorBlock& b) {
        for (std::size_t i = 0; i < b.size(); ++i) {
            lambda_sum += b.lambda[i];
            rough += b.window_omega[i] == 0 ? 1 : 0;
            flagged += b.window_square_flag[i] ? 1 : 0;
            if (o.dump) {
                out << (b.range.lo + i) << ',' << int(b.big_omega[i]) << ',' << int(b.lambda[i]) << ','
                    << int(b.window_omega[i]) << ',' << int(b.window_square_flag[i]) << '\n';
            }
        }
    };
    for (std::uint64_t a = lo; a < hi;) {
        const std::uint64_t b = a + std::min(config.block_size, hi - a);
        if (cache) {
            consume(cache->get(sieve, {a, b}));
        } else {
            consume(sieve.block({a, b}));
        }
        a = b;
    }
    if (o.dump) {
        return kExitOk;
    }
    if (json) {
        auto j = header("sieve");
        j["lo"] = lo;
        j["hi"] = hi;
        j["P"] = config.window.lower;
        j["Q"] = config.window.upper;
        j["lambda_sum"] = lambda_sum;
        j["rough_count"] = rough;
        j["window_square_count"] = flagged;
        write_json(out, j);
    } else {
        out << "lo,hi,P,Q,lambda_sum,rough_count,window_square_count\n";
        out << lo << ',' << hi << ',' << format17(config.window.lower) << ',' << format17(config.window.upper) << ','
            << lambda_sum << ',' << rough << ',' << flagged << '\n';
    }
    return kExitOk;
}

inline void variance_csv_row(std::ostream& out, const VarianceReport& r, const std::string& seconds) {
    out << r.X << ',' << format17(r.delta.value_or(0.0)) << ',' << r.h << ',' << format17(r.variance) << ','
        << format17(r.threshold) << ',' << format17(r.exceptional_fraction) << ',' << seconds << '\n';
}

inline int cmd_variance(const Options& o, std::ostream& os) {
    const auto start = std::chrono::steady_clock::now();
    const double delta = single_delta(o);
    const auto X = single_X(o);
    if (X < 2) {
        throw ValidationError("--X must be at least 2");
    }
    if (o.threshold && !(*o.threshold > 0.0)) {
        throw ValidationError("--threshold must be positive");
    }
    const auto f = make_function(o);
    const auto cache = open_cache(o);
    const bool json = want_json(o, false);
    Sink sink(o.out, os);
    VarianceOptions vo;
    vo.subtract_mean = o.subtract_mean;
    vo.threshold = o.threshold;
    vo.threads = thread_count(o);
    vo.cache = cache.get();
    const auto r = streaming_variance(f, X, delta, vo);
    const std::string seconds = o.timing ? seconds_since(start) : "";
    if (json) {
        auto j = header("variance");
        j["config"] = {{"f", f.name()}, {"seed", o.seed}, {"subtract_mean", o.subtract_mean}};
        j["X"] = r.X;
        j["delta"] = delta;
        j["h"] = r.h;
        j["variance"] = r.variance;
        j["threshold"] = r.threshold;
        j["exceptional_fraction"] = r.exceptional_fraction;
        j["mean"] = r.mean;
        j["chebyshev_holds"] = r.chebyshev_holds();
        if (o.timing) {
            j["seconds"] = std::stod(seconds);
        }
        write_json(sink.stream(), j);
    } else {
        sink.stream() << "X,delta,h,variance,threshold,exceptional_fraction,seconds\n";
        variance_csv_row(sink.stream(), r, seconds);
    }
    return r.chebyshev_holds() && r.in_range() ? kExitOk : kExitInvariant;
}

inline GridOptions grid_options(const Options& o) {
    GridOptions g;
    g.threads = thread_count(o);
    return g;
}

inline int cmd_meansq(const Options& o, std::ostream& os) {
    const double T1 = o.T1.value_or(0.0);
    const double T2 = require(o.T2, "--T2");
    if (!(T1 >= 0.0 && T1 < T2)) {
        throw ValidationError("need 0 <= T1 < T2");
    }
    DirichletPoly poly;
    std::string label;
    if (o.poly == "primes") {
        poly = prime_poly(require(o.P, "--P"), require(o.Q, "--Q"));
        label = "primes";
    } else if (o.poly == "f") {
        const auto X = single_X(o);
        const auto f = make_function(o);
        poly = function_poly(f, X);
        label = f.name();
    } else {
        throw ValidationError("--poly must be f or primes");
    }
    const auto grid = grid_options(o);
    Sink sink(o.out, os);
    if (o.dump) {
        const auto g = make_grid(poly, T1, T2, grid);
        const auto samples = eval_grid(poly, T1, g.step, g.intervals + 1, grid.threads);
        sink.stream() << "t,re,im,abs\n";
        for (std::size_t i = 0; i < samples.size(); ++i) {
            sink.stream() << format17(T1 + static_cast<double>(i) * g.step) << ',' << format17(samples[i].real())
                          << ',' << format17(samples[i].imag()) << ',' << format17(std::abs(samples[i])) << '\n';
        }
        return kExitOk;
    }
    const auto est = mean_square(poly, T1, T2, grid);
    auto j = header("meansq");
    j["config"] = {{"poly", label}, {"seed", o.seed}, {"N1", poly.lower()}, {"N2", poly.upper()}};
    j["estimate"] = estimate_json(est);
    if (T1 == 0.0) {
        j["mvt_ratio"] = poly.square_sum() > 0.0
                             ? 2.0 * est.refined_value / ((T2 + static_cast<double>(poly.upper())) * poly.square_sum())
                             : 0.0;
    }
    write_json(sink.stream(), j);
    return est.accepted() ? kExitOk : kExitInvariant;
}

inline constexpr double kAdditivityTolerance = 1e-12;
inline constexpr double kReconstructionTolerance = 1e-9;

inline int cmd_ramare(const Options& o, std::ostream& os) {
    const auto X = single_X(o);
    const double P = require(o.P, "--P");
    const double Q = require(o.Q, "--Q");
    const double t = o.t.value_or(0.0);
    Sink sink(o.out, os);
    const auto r = ramare_decompose(X, P, Q, t);
    auto j = header("ramare");
    j["X"] = X;
    j["P"] = P;
    j["Q"] = Q;
    j["t"] = t;
    j["lhs"] = complex_json(r.lhs);
    j["main"] = complex_json(r.main);
    j["bilinear"] = complex_json(r.bilinear);
    j["rough"] = complex_json(r.rough);
    j["residual"] = complex_json(r.residual);
    j["residual_audit"] = complex_json(r.residual_audit);
    j["residual_support_count"] = r.residual_support_count;
    j["window_square_count"] = r.square_flag_count;
    j["support_matches"] = r.support_matches;
    j["additivity_error"] = r.additivity_error();
    write_json(sink.stream(), j);
    return r.support_matches && r.additivity_error() <= kAdditivityTolerance ? kExitOk : kExitInvariant;
}

inline int cmd_dyadic(const Options& o, std::ostream& os) {
    const auto X = single_X(o);
    const double P = require(o.P, "--P");
    const double Q = require(o.Q, "--Q");
    const double H = o.H.value_or(std::pow(std::log(static_cast<double>(X)), 5.0));
    const double t = o.t.value_or(0.0);
    Sink sink(o.out, os);
    const auto split = dyadic_split(X, P, Q, H);
    const auto ramare = ramare_decompose(X, P, Q, t);
    const auto rec = reconstruct(split, t);
    // The factored sum carries no lambda(p) = -1, so it rebuilds -main.
    const double rel = std::abs(rec + ramare.main) / std::max(std::abs(ramare.main), 1e-300);
    std::size_t nonempty = 0;
    ordered_json bins = ordered_json::array();
    for (const auto& f : split.factors) {
        if (f.primes.empty()) {
            continue;
        }
        ++nonempty;
        std::size_t count = 0;
        f.primes.for_each([&](std::uint64_t, double) { ++count; });
        bins.push_back({{"j", f.j}, {"primes", count}, {"m_lo", f.m_lo}, {"m_hi", f.m_hi}});
    }
    auto j = header("dyadic");
    j["X"] = X;
    j["P"] = P;
    j["Q"] = Q;
    j["H"] = H;
    j["t"] = t;
    j["j_lo"] = split.j_lo;
    j["j_hi"] = split.j_hi;
    j["bins"] = split.factors.size();
    j["nonempty_bins"] = nonempty;
    j["boundary_lower"] = {{"lo", split.boundary_lower.lower()}, {"hi", split.boundary_lower.upper()}};
    j["boundary_upper"] = {{"lo", split.boundary_upper.lower()}, {"hi", split.boundary_upper.upper()}};
    j["max_abs_d"] = split.max_abs_boundary();
    j["reconstruction"] = complex_json(rec);
    j["main"] = complex_json(ramare.main);
    j["relative_error"] = rel;
    if (o.dump) {
        j["factors"] = bins;
    }
    write_json(sink.stream(), j);
    return rel <= kReconstructionTolerance && split.max_abs_boundary() <= 1.0 ? kExitOk : kExitInvariant;
}

inline PipelineConfig pipeline_config(const Options& o, std::uint64_t X, double delta, const BlockCache* cache) {
    PipelineConfig c;
    c.X = X;
    c.delta = delta;
    c.epsilon = o.epsilon;
    c.A = o.A;
    c.H = o.H;
    c.P = o.P;
    c.Q = o.Q;
    c.force_window = o.force_window;
    c.f = make_function(o);
    c.subtract_mean = o.subtract_mean;
    c.threshold = o.threshold;
    c.grid = grid_options(o);
    c.cache = cache;
    return c;
}

inline int cmd_lemma_profiles(const Options& o, std::ostream& os) {
    const auto X = single_X(o);
    const double delta = single_delta(o);
    if (!(o.A > 0.0)) {
        throw ValidationError("--A must be positive");
    }
    const auto cache = open_cache(o);
    const auto config = pipeline_config(o, X, delta, cache.get());
    const auto params = resolve(config);
    const auto window = resolve_window(config);
    const double T = o.T.value_or(std::pow(static_cast<double>(X), 1.0 - delta));
    Sink sink(o.out, os);
    const auto grid = config.grid;
    bool ok = true;

    auto j = header("lemma-profiles");
    j["config"] = {{"X", X},         {"delta", delta},    {"A", o.A},         {"epsilon", o.epsilon},
                   {"P", window.lower}, {"Q", window.upper}, {"H", params.H}, {"T0", params.T0},
                   {"T0_uncapped", params.T0_uncapped}, {"T", T}, {"f", config.f.name()}, {"seed", o.seed}};

    const auto l1 = lemma1_profile(function_poly(config.f, X), X, o.A, grid);
    j["lemma1"] = {{"t_max", l1.t_max}, {"sup", l1.sup.value}, {"t_at", l1.sup.t}, {"samples", l1.sup.samples}};

    std::vector<double> ts;
    for (double t = 10.0; t <= static_cast<double>(X); t *= 10.0) {
        ts.push_back(t);
    }
    ts.insert(ts.begin(), 0.0);
    const auto l2 = lemma2_profile(window.lower, window.upper, X, ts, o.A);
    ordered_json rows = ordered_json::array();
    double l2_max = 0.0;
    for (const auto& r : l2) {
        rows.push_back({{"t", r.t}, {"abs", r.abs_value}, {"bound", r.bound}, {"ratio", r.ratio}});
        l2_max = std::max(l2_max, r.ratio);
    }
    j["lemma2"] = {{"rows", rows}, {"max_ratio", l2_max}};

    if (X <= kLemma3MaxX) {
        const auto c = lemma3_compare(config);
        ok = ok && c.stable() && std::isfinite(c.ratio);
        j["lemma3"] = {{"lhs", c.lhs},
                       {"rhs", c.rhs},
                       {"ratio", c.ratio},
                       {"ratio_coarse", c.ratio_coarse},
                       {"refinement_change", c.refinement_change},
                       {"stable", c.stable()},
                       {"tail_T", c.tail_T},
                       {"heuristic_windows", c.heuristic_windows},
                       {"mvt_ratio_max", c.mvt_ratio_max}};
    } else {
        j["lemma3"] = nullptr;
    }

    const auto l4 = lemma4_chain(config, T);
    auto scaled = [](const ScaledTerm& s) {
        return ordered_json{{"measured", s.estimate.refined_value}, {"scale", s.scale}, {"ratio", s.ratio}};
    };
    j["lemma4"] = {{"T", l4.T},
                   {"T0", l4.T0},
                   {"bins", l4.bins},
                   {"nonempty_bins", l4.nonempty_bins},
                   {"empty_product", l4.empty_product},
                   {"small_t", estimate_json(l4.small_t)},
                   {"large_t", estimate_json(l4.large_t)},
                   {"product_direct", estimate_json(l4.product_direct)},
                   {"product_bin_max", l4.product_bin_max},
                   {"product_cauchy_schwarz", l4.product_cauchy_schwarz},
                   {"product_shape", l4.product_shape},
                   {"rough", scaled(l4.rough)},
                   {"boundary_lower", scaled(l4.boundary_lower)},
                   {"boundary_upper", scaled(l4.boundary_upper)},
                   {"total", l4.total},
                   {"shape_bound", l4.shape_bound},
                   {"shape_ratio", l4.shape_ratio},
                   {"closing_bound", l4.closing_bound},
                   {"closing_ratio", l4.closing_ratio},
                   {"all_accepted", l4.all_accepted}};
    for (const double v : {l4.total, l4.shape_ratio, l4.closing_ratio, l4.rough.ratio, l4.boundary_lower.ratio,
                           l4.boundary_upper.ratio}) {
        ok = ok && std::isfinite(v) && v >= 0.0;
    }

    if (o.dump) {
        const auto split = dyadic_split(X, window.lower, window.upper, params.H);
        const double t0 = std::min(params.T0, T / 2.0);
        ordered_json sups = ordered_json::array();
        for (const auto& s : qjh_sup_profile(split, t0, T, grid)) {
            if (s.prime_count > 0) {
                sups.push_back({{"j", s.j}, {"primes", s.prime_count}, {"sup", s.sup}, {"t_at", s.t_at}});
            }
        }
        j["qjh_sup"] = sups;
    }
    write_json(sink.stream(), j);
    return ok ? kExitOk : kExitInvariant;
}

inline int cmd_study(const Options& o, std::ostream& os) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::uint64_t> Xs;
    for (const auto& s : split_list(o.X)) {
        Xs.push_back(parse_count("--X", s));
    }
    std::vector<double> deltas;
    for (const auto& s : split_list(o.delta)) {
        deltas.push_back(parse_real("--delta", s));
    }
    if (deltas.empty()) {
        deltas.push_back(0.5);
    }
    if (Xs.empty()) {
        throw ValidationError("--X is required");
    }
    for (const double d : deltas) {
        window_length(2, d);
    }
    if (o.threshold && !(*o.threshold > 0.0)) {
        throw ValidationError("--threshold must be positive");
    }
    const auto f = make_function(o);
    const auto cache = open_cache(o);
    const bool json = want_json(o, false);
    StudyOptions so;
    so.subtract_mean = o.subtract_mean;
    so.threshold = o.threshold;
    so.threads = thread_count(o);
    so.cache = cache.get();
    so.lemma3_max_X = parse_count("--lemma3-max-X", o.lemma3_max_X);
    so.timing = o.timing;
    Sink sink(o.out, os);
    const auto study = scaling_study(deltas, Xs, f, so);
    const auto flags = study.flags();
    auto& out = sink.stream();
    auto opt17 = [](const std::optional<double>& v) { return v ? format17(*v) : std::string(); };
    if (json) {
        auto j = header("study");
        ordered_json xs = ordered_json::array();
        for (const auto X : Xs) {
            xs.push_back(X);
        }
        j["config"] = {{"f", f.name()},
                       {"seed", o.seed},
                       {"f_file", o.f_file},
                       {"X", xs},
                       {"delta", deltas},
                       {"subtract_mean", o.subtract_mean},
                       {"threshold", optional_json(o.threshold)},
                       {"lemma3_max_X", so.lemma3_max_X}};
        ordered_json rows = ordered_json::array();
        for (const auto& r : study.rows) {
            ordered_json row = {{"X", r.X},
                                {"delta", r.delta},
                                {"h", r.h},
                                {"variance", r.variance},
                                {"variance_scaled", r.scaled_variance},
                                {"threshold", r.threshold},
                                {"exceptional_fraction", r.exceptional_fraction},
                                {"mean", r.mean},
                                {"chebyshev_holds", r.chebyshev},
                                {"lemma3_lhs", optional_json(r.lemma3_lhs)},
                                {"lemma3_rhs", optional_json(r.lemma3_rhs)},
                                {"lemma3_ratio", optional_json(r.lemma3_ratio)},
                                {"mvt_ratio_max", optional_json(r.mvt_ratio_max)}};
            if (r.seconds) {
                row["seconds"] = *r.seconds;
            }
            rows.push_back(row);
        }
        j["rows"] = rows;
        ordered_json trends = ordered_json::array();
        for (const double d : deltas) {
            trends.push_back({{"delta", d},
                              {"variance_decreasing", study.variance_decreasing(d)},
                              {"scaled_trend_bounded", study.scaled_trend_bounded(d)}});
        }
        j["trends"] = trends;
        j["flags"] = flags;
        if (o.timing) {
            j["seconds"] = std::stod(seconds_since(start));
        }
        write_json(out, j);
    } else {
        out << "X,delta,h,variance,variance_scaled,threshold,exceptional_fraction,lemma3_lhs,lemma3_rhs,lemma3_ratio,"
               "mvt_ratio_max,seconds\n";
        for (const auto& r : study.rows) {
            out << r.X << ',' << format17(r.delta) << ',' << r.h << ',' << format17(r.variance) << ','
                << format17(r.scaled_variance) << ',' << format17(r.threshold) << ','
                << format17(r.exceptional_fraction) << ',' << opt17(r.lemma3_lhs) << ',' << opt17(r.lemma3_rhs) << ','
                << opt17(r.lemma3_ratio) << ',' << opt17(r.mvt_ratio_max) << ',' << opt17(r.seconds) << '\n';
        }
    }
    return flags.empty() ? kExitOk : kExitInvariant;
}

inline void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--threads", o.threads, "worker threads (env SIL_THREADS)");
    sub->add_option("--out", o.out, "output file (default stdout)");
    sub->add_option("--format", o.format, "csv or json");
    sub->add_option("--cache-dir", o.cache_dir, "sieve block cache directory (env SIL_CACHE_DIR)");
    sub->add_option("--seed", o.seed, "seed for --f random");
    sub->add_option("--f", o.f, "liouville, mobius, one or random");
    sub->add_option("--f-file", o.f_file, "function definition file");
    sub->add_flag("--timing", o.timing, "record wall-clock seconds");
    sub->add_flag("--dump", o.dump, "emit per-item detail");
}

} // namespace detail

/// Runs one command line; results go to `out` unless --out is given, diagnostics to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Multiplicative functions in short intervals"};
    app.require_subcommand(1, 1);
    Options o;

    auto* sieve = app.add_subcommand("sieve", "factor data over [lo, hi) or [X, 2X]");
    sieve->add_option("--X", o.X);
    sieve->add_option("--lo", o.lo);
    sieve->add_option("--hi", o.hi);
    sieve->add_option("--P", o.P);
    sieve->add_option("--Q", o.Q);

    auto* variance = app.add_subcommand("variance", "short-interval variance over [X, 2X]");
    variance->add_option("--X", o.X);
    variance->add_option("--delta", o.delta);
    variance->add_option("--threshold", o.threshold);
    variance->add_flag("--subtract-mean", o.subtract_mean);

    auto* meansq = app.add_subcommand("meansq", "mean square of a Dirichlet polynomial on [T1, T2]");
    meansq->add_option("--X", o.X);
    meansq->add_option("--poly", o.poly, "f (coefficients f(n) on [X, 2X]) or primes (on [P, Q])");
    meansq->add_option("--P", o.P);
    meansq->add_option("--Q", o.Q);
    meansq->add_option("--T1", o.T1);
    meansq->add_option("--T2", o.T2);

    auto* ramare = app.add_subcommand("ramare", "weighted prime-window decomposition at one t");
    ramare->add_option("--X", o.X)->required();
    ramare->add_option("--P", o.P);
    ramare->add_option("--Q", o.Q);
    ramare->add_option("--t", o.t);

    auto* dyadic = app.add_subcommand("dyadic", "short prime ranges and boundary terms");
    dyadic->add_option("--X", o.X)->required();
    dyadic->add_option("--P", o.P);
    dyadic->add_option("--Q", o.Q);
    dyadic->add_option("--H", o.H);
    dyadic->add_option("--t", o.t);

    auto* profiles = app.add_subcommand("lemma-profiles", "bound profiles and the term-by-term chain");
    profiles->add_option("--X", o.X)->required();
    profiles->add_option("--delta", o.delta);
    profiles->add_option("--A", o.A);
    profiles->add_option("--epsilon", o.epsilon);
    profiles->add_option("--P", o.P);
    profiles->add_option("--Q", o.Q);
    profiles->add_option("--H", o.H);
    profiles->add_option("--T", o.T);
    profiles->add_flag("--force-window", o.force_window);

    auto* study = app.add_subcommand("study", "variance rows over lists of X and delta");
    study->add_option("--X", o.X, "comma-separated list")->required();
    study->add_option("--delta", o.delta, "comma-separated list");
    study->add_option("--threshold", o.threshold);
    study->add_option("--lemma3-max-X", o.lemma3_max_X);
    study->add_flag("--subtract-mean", o.subtract_mean);

    for (auto* sub : {sieve, variance, meansq, ramare, dyadic, profiles, study}) {
        detail::add_common(sub, o);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }

    try {
        if (sieve->parsed()) {
            return detail::cmd_sieve(o, out);
        }
        if (variance->parsed()) {
            return detail::cmd_variance(o, out);
        }
        if (meansq->parsed()) {
            return detail::cmd_meansq(o, out);
        }
        if (ramare->parsed()) {
            return detail::cmd_ramare(o, out);
        }
        if (dyadic->parsed()) {
            return detail::cmd_dyadic(o, out);
        }
        if (profiles->parsed()) {
            return detail::cmd_lemma_profiles(o, out);
        }
        return detail::cmd_study(o, out);
    } catch (const CapacityError& e) {
        err << "capacity error: " << e.what() << '\n';
        return kExitInput;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

} // namespace sil::cli

#endif
