#ifndef SIL_MULTIPLICATIVE_HPP
#define SIL_MULTIPLICATIVE_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sil/error.hpp"
#include "sil/numeric.hpp"
#include "sil/sieve.hpp"

namespace sil {

/// A multiplicative f: N -> [-1, 1] given by its values on prime powers; f(1) = 1.
class MultiplicativeFunction {
public:
    /// Returns f(p^k), or nothing when the rule does not cover (p, k).
    using Rule = std::function<std::optional<double>(std::uint64_t p, unsigned k)>;

    MultiplicativeFunction(std::string name, Rule rule, bool completely_multiplicative, bool integer_valued,
                           std::optional<double> constant_on_primes = std::nullopt)
        : name_(std::move(name)),
          rule_(std::move(rule)),
          completely_multiplicative_(completely_multiplicative),
          integer_valued_(integer_valued),
          constant_on_primes_(constant_on_primes) {}

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] bool completely_multiplicative() const noexcept { return completely_multiplicative_; }
    /// All values lie in {-1, 0, 1}; sums over ranges are then exact integers.
    [[nodiscard]] bool integer_valued() const noexcept { return integer_valued_; }
    /// Set when f is completely multiplicative with the same value v at every prime, so f(n) = v^Omega(n).
    [[nodiscard]] std::optional<double> constant_on_primes() const noexcept { return constant_on_primes_; }

    [[nodiscard]] double at_prime_power(std::uint64_t p, unsigned k) const {
        if (k == 0) {
            return 1.0;
        }
        const auto v = rule_(p, k);
        if (!v) {
            throw EvaluationError("f(" + std::to_string(p) + "^" + std::to_string(k) + ") is not defined by " + name_);
        }
        if (!(std::abs(*v) <= 1.0)) {
            throw EvaluationError("f(" + std::to_string(p) + "^" + std::to_string(k) + ") = " + format17(*v) +
                                  " lies outside [-1, 1]");
        }
        return *v;
    }

private:
    std::string name_;
    Rule rule_;
    bool completely_multiplicative_;
    bool integer_valued_;
    std::optional<double> constant_on_primes_;
};

inline MultiplicativeFunction liouville() {
    return {"liouville", [](std::uint64_t, unsigned k) -> std::optional<double> { return (k % 2) ? -1.0 : 1.0; },
            true, true, -1.0};
}

/// f(p) = -1, f(p^k) = 0 for k >= 2; exercises the non-completely-multiplicative path.
inline MultiplicativeFunction mobius() {
    return {"mobius", [](std::uint64_t, unsigned k) -> std::optional<double> { return k == 1 ? -1.0 : 0.0; },
            false, true};
}

inline MultiplicativeFunction constant_one() {
    return {"one", [](std::uint64_t, unsigned) -> std::optional<double> { return 1.0; }, true, true, 1.0};
}

/// Completely multiplicative with an independent, reproducible sign at each prime.
inline MultiplicativeFunction random_sign(std::uint64_t seed) {
    auto sign = [seed](std::uint64_t p) { return (splitmix64(splitmix64(seed) ^ p) >> 63) ? -1.0 : 1.0; };
    return {"random:" + std::to_string(seed),
            [sign](std::uint64_t p, unsigned k) -> std::optional<double> { return (k % 2) ? sign(p) : 1.0; },
            true, true};
}

/// Parses the text definition format: lines "p k value", optionally "* 1 v" which makes
/// f completely multiplicative with f(p) = v at every prime not listed explicitly.
/// Blank lines and lines starting with '#' are ignored.
inline MultiplicativeFunction parse_definition(std::istream& in, std::string name) {
    std::map<std::pair<std::uint64_t, unsigned>, double> table;
    std::optional<double> default_prime;
    bool integer_valued = true;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw ValidationError(name + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::istringstream fields(line);
        std::string p_text;
        long long k = 0;
        double v = 0.0;
        if (!(fields >> p_text >> k >> v)) {
            fail("expected \"p k value\"");
        }
        std::string extra;
        if (fields >> extra) {
            fail("trailing text");
        }
        if (!(std::abs(v) <= 1.0)) {
            fail("value outside [-1, 1]");
        }
        integer_valued = integer_valued && (v == -1.0 || v == 0.0 || v == 1.0);
        if (p_text == "*") {
            if (k != 1) {
                fail("wildcard line must read \"* 1 v\"");
            }
            default_prime = v;
            continue;
        }
        std::uint64_t p = 0;
        try {
            std::size_t used = 0;
            p = std::stoull(p_text, &used);
            if (used != p_text.size()) {
                fail("bad prime");
            }
        } catch (const std::logic_error&) {
            fail("bad prime");
        }
        if (p < 2 || k < 1 || k > 64) {
            fail("need p >= 2 and 1 <= k <= 64");
        }
        table[{p, static_cast<unsigned>(k)}] = v;
    }
    const bool completely = default_prime.has_value();
    if (completely) {
        for (const auto& [key, v] : table) {
            if (key.second == 1) {
                continue;
            }
            const auto base = table.find({key.first, 1});
            const double fp = base != table.end() ? base->second : *default_prime;
            if (std::abs(std::pow(fp, key.second) - v) > 1e-12) {
                throw ValidationError(name + ": f(" + std::to_string(key.first) + "^" + std::to_string(key.second) +
                                      ") contradicts complete multiplicativity");
            }
        }
    }
    std::optional<double> constant;
    if (completely) {
        bool uniform = true;
        for (const auto& [key, v] : table) {
            if (key.second == 1 && v != *default_prime) {
                uniform = false;
            }
        }
        if (uniform) {
            constant = default_prime;
        }
    }
    auto shared = std::make_shared<const decltype(table)>(std::move(table));
    MultiplicativeFunction::Rule rule = [shared, default_prime](std::uint64_t p, unsigned k) -> std::optional<double> {
        if (default_prime) {
            const auto it = shared->find({p, 1});
            const double fp = it != shared->end() ? it->second : *default_prime;
            return std::pow(fp, static_cast<double>(k));
        }
        const auto it = shared->find({p, k});
        if (it == shared->end()) {
            return std::nullopt;
        }
        return it->second;
    };
    return {std::move(name), std::move(rule), completely, integer_valued, constant};
}

inline MultiplicativeFunction load_definition(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot read function definition " + path);
    }
    return parse_definition(in, path);
}

/// f(n) for n in `range`, evaluated through the segmented sieve.
inline std::vector<double> evaluate_range(const MultiplicativeFunction& f, IntegerRange range, const FactorSieve& sieve) {
    std::vector<double> out(range.size());
    if (range.empty()) {
        return out;
    }
    if (const auto v = f.constant_on_primes()) {
        std::size_t offset = 0;
        sieve.for_each_segment(range, [&](const FactorBlock& seg) {
            for (std::size_t i = 0; i < seg.size(); ++i) {
                out[offset + i] = *v == -1.0 ? static_cast<double>(seg.lambda[i])
                                             : std::pow(*v, static_cast<double>(seg.big_omega[i]));
            }
            offset += seg.size();
        });
        return out;
    }
    sieve.accumulate_values(range, [&f](std::uint64_t p, unsigned k) { return f.at_prime_power(p, k); }, out);
    return out;
}

/// value[i] = f(block.range.lo + i).
///
/// Functions of the form f(n) = v^Omega(n) read the block directly; anything else
/// re-runs the sieve over the block's range in value-accumulation mode.
inline std::vector<double> evaluate_on_block(const MultiplicativeFunction& f, const FactorBlock& block) {
    if (const auto v = f.constant_on_primes()) {
        std::vector<double> out(block.size());
        for (std::size_t i = 0; i < block.size(); ++i) {
            out[i] = *v == -1.0 ? static_cast<double>(block.lambda[i])
                                : std::pow(*v, static_cast<double>(block.big_omega[i]));
        }
        return out;
    }
    SieveConfig config;
    config.window = block.window;
    const FactorSieve sieve(config, std::max<std::uint64_t>(block.range.hi, 2));
    return evaluate_range(f, block.range, sieve);
}

/// (1/X) sum_{X <= n <= 2X} f(n); the integer sum is kept exactly for integer-valued f.
struct MeanValue {
    std::uint64_t X = 0;
    double value = 0.0;
    std::optional<std::int64_t> exact_sum;
};

inline MeanValue mean_over(const MultiplicativeFunction& f, std::uint64_t X, const FactorSieve& sieve) {
    if (X < 2) {
        throw ValidationError("mean_over requires X >= 2");
    }
    const IntegerRange range{X, 2 * X + 1};
    MeanValue mean{X, 0.0, std::nullopt};
    CompensatedSum real_sum;
    std::int64_t int_sum = 0;
    for (std::uint64_t lo = range.lo; lo < range.hi;) {
        const std::uint64_t hi = lo + std::min(sieve.config().block_size, range.hi - lo);
        const auto values = evaluate_range(f, {lo, hi}, sieve);
        for (const double v : values) {
            if (f.integer_valued()) {
                int_sum += static_cast<std::int64_t>(v);
            } else {
                real_sum.add(v);
            }
        }
        lo = hi;
    }
    if (f.integer_valued()) {
        mean.exact_sum = int_sum;
        mean.value = static_cast<double>(int_sum) / static_cast<double>(X);
    } else {
        mean.value = real_sum.value() / static_cast<double>(X);
    }
    return mean;
}

inline MeanValue mean_over(const MultiplicativeFunction& f, std::uint64_t X) {
    const FactorSieve sieve(SieveConfig{}, 2 * X + 1);
    return mean_over(f, X, sieve);
}

} // namespace sil

#endif
