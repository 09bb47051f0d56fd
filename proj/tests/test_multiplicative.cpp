#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sil/multiplicative.hpp"

using namespace sil;

namespace {

FactorBlock plain_block(std::uint64_t lo, std::uint64_t hi) {
    SieveConfig c;
    c.window = {2, 2};
    return sieve_block({lo, hi}, c);
}

// f(n) from the prime-power rule and a trial-division factorization.
double oracle_value(const MultiplicativeFunction& f, std::uint64_t n) {
    double v = 1.0;
    for (const auto& [p, k] : oracle::factor(n).factors) {
        v *= f.at_prime_power(p, k);
    }
    return v;
}

MultiplicativeFunction parse(const std::string& text) {
    std::istringstream in(text);
    return parse_definition(in, "test");
}

} // namespace

TEST(Evaluate, LiouvilleTwelve) {
    const auto v = evaluate_on_block(liouville(), plain_block(12, 13));
    EXPECT_EQ(v[0], oracle::liouville(12));
    EXPECT_EQ(v[0], -1.0);
}

TEST(Evaluate, OneIsOne) {
    for (const auto& f : {liouville(), mobius(), constant_one(), random_sign(5)}) {
        EXPECT_EQ(evaluate_on_block(f, plain_block(1, 2))[0], 1.0) << f.name();
    }
}

TEST(Evaluate, ConstantOne) {
    const auto v = evaluate_on_block(constant_one(), plain_block(10, 20));
    ASSERT_EQ(v.size(), 10U);
    for (const double x : v) {
        EXPECT_EQ(x, 1.0);
    }
}

TEST(Evaluate, AgreesWithFactorizationOracle) {
    std::istringstream def("# mixed values\n* 1 -0.5\n3 1 0.25\n7 1 1\n");
    const auto custom = parse_definition(def, "custom");
    for (const auto& f : {liouville(), mobius(), random_sign(42), custom}) {
        const auto v = evaluate_on_block(f, plain_block(90000, 100000));
        for (std::uint64_t i = 0; i < v.size(); ++i) {
            ASSERT_NEAR(v[i], oracle_value(f, 90000 + i), 1e-12) << f.name() << " n=" << 90000 + i;
        }
    }
}

TEST(Evaluate, MobiusVanishesOnSquares) {
    const auto v = evaluate_on_block(mobius(), plain_block(1, 2001));
    for (std::uint64_t n = 1; n <= 2000; ++n) {
        bool squarefree = true;
        for (const auto& [p, k] : oracle::factor(n).factors) {
            squarefree = squarefree && k == 1;
        }
        if (!squarefree) {
            ASSERT_EQ(v[n - 1], 0.0) << n;
        } else {
            ASSERT_EQ(v[n - 1], oracle::liouville(n)) << n;
        }
    }
}

TEST(Evaluate, Multiplicativity) {
    const std::uint64_t N = 1'000'000;
    std::istringstream def("* 1 0.75\n2 1 -0.3\n");
    const auto real_f = parse_definition(def, "real");
    for (const auto& f : {liouville(), mobius(), random_sign(9), real_f}) {
        SieveConfig c;
        const FactorSieve sieve(c, N * N + 1);
        const auto small = evaluate_range(f, {1, N + 1}, sieve);
        std::mt19937_64 rng(1);
        int done = 0;
        while (done < 2000) {
            const std::uint64_t m = 1 + rng() % N;
            const std::uint64_t n = 1 + rng() % N;
            if (std::gcd(m, n) != 1) {
                continue;
            }
            const double mn = evaluate_range(f, {m * n, m * n + 1}, sieve)[0];
            const double tol = f.integer_valued() ? 0.0 : 1e-12;
            ASSERT_NEAR(mn, small[m - 1] * small[n - 1], tol) << f.name() << " " << m << "*" << n;
            ++done;
        }
    }
}

TEST(Evaluate, Bounded) {
    std::istringstream def("* 1 -0.9\n5 1 1\n");
    const auto f = parse_definition(def, "b");
    const auto v = evaluate_on_block(f, plain_block(2, 100000));
    for (const double x : v) {
        ASSERT_LE(std::abs(x), 1.0 + 1e-12);
    }
}

TEST(Evaluate, MissingPrimePowerNamesIt) {
    const auto f = parse("2 1 -1\n3 1 1\n");
    try {
        (void)evaluate_on_block(f, plain_block(2, 10));
        FAIL() << "expected an evaluation error";
    } catch (const EvaluationError& e) {
        EXPECT_NE(std::string(e.what()).find("^"), std::string::npos);
    }
}

TEST(Definition, ParsesAndChecks) {
    const auto f = parse("# comment\n\n* 1 -1\n");
    EXPECT_TRUE(f.completely_multiplicative());
    EXPECT_TRUE(f.integer_valued());
    ASSERT_TRUE(f.constant_on_primes());
    EXPECT_EQ(*f.constant_on_primes(), -1.0);
    EXPECT_EQ(f.at_prime_power(101, 3), -1.0);

    const auto g = parse("* 1 1\n5 1 -1\n5 2 1\n");
    EXPECT_FALSE(g.constant_on_primes());
    EXPECT_EQ(g.at_prime_power(5, 3), -1.0);
    EXPECT_EQ(g.at_prime_power(7, 3), 1.0);

    const auto h = parse("2 1 -1\n2 2 0\n3 1 0.5\n");
    EXPECT_FALSE(h.completely_multiplicative());
    EXPECT_FALSE(h.integer_valued());
    EXPECT_EQ(h.at_prime_power(2, 2), 0.0);

    EXPECT_THROW(parse("2 1 1.5\n"), ValidationError);
    EXPECT_THROW(parse("* 2 1\n"), ValidationError);
    EXPECT_THROW(parse("x 1 1\n"), ValidationError);
    EXPECT_THROW(parse("2 1\n"), ValidationError);
    EXPECT_THROW(parse("2 1 1 extra\n"), ValidationError);
    EXPECT_THROW(parse("* 1 -1\n2 2 -1\n"), ValidationError);
    EXPECT_THROW(load_definition("/nonexistent/def.txt"), ValidationError);
}

TEST(Definition, CustomMatchesBuiltin) {
    const auto f = parse("* 1 -1\n");
    const auto a = evaluate_on_block(f, plain_block(1000, 5000));
    const auto b = evaluate_on_block(liouville(), plain_block(1000, 5000));
    EXPECT_EQ(a, b);
}

TEST(RandomSign, SeededAndReproducible) {
    const auto a = random_sign(1);
    const auto b = random_sign(1);
    const auto c = random_sign(2);
    int differ = 0;
    int negative = 0;
    for (const auto p : primes_in(2, 10000)) {
        EXPECT_EQ(a.at_prime_power(p, 1), b.at_prime_power(p, 1));
        EXPECT_EQ(a.at_prime_power(p, 2), 1.0);
        differ += a.at_prime_power(p, 1) != c.at_prime_power(p, 1) ? 1 : 0;
        negative += a.at_prime_power(p, 1) < 0 ? 1 : 0;
    }
    EXPECT_GT(differ, 400);
    EXPECT_GT(negative, 500);
    EXPECT_LT(negative, 730);
}

TEST(MeanOver, Examples) {
    const auto one = mean_over(constant_one(), 100);
    EXPECT_EQ(one.value, 101.0 / 100.0);
    ASSERT_TRUE(one.exact_sum);
    EXPECT_EQ(*one.exact_sum, 101);

    int s = 0;
    for (std::uint64_t n = 5; n <= 10; ++n) {
        s += oracle::liouville(n);
    }
    EXPECT_EQ(s, 0);
    EXPECT_EQ(mean_over(liouville(), 5).value, 0.0);

    const auto big = mean_over(liouville(), 1'000'000);
    EXPECT_LE(std::abs(big.value), 0.01);
    EXPECT_THROW(mean_over(liouville(), 1), ValidationError);
}

TEST(MeanOver, RealValuedAgreesWithDirectSum) {
    const auto f = parse("* 1 0.5\n");
    const auto m = mean_over(f, 3000);
    EXPECT_FALSE(m.exact_sum);
    double s = 0.0;
    for (std::uint64_t n = 3000; n <= 6000; ++n) {
        s += std::pow(0.5, oracle::factor(n).big_omega());
    }
    EXPECT_NEAR(m.value, s / 3000.0, 1e-13);
}
