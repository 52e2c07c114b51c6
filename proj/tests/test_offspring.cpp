#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>

#include "doctest.h"

#include "bprelab/offspring.hpp"
#include "bprelab/rng.hpp"

using namespace bprelab;

namespace {

const OffspringDistribution& quarter_binary() {
    static const auto d = OffspringDistribution::from_pmf({{0, 0.25}, {2, 0.75}});
    return d;
}

}  // namespace

TEST_CASE("explicit pmf moments: {0: 1/4, 2: 3/4}") {
    const auto& d = quarter_binary();
    CHECK(d.mean() == doctest::Approx(1.5).epsilon(1e-14));
    // E X^2 = 3, var = 3 - 2.25
    CHECK(d.variance() == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(d.second_factorial_moment() == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(d.p0() == doctest::Approx(0.25));
    CHECK_FALSE(d.degenerate());
    CHECK(d.max_support() == 2);
    CHECK(d.mass(0) == doctest::Approx(0.25));
    CHECK(d.mass(1) == 0.0);
    CHECK(d.mass(2) == doctest::Approx(0.75));
    CHECK(d.mass(17) == 0.0);
}

TEST_CASE("binary factory matches the explicit pmf") {
    const auto b = OffspringDistribution::binary(0.25, 2);
    const auto& d = quarter_binary();
    for (double s : {0.0, 0.3, 0.7, 1.0})
        CHECK(b.gen_fn_real(s) == doctest::Approx(d.gen_fn_real(s)).epsilon(1e-15));
}

TEST_CASE("generating function and derivatives at the boundary") {
    const auto& d = quarter_binary();
    // f(s) = 1/4 + 3/4 s^2
    CHECK(d.gen_fn_real(0.5) == doctest::Approx(0.4375).epsilon(1e-15));
    CHECK(d.gen_fn_real(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(d.gen_fn_real(1.0, 1) == doctest::Approx(1.5).epsilon(1e-15));   // f'(1) = mean
    CHECK(d.gen_fn_real(1.0, 2) == doctest::Approx(1.5).epsilon(1e-15));   // f''(1) = E X(X-1)
    CHECK_THROWS_AS(d.gen_fn_real(1.1), std::domain_error);
    CHECK_THROWS_AS(d.gen_fn(std::complex<double>(0.8, 0.8)), std::domain_error);
    CHECK_THROWS_AS(d.gen_fn_real(0.5, 3), std::invalid_argument);
}

TEST_CASE("point mass is flagged degenerate with zero variance") {
    const auto d = OffspringDistribution::from_pmf({{2, 1.0}});
    CHECK(d.degenerate());
    CHECK(d.mean() == doctest::Approx(2.0));
    CHECK(d.variance() == doctest::Approx(0.0));
    CHECK(d.gen_fn_real(0.5) == doctest::Approx(0.25));  // s^2
}

TEST_CASE("pmf validation rejects bad input") {
    CHECK_THROWS_AS(OffspringDistribution::from_pmf({{0, 0.5}, {1, 0.4}}),
                    std::invalid_argument);  // mass 0.9
    CHECK_THROWS_AS(OffspringDistribution::from_pmf({{0, 1.5}, {1, -0.5}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(OffspringDistribution::from_pmf({}), std::invalid_argument);
}

TEST_CASE("truncated geometric keeps its closed-form generating function") {
    const auto d = OffspringDistribution::geometric(0.6);
    // P(X=k) = 0.4 * 0.6^k; the 1e-12 truncation keeps {0..54}
    CHECK(d.max_support() == 54);
    CHECK(d.support().size() == 55);
    CHECK(d.mean() == doctest::Approx(1.5).epsilon(1e-9));
    // mean p/(1-p), variance p/(1-p)^2
    CHECK(d.variance() == doctest::Approx(0.6 / 0.16).epsilon(1e-9));
    for (double s : {-1.0, -0.5, 0.0, 0.5, 0.9, 1.0}) {
        const double closed = 0.4 / (1.0 - 0.6 * s);
        CHECK(d.gen_fn_real(s) == doctest::Approx(closed).epsilon(1e-10));
    }
    const std::complex<double> s(0.3, 0.8);
    const auto closed = 0.4 / (1.0 - 0.6 * s);
    CHECK(std::abs(d.gen_fn(s) - closed) < 1e-10);
}

TEST_CASE("truncated poisson matches exp(lambda (s-1))") {
    const auto d = OffspringDistribution::poisson(2.0);
    CHECK(d.mean() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(d.variance() == doctest::Approx(2.0).epsilon(1e-9));
    for (double s : {0.0, 0.25, 0.5, 0.75, 1.0})
        CHECK(d.gen_fn_real(s) == doctest::Approx(std::exp(2.0 * (s - 1.0))).epsilon(1e-10));
}

TEST_CASE("generating function modulus is controlled by the radial value") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<std::uint32_t, double> pmf;
        const int kmax = 1 + static_cast<int>(rng.below(6));
        double total = 0.0;
        for (int k = 0; k <= kmax; ++k) total += (pmf[k] = rng.uniform01() + 1e-3);
        for (auto& [k, p] : pmf) p /= total;
        const auto d = OffspringDistribution::from_pmf(pmf);
        const double r = rng.uniform01();
        const double phase = rng.uniform01() * 6.283185307179586;
        const auto val = d.gen_fn(std::polar(r, phase));
        CHECK(std::abs(val) <= d.gen_fn_real(r) + 1e-12);
        CHECK(std::abs(val) <= 1.0 + 1e-12);
    }
}

TEST_CASE("one-step totals have the right moments in both sampling regimes") {
    const auto& d = quarter_binary();
    SplitMix64 rng(77);
    // z = 50 exercises per-parent draws, z = 1000 the conditional-binomial chain
    for (std::uint64_t z : {std::uint64_t{50}, std::uint64_t{1000}}) {
        const int reps = 20000;
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < reps; ++i) {
            bool overflow = false;
            const double x = static_cast<double>(d.branch_sum(rng, z, overflow));
            REQUIRE_FALSE(overflow);
            sum += x;
            sumsq += x * x;
        }
        const double zz = static_cast<double>(z);
        const double mean = sum / reps;
        const double var = sumsq / reps - mean * mean;
        const double tm = 1.5 * zz, tv = 0.75 * zz;
        CHECK(std::abs(mean - tm) < 5.0 * std::sqrt(tv / reps));
        CHECK(std::abs(var - tv) / tv < 0.08);
    }
}

TEST_CASE("one-step totals: support parity is preserved") {
    // every litter is 0 or 2, so any generation total is even
    const auto& d = quarter_binary();
    SplitMix64 rng(78);
    for (std::uint64_t z : {std::uint64_t{7}, std::uint64_t{500}}) {
        for (int i = 0; i < 2000; ++i) {
            bool overflow = false;
            CHECK(d.branch_sum(rng, z, overflow) % 2 == 0);
        }
    }
}

TEST_CASE("deterministic litters saturate instead of wrapping") {
    const auto d = OffspringDistribution::from_pmf({{3, 1.0}});
    SplitMix64 rng(1);
    bool overflow = false;
    CHECK(d.branch_sum(rng, 10, overflow) == 30);
    CHECK_FALSE(overflow);

    const std::uint64_t huge = std::uint64_t{1} << 62;
    const std::uint64_t got = d.branch_sum(rng, huge, overflow);
    CHECK(overflow);
    CHECK(got == static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()));
}

TEST_CASE("zero parents produce zero offspring without consuming randomness") {
    const auto& d = quarter_binary();
    SplitMix64 a(5), b(5);
    bool overflow = false;
    CHECK(d.branch_sum(a, 0, overflow) == 0);
    CHECK(a() == b());  // stream untouched
}
