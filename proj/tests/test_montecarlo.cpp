#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"

#include "bprelab/branching.hpp"
#include "bprelab/montecarlo.hpp"

using namespace bprelab;

TEST_CASE("deterministic doubling trajectory is exact") {
    const auto path = EnvironmentPath::constant(OffspringDistribution::from_pmf({{2, 1.0}}), 5);
    auto stream = make_stream(1, StreamDomain::replica, 0);
    const auto traj = simulate_population(path, 1, 5, stream);
    REQUIRE(traj.sizes.size() == 6);
    for (std::size_t k = 0; k <= 5; ++k) {
        CHECK(traj.sizes[k] == (std::uint64_t{1} << k));
        CHECK(traj.normalized[k] == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(traj.extinct_at == -1);
    CHECK_FALSE(traj.overflow);
}

TEST_CASE("a sure-zero litter kills the population in one step") {
    const auto path = EnvironmentPath::constant(OffspringDistribution::from_pmf({{0, 1.0}}), 4);
    auto stream = make_stream(1, StreamDomain::replica, 0);
    const auto traj = simulate_population(path, 3, 4, stream);
    REQUIRE(traj.sizes.size() == 5);
    CHECK(traj.sizes[0] == 3);
    CHECK(traj.normalized[0] == doctest::Approx(3.0));
    for (std::size_t k = 1; k <= 4; ++k) {
        CHECK(traj.sizes[k] == 0);
        CHECK(traj.normalized[k] == 0.0);
    }
    CHECK(traj.extinct_at == 1);
}

TEST_CASE("population growth saturates and is flagged") {
    // 3^40 exceeds the signed 64-bit range
    const auto path = EnvironmentPath::constant(OffspringDistribution::from_pmf({{3, 1.0}}), 45);
    auto stream = make_stream(1, StreamDomain::replica, 0);
    const auto traj = simulate_population(path, 1, 45, stream);
    CHECK(traj.overflow);
    CHECK(traj.sizes.size() == 40);  // Z_0 .. Z_39 recorded, the bad step dropped
    CHECK(traj.extinct_at == -1);
}

TEST_CASE("simulate_population validates its arguments") {
    const auto path = EnvironmentPath::constant(OffspringDistribution::binary(0.25, 2), 4);
    auto stream = make_stream(1, StreamDomain::replica, 0);
    CHECK_THROWS_AS(simulate_population(path, 0, 4, stream), std::invalid_argument);
    CHECK_THROWS_AS(simulate_population(path, 1, 5, stream), std::out_of_range);
}

TEST_CASE("martingale sample has unit mean and the right extinct fraction") {
    const auto path = EnvironmentPath::constant(OffspringDistribution::binary(0.25, 2), 12);
    const std::size_t replicas = 40000;
    const auto s = simulate_martingale(path, replicas, 12, 2024);
    const auto m = atom_and_moments(s);
    CHECK(m.count == replicas);
    CHECK(std::abs(m.mean - 1.0) < 4.0 * m.se_mean);
    // the extinct fraction estimates the depth-12 composition at 0
    const double q12 = compose_gen_fns_real(path, 0.0, 12);
    CHECK(std::abs(m.atom - q12) < 4.0 * m.se_atom);
}

TEST_CASE("martingale variance approaches its fixed-point value") {
    // for a single-law environment: var = sigma^2 (1 - m^-n) / (m^2 - m) -> 1 here
    const auto path = EnvironmentPath::constant(OffspringDistribution::binary(0.25, 2), 20);
    const auto s = simulate_martingale(path, 40000, 20, 7);
    const auto m = atom_and_moments(s);
    CHECK(std::abs(m.var - 1.0) < 0.1);
    CHECK(m.c == doctest::Approx(0.125 * std::min(1.0, m.var)).epsilon(1e-15));
    CHECK(m.trunc_n >= 1);
}

TEST_CASE("martingale sample is identical across thread counts") {
    const auto path = EnvironmentPath::constant(OffspringDistribution::binary(0.25, 2), 10);
    const auto a = simulate_martingale(path, 5000, 10, 99, 1);
    const auto b = simulate_martingale(path, 5000, 10, 99, 7);
    REQUIRE(a.values.size() == b.values.size());
    for (std::size_t r = 0; r < a.values.size(); ++r) {
        REQUIRE(a.values[r] == b.values[r]);
        REQUIRE(a.extinct_at[r] == b.extinct_at[r]);
    }
    CHECK(a.overflow_count == b.overflow_count);
}

TEST_CASE("moment summary of hand-built samples") {
    MartingaleSample all_ones;
    all_ones.values = {1.0, 1.0, 1.0, 1.0};
    all_ones.extinct_at = {-1, -1, -1, -1};
    const auto m1 = atom_and_moments(all_ones);
    CHECK(m1.atom == 0.0);
    CHECK(m1.mean == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m1.var == 0.0);
    CHECK(m1.c == 0.0);
    CHECK(m1.se_mean == 0.0);
    CHECK(m1.se_atom == 0.0);

    MartingaleSample coin;
    coin.values = {0.0, 2.0, 0.0, 2.0};
    coin.extinct_at = {1, -1, 2, -1};
    const auto m2 = atom_and_moments(coin);
    CHECK(m2.atom == doctest::Approx(0.5));
    CHECK(m2.mean == doctest::Approx(1.0));
    CHECK(m2.var == doctest::Approx(1.0));
    CHECK(m2.c == doctest::Approx(0.125));
    // disjoint pairs give |d| = 2, so the truncation level must reach 2
    CHECK(m2.trunc_n == 2);
}

TEST_CASE("extinct replicas report their extinction generation") {
    const auto path = EnvironmentPath::constant(
        OffspringDistribution::from_pmf({{0, 0.6}, {2, 0.4}}), 8);
    const auto s = simulate_martingale(path, 2000, 8, 5);
    std::size_t extinct = 0;
    for (std::size_t r = 0; r < s.values.size(); ++r) {
        if (s.extinct_at[r] >= 0) {
            ++extinct;
            CHECK(s.values[r] == 0.0);
            CHECK(s.extinct_at[r] >= 1);
            CHECK(s.extinct_at[r] <= 8);
        } else {
            CHECK(s.values[r] > 0.0);
        }
    }
    // subcritical (m = 0.8): most replicas die within 8 generations
    CHECK(extinct > 1200);
}
