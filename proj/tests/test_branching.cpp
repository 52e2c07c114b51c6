#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "doctest.h"

#include "bprelab/branching.hpp"
#include "bprelab/environment.hpp"

#include "json.hpp"

using namespace bprelab;
using nlohmann::json;

namespace {

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

// law of the n-th generation size from one ancestor, by brute-force
// convolution; tractable only for tiny supports and depths
std::vector<double> generation_law(const EnvironmentPath& path, std::size_t n) {
    std::vector<double> law = {0.0, 1.0};
    for (std::size_t k = 0; k < n; ++k) {
        const auto& d = path.dist(k);
        std::vector<double> litter(d.max_support() + 1, 0.0);
        for (std::size_t i = 0; i < d.support().size(); ++i)
            litter[d.support()[i]] = d.probabilities()[i];
        std::vector<double> next((law.size() - 1) * d.max_support() + 1, 0.0);
        std::vector<double> total = {1.0};  // sum of zero litters
        next[0] += law[0];
        for (std::size_t z = 1; z < law.size(); ++z) {
            total = convolve(total, litter);
            for (std::size_t j = 0; j < total.size(); ++j) next[j] += law[z] * total[j];
        }
        law = std::move(next);
    }
    return law;
}

std::complex<double> eval_pgf(const std::vector<double>& law, std::complex<double> s) {
    std::complex<double> acc = 0.0;
    for (std::size_t k = law.size(); k-- > 0;) acc = acc * s + law[k];
    return acc;
}

EnvironmentPath mixed_path() {
    return EnvironmentPath::from_states(
        {OffspringDistribution::binary(0.25, 2),
         OffspringDistribution::from_pmf({{0, 0.5}, {1, 0.5}}),
         OffspringDistribution::binary(0.5, 3)},
        {0, 1, 2, 0});
}

}  // namespace

TEST_CASE("depth zero composition is the identity") {
    const auto path = mixed_path();
    const std::complex<double> s(0.3, -0.6);
    CHECK(compose_gen_fns(path, s, 0) == s);
    CHECK(compose_gen_fns_real(path, 0.7, 0) == 0.7);
}

TEST_CASE("composition over a doubling path is iterated squaring") {
    const auto path = EnvironmentPath::constant(OffspringDistribution::from_pmf({{2, 1.0}}), 4);
    const std::complex<double> s(0.5, 0.3);
    CHECK(std::abs(compose_gen_fns(path, s, 2) - s * s * s * s) < 1e-15);
    CHECK(compose_gen_fns_real(path, 0.9, 3) == doctest::Approx(std::pow(0.9, 8.0)));
}

TEST_CASE("two-step composition applies the outer factor last") {
    // f0(f1(0)) with f0 = 1/4 + 3/4 s^2 and f1 = (1+s)/2
    const auto path = mixed_path();
    CHECK(compose_gen_fns_real(path, 0.0, 2) == doctest::Approx(0.4375).epsilon(1e-15));
}

TEST_CASE("composition satisfies the semigroup identity") {
    const auto path = mixed_path();
    const std::complex<double> s(0.4, 0.5);
    for (std::size_t m : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
        const auto inner = compose_gen_fns(path.shifted(m), s, path.length() - m);
        const auto full = compose_gen_fns(path, s, path.length());
        CHECK(std::abs(compose_gen_fns(path, inner, m) - full) < 1e-14);
    }
}

TEST_CASE("composition equals the generating function of the generation size") {
    const auto path = mixed_path();
    for (std::size_t n = 1; n <= path.length(); ++n) {
        const auto law = generation_law(path, n);
        double mass = 0.0;
        for (double p : law) mass += p;
        REQUIRE(mass == doctest::Approx(1.0).epsilon(1e-12));
        for (const std::complex<double> s :
             {std::complex<double>(0.3, 0.0), std::complex<double>(0.9, 0.0),
              std::complex<double>(0.5, 0.5), std::complex<double>(0.0, 1.0)}) {
            CHECK(std::abs(compose_gen_fns(path, s, n) - eval_pgf(law, s)) < 1e-12);
        }
    }
}

TEST_CASE("composition derivative at one is the running mean product") {
    const auto path = mixed_path();
    const double h = 1e-7;
    for (std::size_t n = 1; n <= path.length(); ++n) {
        const double fd =
            (compose_gen_fns_real(path, 1.0, n) - compose_gen_fns_real(path, 1.0 - h, n)) / h;
        CHECK(fd == doctest::Approx(path.mean_product(n)).epsilon(1e-5));
    }
}

TEST_CASE("composition guards its domain") {
    const auto path = mixed_path();
    CHECK_THROWS_AS(compose_gen_fns_real(path, 1.5, 1), std::domain_error);
    CHECK_THROWS_AS(compose_gen_fns(path, {0.0, 0.0}, 5), std::out_of_range);
    CHECK_NOTHROW(compose_checked(path, {0.3, 0.2}, 4));
}

TEST_CASE("extinction of the quarter-binary law solves the fixed point") {
    // f(q) = q with f = 1/4 + 3/4 s^2 has roots 1/3 and 1
    const auto path =
        EnvironmentPath::constant(OffspringDistribution::binary(0.25, 2), 200);
    const auto r = extinction_probability(path);
    CHECK(r.converged);
    CHECK(r.q == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
    for (std::size_t i = 1; i < r.iterates.size(); ++i) {
        CHECK(r.iterates[i].q_n >= r.iterates[i - 1].q_n);
        CHECK(r.iterates[i].increment ==
              doctest::Approx(r.iterates[i].q_n - r.iterates[i - 1].q_n).epsilon(1e-12));
    }
}

TEST_CASE("deterministic doubling never dies out") {
    const auto path = EnvironmentPath::constant(OffspringDistribution::from_pmf({{2, 1.0}}), 50);
    const auto r = extinction_probability(path);
    CHECK(r.converged);
    CHECK(r.q == 0.0);
    CHECK(r.depth < 50);  // stops after a run of vanishing increments
}

TEST_CASE("zero increments alone do not stop the iteration") {
    // doubling first: q_1 = 0, yet the deeper composition revives the mass
    const auto path = EnvironmentPath::from_states(
        {OffspringDistribution::binary(0.0, 2), OffspringDistribution::binary(0.25, 2)},
        {0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
         1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
         1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
    const auto r = extinction_probability(path);
    CHECK(r.converged);
    // the all-quarter tail settles at 1/3 and the leading doubling squares it
    CHECK(r.q == doctest::Approx(1.0 / 9.0).epsilon(1e-9));
    CHECK(r.iterates.front().q_n == 0.0);
}

TEST_CASE("critical thinning dies out surely") {
    const auto path = EnvironmentPath::constant(
        OffspringDistribution::from_pmf({{0, 0.5}, {1, 0.5}}), 100);
    const auto r = extinction_probability(path);
    // q_n = 1 - 2^-n, increments halve each step
    CHECK(r.converged);
    CHECK(r.q == doctest::Approx(1.0).epsilon(1e-10));

    const auto capped = extinction_probability(path, 1e-12, 5);
    CHECK_FALSE(capped.converged);
    CHECK(capped.depth == 5);
    CHECK(capped.q == doctest::Approx(1.0 - std::pow(2.0, -5.0)).epsilon(1e-12));
}

TEST_CASE("process-level extinction samples a reproducible path") {
    const auto env = EnvironmentProcess::from_json(
        json{{"kind", "iid"},
             {"states", {{{"family", "binary"}, {"p0", 0.25}, {"k", 2}}}}});
    const auto a = extinction_probability(env, 9, 1e-12, 500);
    const auto b = extinction_probability(env, 9, 1e-12, 500);
    CHECK(a.q == b.q);
    CHECK(a.q == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("classification of the deterministic doubling environment") {
    const auto env = EnvironmentProcess::from_json(
        json{{"kind", "iid"},
             {"states", {{{"family", "explicit"}, {"pmf", {{"2", 1.0}}}}}}});
    const auto c = classify(env, 20000, 5);
    CHECK(c.mu == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(c.supercritical);
    // E[m^-1 Z log+ Z] = 2 log 2 / 2
    CHECK(c.kesten_stigum == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(c.kesten_stigum_mc == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(c.nonextin_ok);
    CHECK(c.degenerate_env);
    CHECK(c.nondeg_prob == doctest::Approx(1.0));
    CHECK(c.nonextin_necessary);
}

TEST_CASE("classification of the quarter-binary environment") {
    const auto env = EnvironmentProcess::from_json(
        json{{"kind", "iid"},
             {"states", {{{"family", "binary"}, {"p0", 0.25}, {"k", 2}}}}});
    const auto c = classify(env, 100000, 5);
    CHECK(c.mu == doctest::Approx(std::log(1.5)).epsilon(1e-14));
    CHECK(c.supercritical);
    // 2 log 2 * 0.75 / 1.5 = log 2
    CHECK(c.kesten_stigum == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(std::abs(c.kesten_stigum_mc - c.kesten_stigum) < 0.006);
    CHECK_FALSE(c.degenerate_env);
}

TEST_CASE("classification flags the subcritical and markov cases") {
    const auto sub = EnvironmentProcess::from_json(
        json{{"kind", "iid"},
             {"states", {{{"family", "explicit"}, {"pmf", {{"0", 0.5}, {"1", 0.5}}}}}}});
    const auto cs = classify(sub, 1000, 5);
    CHECK_FALSE(cs.supercritical);
    CHECK(cs.kesten_stigum == 0.0);

    const auto mk = EnvironmentProcess::from_json(
        json{{"kind", "markov"},
             {"states",
              {{{"family", "binary"}, {"p0", 0.25}, {"k", 2}},
               {{"family", "explicit"}, {"pmf", {{"1", 0.5}, {"3", 0.5}}}}}},
             {"transition", {{0.7, 0.3}, {0.4, 0.6}}},
             {"initial", {4.0 / 7.0, 3.0 / 7.0}}});
    const auto cm = classify(mk, 1000, 5);
    CHECK(cm.supercritical);
    CHECK_FALSE(cm.nonextin_necessary);
}
