#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bprelab/rng.hpp"

namespace bprelab {

//! Finite-support law of (C, T_1..T_N): one outcome per row, each with its
//! probability, additive constant and multiplier list (N = list length).
struct SmoothingOutcome {
    double prob = 0.0;
    double c = 0.0;
    std::vector<double> t;
};

struct SmoothingSpec {
    std::vector<SmoothingOutcome> outcomes;

    void validate() const;
    double expected_count() const;   // E N
    double expected_t_sum() const;   // E[sum_j T_j], drives the mean map
    double expected_c() const;
    // affine = exactly one multiplier in every outcome; otherwise smoothing
    bool is_affine() const;
};

// One iteration maps the particle population through Y' = sum_j T_j Y_{I_j} + C
// with fresh outcome draws and uniformly resampled indices; sample size is
// preserved. Optional observer sees each completed iteration.
std::vector<double> smoothing_iterate(
    const SmoothingSpec& spec, std::vector<double> sample, std::size_t iterations,
    std::uint64_t seed,
    const std::function<void(std::size_t, std::span<const double>)>& observer = nullptr);

// Self-similar product form Prod_{k=0..K} cos(lambda^k t); requires K deep
// enough that lambda^K * |t| < 1e-8.
double bernoulli_charfn(double lambda, double t, int K);
int bernoulli_required_depth(double lambda, double t_max, double tol = 1e-8);

//! Exact finite-depth sign measure: atoms at sum_{k<depth} (+-) lambda^k with
//! equal weights, duplicates merged. Its charfn is the depth-term product.
struct BernoulliMeasure {
    double lambda = 0.0;
    int depth = 0;
    std::vector<double> locations;
    std::vector<double> weights;

    static BernoulliMeasure make(double lambda, int depth);
    // depth d -> depth d+1 via the affine map (+-1) + lambda * (previous)
    BernoulliMeasure affine_step() const;
    double charfn(double t) const;  // exact for this finite measure
    double total_weight() const;
};

struct DecayWindow {
    double lo = 0.0;
    double hi = 0.0;
    double sup = 0.0;
};

struct DecayReport {
    std::vector<DecayWindow> windows;  // dyadic partition of [1, t_max]
    bool nonincreasing = true;         // window sups never increase
    double last_over_first = 0.0;
};

// Samples |charfn| densely over dyadic windows [2^k, 2^(k+1)] covering
// [1, t_max]; points_per_window uniform samples plus both endpoints.
DecayReport decay_report(const std::function<double(double)>& charfn, double t_max,
                         std::size_t points_per_window = 4096);

}  // namespace bprelab
