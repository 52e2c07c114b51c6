#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bprelab/rng.hpp"

namespace bprelab {

// Probability mass below this threshold is truncated away when a parametric
// family is materialized; the remaining pmf is renormalized to sum to one.
inline constexpr double kPmfEps = 1e-12;

// Largest dense support accepted before a family is rejected as too wide.
inline constexpr std::size_t kMaxSupport = 65536;

//! Finite offspring law on {0,1,...,K}.
//!
//! Stores the pmf together with dense coefficient arrays for the probability
//! generating function and its first two derivatives, plus an alias table for
//! O(1) sampling. Immutable after construction; all invariants (probabilities
//! in [0,1], total mass within kPmfEps of 1, strictly increasing support) are
//! enforced by the factories.
class OffspringDistribution {
public:
    static OffspringDistribution from_pmf(const std::map<std::uint32_t, double>& pmf);
    // {0: p0, k: 1-p0}
    static OffspringDistribution binary(double p0, std::uint32_t k);
    // P(X=k) = (1-p) p^k, truncated where the tail drops below eps
    static OffspringDistribution geometric(double p, double eps = kPmfEps);
    static OffspringDistribution poisson(double lambda, double eps = kPmfEps);

    // Generating function sum_k p_k s^k (order 0) or its first/second
    // derivative (order 1/2), by Horner on the dense coefficients.
    // Requires |s| <= 1 + 1e-12.
    std::complex<double> gen_fn(std::complex<double> s, int order = 0) const;
    double gen_fn_real(double s, int order = 0) const;

    // Total offspring of z parents in one step; exact in law. Small z uses
    // per-parent alias draws, large z a conditional-binomial multinomial.
    // Saturates at 2^63-1 and sets `overflow` instead of wrapping.
    std::uint64_t branch_sum(SplitMix64& rng, std::uint64_t z, bool& overflow) const;

    double mean() const { return mean_; }
    double variance() const { return variance_; }
    // E[X(X-1)] = f''(1)
    double second_factorial_moment() const { return second_factorial_; }
    double p0() const { return p0_; }
    bool degenerate() const { return degenerate_; }
    std::uint32_t max_support() const { return support_.back(); }

    std::span<const std::uint32_t> support() const { return support_; }
    std::span<const double> probabilities() const { return prob_; }

    // mass(k) = P(X = k); zero off support
    double mass(std::uint32_t k) const;

    const std::string& label() const { return label_; }

private:
    OffspringDistribution(std::vector<std::uint32_t> support, std::vector<double> prob,
                          std::string label);

    std::vector<std::uint32_t> support_;  // strictly increasing
    std::vector<double> prob_;            // aligned with support_
    std::vector<double> coeff_;           // dense pgf coefficients, index = k
    double mean_ = 0.0;
    double variance_ = 0.0;
    double second_factorial_ = 0.0;
    double p0_ = 0.0;
    bool degenerate_ = false;
    std::string label_;
    AliasTable alias_;
};

}  // namespace bprelab
