#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "bprelab/environment.hpp"

namespace bprelab {

//! Value of the depth-n composition of generating functions along a path,
//! innermost factor last: depth 0 is the identity.
struct CompositionResult {
    std::complex<double> value;
    std::size_t depth = 0;
    const EnvironmentPath* path = nullptr;
};

// F_n(s) = f_0(f_1(...f_{n-1}(s))). Requires |s| <= 1 + 1e-12 and
// depth <= path length; |result| <= 1 up to rounding.
std::complex<double> compose_gen_fns(const EnvironmentPath& path, std::complex<double> s,
                                     std::size_t depth);
double compose_gen_fns_real(const EnvironmentPath& path, double s, std::size_t depth);

CompositionResult compose_checked(const EnvironmentPath& path, std::complex<double> s,
                                  std::size_t depth);

struct ExtinctionIterate {
    std::size_t n;
    double q_n;
    double increment;
};

struct ExtinctionResult {
    double q = 0.0;
    bool converged = false;
    std::size_t depth = 0;
    std::vector<ExtinctionIterate> iterates;
};

// q_n = F_n(0), monotone nondecreasing; stops once the increment stays
// below tol for a run of depths (single increments vanish structurally
// whenever a state puts no mass at zero) or depth hits max_depth (then
// converged=false). The path overload is capped by the path length.
ExtinctionResult extinction_probability(const EnvironmentPath& path, double tol = 1e-12,
                                        std::size_t max_depth = 10000);

// Samples its own path of length max_depth from a fixed sub-seed, so the
// quenched q refers to a reproducible environment realization.
ExtinctionResult extinction_probability(const EnvironmentProcess& proc, std::uint64_t seed,
                                        double tol = 1e-12, std::size_t max_depth = 10000);

struct Classification {
    double mu = 0.0;
    bool supercritical = false;
    double kesten_stigum = 0.0;      // E[m_0^{-1} Z_1 log+ Z_1], exact finite sum
    double kesten_stigum_mc = 0.0;   // simulation cross-check of the same quantity
    bool nonextin_ok = false;
    bool degenerate_env = false;     // every charged state is a point mass
    double nondeg_prob = 0.0;
    // the positivity check is necessary and sufficient for iid generators
    // but only sufficient for markov ones; reported verbatim in artifacts
    bool nonextin_necessary = false;
};

Classification classify(const EnvironmentProcess& proc, std::size_t ks_samples,
                        std::uint64_t seed);

}  // namespace bprelab
