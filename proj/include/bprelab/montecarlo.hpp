#pragma once

#include <cstdint>
#include <vector>

#include "bprelab/environment.hpp"
#include "bprelab/rng.hpp"

namespace bprelab {

//! One realized population history. sizes[k] = Z_k, normalized[k] = Z_k/M_k.
//! Once extinct the history is all zeros; on saturation it is truncated at
//! the offending generation and flagged.
struct Trajectory {
    std::vector<std::uint64_t> sizes;
    std::vector<double> normalized;
    std::ptrdiff_t extinct_at = -1;  // first k with Z_k = 0, or -1
    bool overflow = false;
};

Trajectory simulate_population(const EnvironmentPath& path, std::uint64_t z0,
                               std::size_t horizon, SplitMix64& stream);

//! Terminal normalized population over independent replicas; the Monte Carlo
//! proxy for the martingale limit. extinct_at[r] = -1 for survivors, so the
//! extinct flag is extinct_at >= 0.
struct MartingaleSample {
    std::vector<double> values;
    std::vector<std::int32_t> extinct_at;
    std::size_t horizon = 0;
    std::uint64_t master_seed = 0;
    std::size_t overflow_count = 0;
};

// Replica r uses the stream derived from (master_seed, replica, r); output
// is identical for any thread count.
MartingaleSample simulate_martingale(const EnvironmentPath& path, std::size_t replicas,
                                     std::size_t horizon, std::uint64_t master_seed,
                                     int threads = 0);

struct SampleMoments {
    double atom = 0.0;   // extinct fraction = empirical mass at 0
    double mean = 0.0;
    double var = 0.0;
    double c = 0.0;      // (1/8) min(1, var)
    std::uint64_t trunc_n = 0;  // smallest n with E[(W-W')^2; |W-W'| <= n] >= 8c
    double se_mean = 0.0;
    double se_atom = 0.0;
    double se_var = 0.0;
    std::size_t count = 0;
};

// Zeros are part of the law and enter every moment; the truncation level is
// estimated from disjoint consecutive pairs.
SampleMoments atom_and_moments(const MartingaleSample& sample);

}  // namespace bprelab
