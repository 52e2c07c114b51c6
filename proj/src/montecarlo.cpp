#include "bprelab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bprelab/numeric.hpp"
#include "bprelab/parallel.hpp"

namespace bprelab {

Trajectory simulate_population(const EnvironmentPath& path, std::uint64_t z0,
                               std::size_t horizon, SplitMix64& stream) {
    if (z0 == 0) throw std::invalid_argument("simulate: z0 must be at least 1");
    if (horizon > path.length())
        throw std::out_of_range("simulate: horizon exceeds path length");

    Trajectory out;
    out.sizes.reserve(horizon + 1);
    out.normalized.reserve(horizon + 1);
    out.sizes.push_back(z0);
    out.normalized.push_back(static_cast<double>(z0));

    std::uint64_t z = z0;
    for (std::size_t k = 0; k < horizon; ++k) {
        bool overflow = false;
        z = path.dist(k).branch_sum(stream, z, overflow);
        if (overflow) {
            out.overflow = true;  // truncated before the corrupted entry
            return out;
        }
        out.sizes.push_back(z);
        // a zero mean forces z = 0; report 0 rather than 0/0
        const double mk = path.mean_product(k + 1);
        out.normalized.push_back(mk > 0.0 ? static_cast<double>(z) / mk : 0.0);
        if (z == 0) {
            if (out.extinct_at < 0) out.extinct_at = static_cast<std::ptrdiff_t>(k + 1);
            // remaining generations are identically zero
            for (std::size_t j = k + 1; j < horizon; ++j) {
                out.sizes.push_back(0);
                out.normalized.push_back(0.0);
            }
            break;
        }
    }
    return out;
}

MartingaleSample simulate_martingale(const EnvironmentPath& path, std::size_t replicas,
                                     std::size_t horizon, std::uint64_t master_seed,
                                     int threads) {
    if (replicas == 0) throw std::invalid_argument("simulate: need at least one replica");
    if (horizon > path.length())
        throw std::out_of_range("simulate: horizon exceeds path length");

    MartingaleSample out;
    out.values.resize(replicas);
    out.extinct_at.assign(replicas, -1);
    out.horizon = horizon;
    out.master_seed = master_seed;

    std::vector<std::uint8_t> overflowed(replicas, 0);
    parallel_for(replicas, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            auto stream = make_stream(master_seed, StreamDomain::replica, r);
            const auto traj = simulate_population(path, 1, horizon, stream);
            overflowed[r] = traj.overflow ? 1 : 0;
            if (traj.overflow) {
                out.values[r] = traj.normalized.back();
                continue;
            }
            out.values[r] = traj.normalized[horizon];
            if (traj.extinct_at >= 0)
                out.extinct_at[r] = static_cast<std::int32_t>(traj.extinct_at);
        }
    });
    out.overflow_count = static_cast<std::size_t>(
        std::count(overflowed.begin(), overflowed.end(), std::uint8_t{1}));
    return out;
}

SampleMoments atom_and_moments(const MartingaleSample& sample) {
    const std::size_t n = sample.values.size();
    if (n == 0) throw std::invalid_argument("moments: empty sample");
    SampleMoments m;
    m.count = n;
    const double dn = static_cast<double>(n);

    std::size_t extinct = 0;
    for (auto e : sample.extinct_at)
        if (e >= 0) ++extinct;
    m.atom = static_cast<double>(extinct) / dn;
    m.se_atom = std::sqrt(std::max(0.0, m.atom * (1.0 - m.atom)) / dn);

    m.mean = pairwise_sum(sample.values) / dn;

    std::vector<double> pows(n);
    for (std::size_t i = 0; i < n; ++i) pows[i] = sqr(sample.values[i] - m.mean);
    m.var = pairwise_sum(pows) / dn;
    const double var = m.var;
    for (std::size_t i = 0; i < n; ++i) pows[i] = sqr(pows[i]);  // (x-mean)^4
    const double m4 = pairwise_sum(pows) / dn;
    m.se_mean = std::sqrt(var / dn);
    m.se_var = std::sqrt(std::max(0.0, m4 - var * var) / dn);

    m.c = 0.125 * std::min(1.0, var);

    // truncation level from disjoint consecutive pairs d_i = x_{2i} - x_{2i+1}:
    // smallest integer n with mean(d^2; |d| <= n) >= 8c
    const std::size_t pairs = n / 2;
    if (pairs > 0) {
        std::vector<double> absd(pairs);
        for (std::size_t i = 0; i < pairs; ++i)
            absd[i] = std::abs(sample.values[2 * i] - sample.values[2 * i + 1]);
        std::sort(absd.begin(), absd.end());
        std::vector<double> prefix(pairs);
        double acc = 0.0;  // sequential prefix; order fixed by the sort
        for (std::size_t i = 0; i < pairs; ++i) {
            acc += sqr(absd[i]);
            prefix[i] = acc;
        }
        const double target = 8.0 * m.c;
        std::uint64_t level = 1;
        const auto max_level = static_cast<std::uint64_t>(std::ceil(absd.back())) + 1;
        while (level < max_level) {
            const auto idx = static_cast<std::size_t>(
                std::upper_bound(absd.begin(), absd.end(), static_cast<double>(level)) -
                absd.begin());
            const double trimmed = idx > 0 ? prefix[idx - 1] / static_cast<double>(pairs) : 0.0;
            if (trimmed >= target) break;
            ++level;
        }
        m.trunc_n = level;
    }
    return m;
}

}  // namespace bprelab
