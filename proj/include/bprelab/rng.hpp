#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace bprelab {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer (Vigna). Also used to hash stream identities.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Counter-based generator: state advances by the golden ratio, output is the
// mixed counter. Satisfies UniformRandomBitGenerator, so it plugs into the
// standard distributions.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

    result_type operator()() { return mix64(state_ += kGolden); }

    // uniform in [0,1) with 53 random bits
    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // unbiased integer in [0,n); Lemire multiply-shift with rejection
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("below: n must be positive");
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t t = -n % n;
            while (lo < t) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    std::uint64_t state_;
};

// Disjoint stream families. Every consumer derives its stream from
// (master, domain, counter); replicas and path sampling never share draws,
// which is what makes thread-count-independent output possible.
enum class StreamDomain : std::uint64_t {
    path = 1,
    replica = 2,
    smoothing = 3,
    generic = 4,
};

inline std::uint64_t derive_stream(std::uint64_t master, StreamDomain domain,
                                   std::uint64_t counter) {
    const std::uint64_t key =
        mix64(static_cast<std::uint64_t>(domain) * kGolden + counter + 1);
    return mix64(mix64(master) ^ key);
}

inline SplitMix64 make_stream(std::uint64_t master, StreamDomain domain,
                              std::uint64_t counter) {
    return SplitMix64(derive_stream(master, domain, counter));
}

// Walker/Vose alias table for O(1) sampling from a fixed finite pmf.
class AliasTable {
public:
    AliasTable() = default;

    explicit AliasTable(std::span<const double> weights) {
        const std::size_t n = weights.size();
        if (n == 0) throw std::invalid_argument("AliasTable: empty weight vector");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("AliasTable: negative weight");
            total += w;
        }
        if (!(total > 0.0)) throw std::invalid_argument("AliasTable: zero total weight");

        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i) scaled[i] = weights[i] * n / total;

        std::vector<std::uint32_t> small, large;
        for (std::size_t i = 0; i < n; ++i)
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));

        while (!small.empty() && !large.empty()) {
            const std::uint32_t s = small.back();
            const std::uint32_t l = large.back();
            small.pop_back();
            large.pop_back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            (scaled[l] < 1.0 ? small : large).push_back(l);
        }
        for (std::uint32_t i : large) prob_[i] = 1.0;
        for (std::uint32_t i : small) prob_[i] = 1.0;  // fp rounding leftovers
    }

    std::uint32_t sample(SplitMix64& rng) const {
        const auto i = static_cast<std::uint32_t>(rng.below(prob_.size()));
        return rng.uniform01() < prob_[i] ? i : alias_[i];
    }

    std::size_t size() const { return prob_.size(); }

private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

// One binomial draw; the distribution object is rebuilt per call so the
// sequence consumed from `rng` depends only on (n, p) and the stream state.
inline std::uint64_t binomial_draw(SplitMix64& rng, std::uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::binomial_distribution<long long> dist(static_cast<long long>(n), p);
    return static_cast<std::uint64_t>(dist(rng));
}

}  // namespace bprelab
