#include "bprelab/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bprelab/numeric.hpp"

namespace bprelab {

namespace {

// z parents at or below this count are sampled individually; above it the
// generation total is drawn category by category.
constexpr std::uint64_t kPerParentLimit = 64;

constexpr std::uint64_t kSaturate = std::numeric_limits<std::int64_t>::max();

std::uint64_t saturating_term(std::uint64_t a, std::uint64_t b, bool& overflow) {
    unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    if (p > kSaturate) {
        overflow = true;
        return kSaturate;
    }
    return static_cast<std::uint64_t>(p);
}

}  // namespace

OffspringDistribution::OffspringDistribution(std::vector<std::uint32_t> support,
                                             std::vector<double> prob, std::string label)
    : support_(std::move(support)), prob_(std::move(prob)), label_(std::move(label)) {
    if (support_.empty() || support_.size() != prob_.size())
        throw std::invalid_argument("offspring: empty or inconsistent pmf");
    for (std::size_t i = 0; i + 1 < support_.size(); ++i)
        if (support_[i] >= support_[i + 1])
            throw std::invalid_argument("offspring: support must be strictly increasing");
    if (support_.back() >= kMaxSupport)
        throw std::invalid_argument("offspring: support exceeds dense limit");

    double total = 0.0;
    for (double p : prob_) {
        if (!(p >= 0.0) || p > 1.0 + 1e-15)
            throw std::invalid_argument("offspring: probability outside [0,1]");
        total += p;
    }
    if (std::abs(total - 1.0) > kPmfEps)
        throw std::invalid_argument("offspring: pmf mass " + format17(total) +
                                    " not within tolerance of 1");
    // remove the residual rounding so downstream identities hold exactly
    for (double& p : prob_) p /= total;

    coeff_.assign(support_.back() + 1, 0.0);
    for (std::size_t i = 0; i < support_.size(); ++i) coeff_[support_[i]] = prob_[i];

    double m = 0.0, sff = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) {
        const double k = support_[i];
        m += k * prob_[i];
        m2 += k * k * prob_[i];
        sff += k * (k - 1.0) * prob_[i];
    }
    mean_ = m;
    second_factorial_ = sff;
    variance_ = std::max(0.0, m2 - m * m);
    p0_ = coeff_[0];
    degenerate_ = std::any_of(prob_.begin(), prob_.end(),
                              [](double p) { return p >= 1.0 - kPmfEps; });
    alias_ = AliasTable(prob_);
}

OffspringDistribution OffspringDistribution::from_pmf(
    const std::map<std::uint32_t, double>& pmf) {
    std::vector<std::uint32_t> support;
    std::vector<double> prob;
    for (const auto& [k, p] : pmf) {
        if (p == 0.0) continue;
        support.push_back(k);
        prob.push_back(p);
    }
    return OffspringDistribution(std::move(support), std::move(prob), "explicit");
}

OffspringDistribution OffspringDistribution::binary(double p0, std::uint32_t k) {
    if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("binary: p0 outside [0,1]");
    if (k == 0) throw std::invalid_argument("binary: k must be positive");
    std::map<std::uint32_t, double> pmf;
    if (p0 > 0.0) pmf[0] = p0;
    if (p0 < 1.0) pmf[k] = 1.0 - p0;
    auto d = from_pmf(pmf);
    d.label_ = "binary(p0=" + format17(p0) + ",k=" + std::to_string(k) + ")";
    return d;
}

OffspringDistribution OffspringDistribution::geometric(double p, double eps) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("geometric: p outside (0,1)");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("geometric: bad eps");
    // tail mass beyond K is p^(K+1)
    std::vector<std::uint32_t> support;
    std::vector<double> prob;
    double tail = 1.0;
    std::uint32_t k = 0;
    while (tail > eps) {
        support.push_back(k);
        prob.push_back((1.0 - p) * std::pow(p, static_cast<double>(k)));
        tail *= p;
        if (++k >= kMaxSupport)
            throw std::invalid_argument("geometric: truncation did not reach eps");
    }
    const double mass = 1.0 - tail;
    for (double& q : prob) q /= mass;
    OffspringDistribution d(std::move(support), std::move(prob), "");
    d.label_ = "geometric(p=" + format17(p) + ")";
    return d;
}

OffspringDistribution OffspringDistribution::poisson(double lambda, double eps) {
    if (!(lambda > 0.0)) throw std::invalid_argument("poisson: lambda must be positive");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("poisson: bad eps");
    std::vector<std::uint32_t> support;
    std::vector<double> prob;
    double term = std::exp(-lambda);
    double cum = 0.0;
    std::uint32_t k = 0;
    // past the mode the terms decay faster than geometrically, so stopping
    // once cum >= 1-eps and k > lambda truncates at most eps of mass
    while (cum < 1.0 - eps || static_cast<double>(k) <= lambda) {
        support.push_back(k);
        prob.push_back(term);
        cum += term;
        ++k;
        if (k >= kMaxSupport)
            throw std::invalid_argument("poisson: truncation did not reach eps");
        term *= lambda / static_cast<double>(k);
    }
    for (double& q : prob) q /= cum;
    OffspringDistribution d(std::move(support), std::move(prob), "");
    d.label_ = "poisson(lambda=" + format17(lambda) + ")";
    return d;
}

double OffspringDistribution::mass(std::uint32_t k) const {
    return k < coeff_.size() ? coeff_[k] : 0.0;
}

std::complex<double> OffspringDistribution::gen_fn(std::complex<double> s, int order) const {
    if (order < 0 || order > 2) throw std::invalid_argument("gen_fn: order must be 0, 1 or 2");
    if (std::abs(s) > 1.0 + 1e-12)
        throw std::domain_error("gen_fn: |s| exceeds 1");
    const auto n = static_cast<std::ptrdiff_t>(coeff_.size());
    std::complex<double> acc = 0.0;
    switch (order) {
        case 0:
            for (std::ptrdiff_t k = n - 1; k >= 0; --k) acc = acc * s + coeff_[k];
            break;
        case 1:
            for (std::ptrdiff_t k = n - 1; k >= 1; --k)
                acc = acc * s + static_cast<double>(k) * coeff_[k];
            break;
        case 2:
            for (std::ptrdiff_t k = n - 1; k >= 2; --k)
                acc = acc * s + static_cast<double>(k) * static_cast<double>(k - 1) * coeff_[k];
            break;
    }
    return acc;
}

double OffspringDistribution::gen_fn_real(double s, int order) const {
    if (order < 0 || order > 2) throw std::invalid_argument("gen_fn: order must be 0, 1 or 2");
    if (std::abs(s) > 1.0 + 1e-12)
        throw std::domain_error("gen_fn: |s| exceeds 1");
    const auto n = static_cast<std::ptrdiff_t>(coeff_.size());
    double acc = 0.0;
    switch (order) {
        case 0:
            for (std::ptrdiff_t k = n - 1; k >= 0; --k) acc = acc * s + coeff_[k];
            break;
        case 1:
            for (std::ptrdiff_t k = n - 1; k >= 1; --k)
                acc = acc * s + static_cast<double>(k) * coeff_[k];
            break;
        case 2:
            for (std::ptrdiff_t k = n - 1; k >= 2; --k)
                acc = acc * s + static_cast<double>(k) * static_cast<double>(k - 1) * coeff_[k];
            break;
    }
    return acc;
}

std::uint64_t OffspringDistribution::branch_sum(SplitMix64& rng, std::uint64_t z,
                                                bool& overflow) const {
    if (z == 0) return 0;

    if (support_.size() == 1) {  // deterministic litter size
        return saturating_term(z, support_[0], overflow);
    }

    if (z <= kPerParentLimit) {
        std::uint64_t sum = 0;
        for (std::uint64_t i = 0; i < z; ++i) sum += support_[alias_.sample(rng)];
        return sum;  // z * max_support fits comfortably here
    }

    // Multinomial via the conditional-binomial chain: category counts are
    // drawn in support order, each binomial conditioned on the remainder.
    std::uint64_t remaining = z;
    double tail = 1.0;
    unsigned __int128 sum = 0;
    for (std::size_t i = 0; i < support_.size() && remaining > 0; ++i) {
        std::uint64_t count;
        if (i + 1 == support_.size() || tail <= prob_[i]) {
            count = remaining;
        } else {
            const double pc = std::clamp(prob_[i] / tail, 0.0, 1.0);
            count = binomial_draw(rng, remaining, pc);
        }
        sum += static_cast<unsigned __int128>(count) * support_[i];
        remaining -= count;
        tail -= prob_[i];
    }
    if (sum > kSaturate) {
        overflow = true;
        return kSaturate;
    }
    return static_cast<std::uint64_t>(sum);
}

}  // namespace bprelab
