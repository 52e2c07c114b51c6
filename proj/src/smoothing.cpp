#include "bprelab/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bprelab/numeric.hpp"

namespace bprelab {

void SmoothingSpec::validate() const {
    if (outcomes.empty()) throw std::invalid_argument("smoothing: no outcomes");
    double total = 0.0;
    for (const auto& o : outcomes) {
        if (!(o.prob >= 0.0)) throw std::invalid_argument("smoothing: negative probability");
        total += o.prob;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("smoothing: outcome probabilities sum to " + format17(total));
}

double SmoothingSpec::expected_count() const {
    double e = 0.0;
    for (const auto& o : outcomes) e += o.prob * static_cast<double>(o.t.size());
    return e;
}

double SmoothingSpec::expected_t_sum() const {
    double e = 0.0;
    for (const auto& o : outcomes) {
        double s = 0.0;
        for (double v : o.t) s += v;
        e += o.prob * s;
    }
    return e;
}

double SmoothingSpec::expected_c() const {
    double e = 0.0;
    for (const auto& o : outcomes) e += o.prob * o.c;
    return e;
}

bool SmoothingSpec::is_affine() const {
    return std::all_of(outcomes.begin(), outcomes.end(),
                       [](const SmoothingOutcome& o) { return o.t.size() == 1; });
}

std::vector<double> smoothing_iterate(
    const SmoothingSpec& spec, std::vector<double> sample, std::size_t iterations,
    std::uint64_t seed,
    const std::function<void(std::size_t, std::span<const double>)>& observer) {
    spec.validate();
    if (sample.empty()) throw std::invalid_argument("smoothing: empty initial sample");
    if (iterations == 0) throw std::invalid_argument("smoothing: need at least one iteration");

    auto stream = make_stream(seed, StreamDomain::smoothing, 0);
    const std::size_t n = sample.size();
    std::vector<double> next(n);

    std::vector<double> cdf(spec.outcomes.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < spec.outcomes.size(); ++i) {
        acc += spec.outcomes[i].prob;
        cdf[i] = acc;
    }

    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            const double u = stream.uniform01();
            std::size_t oi = spec.outcomes.size() - 1;
            for (std::size_t c = 0; c + 1 < spec.outcomes.size(); ++c) {
                if (u < cdf[c]) {
                    oi = c;
                    break;
                }
            }
            const auto& o = spec.outcomes[oi];
            double y = o.c;
            for (double tj : o.t) y += tj * sample[stream.below(n)];
            next[i] = y;
        }
        sample.swap(next);
        if (observer) observer(it + 1, sample);
    }
    return sample;
}

int bernoulli_required_depth(double lambda, double t_max, double tol) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("bernoulli: lambda outside (0,1)");
    if (!(t_max > 0.0)) throw std::invalid_argument("bernoulli: t_max must be positive");
    int k = 0;
    double scale = t_max;
    while (scale >= tol) {
        scale *= lambda;
        ++k;
        if (k > 100000) throw std::invalid_argument("bernoulli: depth search diverged");
    }
    return k;
}

double bernoulli_charfn(double lambda, double t, int K) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("bernoulli: lambda outside (0,1)");
    if (K < 0) throw std::invalid_argument("bernoulli: negative truncation");
    if (std::pow(lambda, K) * std::abs(t) >= 1e-8)
        throw std::invalid_argument("bernoulli: truncation K=" + std::to_string(K) +
                                    " insufficient for t=" + format17(t));
    double prod = 1.0;
    double scale = 1.0;
    for (int k = 0; k <= K; ++k) {
        prod *= std::cos(scale * t);
        scale *= lambda;
    }
    return prod;
}

BernoulliMeasure BernoulliMeasure::make(double lambda, int depth) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("bernoulli: lambda outside (0,1)");
    if (depth < 0 || depth > 24)
        throw std::invalid_argument("bernoulli: depth outside [0,24]");
    BernoulliMeasure m;
    m.lambda = lambda;
    m.depth = 0;
    m.locations = {0.0};
    m.weights = {1.0};
    for (int d = 0; d < depth; ++d) m = m.affine_step();
    return m;
}

BernoulliMeasure BernoulliMeasure::affine_step() const {
    BernoulliMeasure next;
    next.lambda = lambda;
    next.depth = depth + 1;
    next.locations.reserve(2 * locations.size());
    next.weights.reserve(2 * locations.size());
    for (double sign : {-1.0, 1.0})
        for (std::size_t i = 0; i < locations.size(); ++i) {
            next.locations.push_back(sign + lambda * locations[i]);
            next.weights.push_back(0.5 * weights[i]);
        }
    // merge exact duplicates (lambda = 1/2 collapses the dyadic grid)
    std::vector<std::size_t> order(next.locations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return next.locations[a] < next.locations[b];
    });
    std::vector<double> locs, ws;
    for (std::size_t i : order) {
        if (!locs.empty() && next.locations[i] == locs.back()) {
            ws.back() += next.weights[i];
        } else {
            locs.push_back(next.locations[i]);
            ws.push_back(next.weights[i]);
        }
    }
    next.locations = std::move(locs);
    next.weights = std::move(ws);
    return next;
}

double BernoulliMeasure::charfn(double t) const {
    double prod = 1.0;
    double scale = 1.0;
    for (int k = 0; k < depth; ++k) {
        prod *= std::cos(scale * t);
        scale *= lambda;
    }
    return prod;
}

double BernoulliMeasure::total_weight() const {
    return pairwise_sum(weights);
}

DecayReport decay_report(const std::function<double(double)>& charfn, double t_max,
                         std::size_t points_per_window) {
    if (!(t_max > 2.0)) throw std::invalid_argument("decay_report: t_max must exceed 2");
    if (points_per_window < 2) throw std::invalid_argument("decay_report: too few points");

    DecayReport rep;
    for (double lo = 1.0; lo < t_max; lo *= 2.0) {
        const double hi = std::min(2.0 * lo, t_max);
        DecayWindow win{lo, hi, 0.0};
        for (std::size_t i = 0; i <= points_per_window; ++i) {
            const double t = lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(points_per_window);
            win.sup = std::max(win.sup, std::abs(charfn(t)));
        }
        rep.windows.push_back(win);
        if (hi >= t_max) break;
    }
    for (std::size_t i = 1; i < rep.windows.size(); ++i)
        if (rep.windows[i].sup > rep.windows[i - 1].sup) rep.nonincreasing = false;
    if (!rep.windows.empty() && rep.windows.front().sup > 0.0)
        rep.last_over_first = rep.windows.back().sup / rep.windows.front().sup;
    return rep;
}

}  // namespace bprelab
