#include "bprelab/branching.hpp"

#include <cmath>
#include <stdexcept>

#include "bprelab/numeric.hpp"

namespace bprelab {

std::complex<double> compose_gen_fns(const EnvironmentPath& path, std::complex<double> s,
                                     std::size_t depth) {
    if (depth > path.length())
        throw std::out_of_range("compose: depth exceeds path length");
    if (std::abs(s) > 1.0 + 1e-12) throw std::domain_error("compose: |s| exceeds 1");
    for (std::size_t k = depth; k-- > 0;) {
        s = path.dist(k).gen_fn(s, 0);
        // squaring-type factors amplify any rounding above the unit circle
        // exponentially over the composition; project back onto the disk
        const double n2 = std::norm(s);
        if (n2 > 1.0) s /= std::sqrt(n2);
    }
    return s;
}

double compose_gen_fns_real(const EnvironmentPath& path, double s, std::size_t depth) {
    if (depth > path.length())
        throw std::out_of_range("compose: depth exceeds path length");
    if (std::abs(s) > 1.0 + 1e-12) throw std::domain_error("compose: |s| exceeds 1");
    for (std::size_t k = depth; k-- > 0;) s = path.dist(k).gen_fn_real(s, 0);
    return s;
}

CompositionResult compose_checked(const EnvironmentPath& path, std::complex<double> s,
                                  std::size_t depth) {
    CompositionResult r;
    r.value = compose_gen_fns(path, s, depth);
    r.depth = depth;
    r.path = &path;
    if (std::abs(r.value) > 1.0 + 1e-10)
        throw std::runtime_error("compose: modulus bound violated");
    return r;
}

ExtinctionResult extinction_probability(const EnvironmentPath& path, double tol,
                                        std::size_t max_depth) {
    if (!(tol > 0.0)) throw std::invalid_argument("extinction: tol must be positive");
    const std::size_t cap = std::min(max_depth, path.length());

    ExtinctionResult out;
    out.iterates.reserve(std::min<std::size_t>(cap, 1024));
    double prev = 0.0;  // q_0 = F_0(0) = 0
    std::size_t quiet = 0;
    for (std::size_t n = 1; n <= cap; ++n) {
        // q_n recomputed from scratch: general paths admit no incremental
        // update because the new factor sits innermost
        const double q_n = compose_gen_fns_real(path, 0.0, n);
        const double inc = q_n - prev;
        out.iterates.push_back({n, q_n, inc});
        out.q = q_n;
        out.depth = n;
        prev = q_n;
        // a state with no mass at zero contributes a structurally zero
        // increment (f(0) = 0), so one quiet step proves nothing; require a
        // run long enough that a later jump is out of the question
        if (inc < tol) {
            if (++quiet >= 16) {
                out.converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    return out;
}

ExtinctionResult extinction_probability(const EnvironmentProcess& proc, std::uint64_t seed,
                                        double tol, std::size_t max_depth) {
    const auto path = sample_path(proc, max_depth, seed);
    return extinction_probability(path, tol, max_depth);
}

Classification classify(const EnvironmentProcess& proc, std::size_t ks_samples,
                        std::uint64_t seed) {
    Classification out;
    const auto drift = drift_estimate(proc);
    out.mu = drift.mu;
    out.supercritical = drift.mu > 0.0;
    out.nonextin_ok = drift.nonextin_ok;
    out.nondeg_prob = drift.nondeg_prob;
    out.nonextin_necessary = proc.kind() == EnvironmentProcess::Kind::iid;

    // E[m_0^{-1} Z_1 log+ Z_1] with Z_0 = 1: Z_1 has the offspring law, so
    // this is an exact double sum over the stationary-charged supports
    double ks = 0.0;
    bool all_point_masses = true;
    for (std::size_t i = 0; i < proc.state_count(); ++i) {
        const double pi = proc.stationary()[i];
        if (pi <= 0.0) continue;
        const auto& d = proc.state(i);
        if (!d.degenerate()) all_point_masses = false;
        double acc = 0.0;
        const auto ks_sup = d.support();
        const auto ks_prob = d.probabilities();
        for (std::size_t j = 0; j < ks_sup.size(); ++j) {
            const double k = ks_sup[j];
            if (k > 1.0) acc += k * std::log(k) * ks_prob[j];
        }
        ks += d.mean() > 0.0 ? pi * acc / d.mean()
                             : 0.0;  // m=0 states contribute Z_1=0 a.s.
    }
    out.kesten_stigum = ks;
    out.degenerate_env = all_point_masses;

    // Monte Carlo cross-check of the same expectation
    if (ks_samples > 0) {
        auto stream = make_stream(seed, StreamDomain::generic, 0);
        std::vector<AliasTable> alias;
        alias.reserve(proc.state_count());
        for (std::size_t i = 0; i < proc.state_count(); ++i)
            alias.emplace_back(proc.state(i).probabilities());
        std::vector<double> terms(ks_samples);
        for (std::size_t r = 0; r < ks_samples; ++r) {
            const double u = stream.uniform01();
            double acc = 0.0;
            std::size_t i = proc.state_count() - 1;
            for (std::size_t c = 0; c + 1 < proc.state_count(); ++c) {
                acc += proc.stationary()[c];
                if (u < acc) {
                    i = c;
                    break;
                }
            }
            const auto& d = proc.state(i);
            const double z = d.support()[alias[i].sample(stream)];
            terms[r] = (z > 1.0 && d.mean() > 0.0) ? z * std::log(z) / d.mean() : 0.0;
        }
        out.kesten_stigum_mc = pairwise_sum(terms) / static_cast<double>(ks_samples);
    }
    return out;
}

}  // namespace bprelab
