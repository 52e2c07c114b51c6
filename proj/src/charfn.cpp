#include "bprelab/charfn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bprelab/errors.hpp"
#include "bprelab/parallel.hpp"

namespace bprelab {

PsiValue quenched_psi(const EnvironmentPath& path, double t, const PsiOptions& opts) {
    if (!(opts.tail_eps > 0.0))
        throw std::invalid_argument("quenched_psi: tail_eps must be positive");
    if (t == 0.0) return {std::complex<double>(1.0, 0.0), 0};

    const double at = std::abs(t);
    std::size_t depth = path.length() + 1;
    for (std::size_t n = 0; n <= path.length(); ++n) {
        if (at <= opts.tail_eps * path.mean_product(n)) {
            depth = n;
            break;
        }
    }
    if (depth > path.length())
        throw std::domain_error("quenched_psi: path too short to reach the tail threshold at t=" +
                                format17(t));

    const double u = t / path.mean_product(depth);
    const auto seed = std::polar(1.0, u * opts.w_mean_tail);
    return {compose_gen_fns(path, seed, depth), depth};
}

CharFnGrid build_grid(const EnvironmentPath& path, double T, double dt,
                      const PsiOptions& opts, int threads) {
    if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("build_grid: T, dt must be positive");
    const auto half = static_cast<std::size_t>(std::llround(T / dt));
    if (half == 0) throw std::invalid_argument("build_grid: T smaller than dt");

    CharFnGrid g;
    g.dt = dt;
    g.half = half;
    g.T = static_cast<double>(half) * dt;
    g.opts = opts;
    const std::size_t n = 2 * half + 1;
    g.t.resize(n);
    g.psi.resize(n);
    g.depth_used.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        g.t[i] = (static_cast<double>(i) - static_cast<double>(half)) * dt;

    parallel_for(half + 1, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) {
            const auto v = quenched_psi(path, static_cast<double>(j) * dt, opts);
            g.psi[half + j] = v.value;
            g.depth_used[half + j] = static_cast<std::uint32_t>(v.depth);
        }
    });
    for (std::size_t j = 1; j <= half; ++j) {
        g.psi[half - j] = std::conj(g.psi[half + j]);
        g.depth_used[half - j] = g.depth_used[half + j];
    }
    return g;
}

DerivativeGrid derivative_grid(std::span<const std::complex<double>> psi, double dt) {
    const std::size_t n = psi.size();
    if (n < 5) throw std::invalid_argument("derivative_grid: need at least 5 points");
    DerivativeGrid d;
    d.values.assign(n, std::complex<double>(std::numeric_limits<double>::quiet_NaN(),
                                            std::numeric_limits<double>::quiet_NaN()));
    d.lo = 1;
    d.hi = n - 2;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const auto d1 = (psi[i + 1] - psi[i - 1]) / (2.0 * dt);
        if (i >= 2 && i + 2 < n) {
            const auto d2 = (psi[i + 2] - psi[i - 2]) / (4.0 * dt);
            d.values[i] = (4.0 * d1 - d2) / 3.0;
        } else {
            d.values[i] = d1;
        }
    }
    return d;
}

DerivativeGrid derivative_grid(const CharFnGrid& grid) {
    return derivative_grid(std::span<const std::complex<double>>(grid.psi), grid.dt);
}

std::vector<double> make_r_grid(std::size_t points) {
    if (points < 2) throw std::invalid_argument("make_r_grid: need at least 2 points");
    std::vector<double> r(points);
    const double top = 1.0 - 1e-6;
    for (std::size_t i = 0; i < points; ++i)
        r[i] = top * static_cast<double>(i) / static_cast<double>(points - 1);
    return r;
}

HBoundCheck h_bound_check(const OffspringDistribution& dist,
                          std::span<const double> r_grid) {
    if (dist.p0() >= 1.0 - kPmfEps)
        throw std::invalid_argument("h_bound_check: distribution is a point mass at 0");

    // survivor tail sums: (1 - f(r))/(1 - r) = sum_j tail_j r^j with
    // tail_j = P(X >= j+1)
    const auto sup = dist.support();
    const auto prob = dist.probabilities();
    const std::uint32_t kmax = dist.max_support();
    std::vector<double> tail(kmax, 0.0);
    {
        double acc = 0.0;
        std::size_t si = sup.size();
        for (std::uint32_t j = kmax; j-- > 0;) {
            while (si > 0 && sup[si - 1] >= j + 1) acc += prob[--si];
            tail[j] = acc;
        }
    }

    HBoundCheck out;
    const double m = dist.mean();
    for (double r : r_grid) {
        if (!(r >= 0.0) || r > 1.0 - 1e-6) continue;
        double g = 0.0;
        for (std::size_t j = tail.size(); j-- > 0;) g = g * r + tail[j];
        const double h = dist.gen_fn_real(r, 1) / g;

        double s = 0.0;  // sum over k>=2 of p_k (1-r)^(k-1)
        for (std::size_t i = 0; i < sup.size(); ++i)
            if (sup[i] >= 2)
                s += prob[i] * std::pow(1.0 - r, static_cast<double>(sup[i] - 1));
        const double bound = 1.0 / (1.0 + s / m);

        ++out.evaluated;
        out.max_h = std::max(out.max_h, h);
        const double excess = h - bound;
        out.max_excess = std::max(out.max_excess, excess);
        if (excess > 1e-12) ++out.violations;
    }
    return out;
}

namespace {

double grid_rho(const CharFnGrid& grid) {
    double rho = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::abs(grid.t[i]) >= 1.0) rho = std::max(rho, std::abs(grid.psi[i]));
    // values marginally above 1 are rounding noise from deep compositions
    return std::min(rho, 1.0);
}

double window_integral(const CharFnGrid& grid, const DerivativeGrid& d, double lo, double hi) {
    // endpoint slop so that t-values landing an ulp past a window edge still count
    const double tol = 1e-9 * (1.0 + std::abs(hi));
    std::vector<double> xs, ys;
    for (std::size_t i = d.lo; i <= d.hi; ++i) {
        if (grid.t[i] < lo - tol || grid.t[i] > hi + tol) continue;
        xs.push_back(grid.t[i]);
        ys.push_back(std::abs(d.values[i]));
    }
    return trapezoid(xs, ys);
}

}  // namespace

BoundReport bound_suite(const CharFnGrid& grid, const EnvironmentPath& path,
                        const MartingaleSample& sample, const BoundOptions& opts) {
    if (grid.dt > 0.5)
        throw NumericRefusal("bound_suite: grid too coarse for finite differences "
                             "(dt = " + format17(grid.dt) + " > 0.5)");
    if (grid.T < 1.0)
        throw std::invalid_argument("bound_suite: grid must cover [-T,T] with T >= 1");

    BoundReport rep;
    const auto moments = atom_and_moments(sample);
    rep.c = moments.c;
    rep.trunc_n = moments.trunc_n;

    rep.rho_hat = grid_rho(grid);

    // quadratic lower-tail bound on a dedicated fine grid over (0, 1/(2N)]
    rep.quad_vacuous = rep.c <= 0.0;
    const double tmax = 0.5 / static_cast<double>(std::max<std::uint64_t>(1, rep.trunc_n));
    double min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j <= opts.quad_points; ++j) {
        const double tq = tmax * static_cast<double>(j) / static_cast<double>(opts.quad_points);
        // the tail seed is pure phase, so a shallow recursion reports |psi| = 1
        // and the bound looks violated; force mean products of 16 or more, which
        // resolves all but a sliver of the modulus deficit
        PsiOptions qopts = grid.opts;
        qopts.tail_eps = std::min(qopts.tail_eps, tq / 16.0);
        const double mod = std::abs(quenched_psi(path, tq, qopts).value);
        min_slack = std::min(min_slack, 1.0 - rep.c * tq * tq - mod);
    }
    rep.quad_min_slack = min_slack;
    rep.quad_ok = min_slack >= -1e-9;

    // |psi'| windows: dyadic [2^k, 2^(k+1)] clipped to the valid stencil range
    const auto deriv = derivative_grid(grid);
    const double t_hi = grid.t[deriv.hi];
    for (double w = 1.0; 2.0 * w <= grid.T && w < t_hi; w *= 2.0) {
        TailWindow win;
        win.lo = w;
        win.hi = std::min(2.0 * w, t_hi);
        win.integral = window_integral(grid, deriv, win.lo, win.hi);
        rep.psi_prime_tail.push_back(win);
    }
    rep.psi_prime_total = window_integral(grid, deriv, grid.t[deriv.lo], t_hi);

    // h-bound along the path, each distinct state once
    const auto r_grid = make_r_grid(opts.r_points);
    std::vector<char> seen;
    for (std::size_t k = 0; k < path.length(); ++k) {
        const std::uint32_t idx = path.state_index(k);
        if (idx >= seen.size()) seen.resize(idx + 1, 0);
        if (seen[idx]) continue;
        seen[idx] = 1;
        const auto& d = path.dist(k);
        if (d.p0() >= 1.0 - kPmfEps) {
            ++rep.h_states_skipped;
            continue;
        }
        const auto check = h_bound_check(d, r_grid);
        rep.h_violations += check.violations;
        rep.h_max_excess = std::max(rep.h_max_excess, check.max_excess);
        ++rep.h_states_checked;
    }

    // contraction coefficients along the first few shifts, with the shifted
    // grid's rho_hat standing in for the true tail supremum
    for (std::size_t j = 0; j < opts.b_count && j + 1 < path.length(); ++j) {
        const auto shifted = path.shifted(j + 1);
        const auto sg = build_grid(shifted, grid.T, grid.dt, grid.opts, opts.threads);
        const double rho_sh = grid_rho(sg);
        const auto& d = path.dist(j);
        double s = 0.0;
        const auto sup = d.support();
        const auto prob = d.probabilities();
        for (std::size_t i = 0; i < sup.size(); ++i)
            if (sup[i] >= 2)
                s += prob[i] * std::pow(1.0 - rho_sh, static_cast<double>(sup[i] - 1));
        rep.b_values.push_back(1.0 / (1.0 + s / d.mean()));
    }
    return rep;
}

}  // namespace bprelab
