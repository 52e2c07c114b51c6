#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "bprelab/branching.hpp"
#include "bprelab/environment.hpp"
#include "bprelab/montecarlo.hpp"
#include "bprelab/numeric.hpp"

namespace bprelab {

struct PsiOptions {
    double tail_eps = 1e-3;
    double w_mean_tail = 1.0;
};

struct PsiValue {
    std::complex<double> value;
    std::size_t depth = 0;
};

// Characteristic function of the normalized limit under the quenched law,
// computed by rescaling into the far tail and composing back out: pick the
// minimal n with |t| <= tail_eps * M(n), seed with exp(i * (t/M(n)) * w_mean_tail)
// (unit modulus, first moment matched), then apply the depth-n composition.
// Throws std::domain_error when the path is too short for the threshold.
PsiValue quenched_psi(const EnvironmentPath& path, double t, const PsiOptions& opts = {});

//! Sampled characteristic function on a symmetric uniform grid.
//!
//! psi[i] corresponds to t = (i - half) * dt; the negative half is the
//! conjugate mirror of the computed half, so psi(0) = 1 exactly and
//! psi(-t) = conj(psi(t)) holds by construction.
struct CharFnGrid {
    double T = 0.0;           // actual half-width, = half * dt
    double dt = 0.0;
    std::size_t half = 0;     // index of t = 0
    std::vector<double> t;
    std::vector<std::complex<double>> psi;
    std::vector<std::uint32_t> depth_used;
    PsiOptions opts;

    std::size_t size() const { return t.size(); }
};

CharFnGrid build_grid(const EnvironmentPath& path, double T, double dt,
                      const PsiOptions& opts = {}, int threads = 0);

//! Centered finite differences with Richardson extrapolation where both step
//! sizes fit; entries outside [lo, hi] are NaN.
struct DerivativeGrid {
    std::vector<std::complex<double>> values;
    std::size_t lo = 0;  // first valid index
    std::size_t hi = 0;  // last valid index
};

DerivativeGrid derivative_grid(const CharFnGrid& grid);
DerivativeGrid derivative_grid(std::span<const std::complex<double>> psi, double dt);

struct TailWindow {
    double lo = 0.0;
    double hi = 0.0;
    double integral = 0.0;  // trapezoid estimate of the |psi'| integral
};

struct HBoundCheck {
    std::size_t violations = 0;   // points with h - bound > 1e-12
    double max_excess = 0.0;      // max of h - bound
    double max_h = 0.0;
    std::size_t evaluated = 0;
};

// Ratio h(r) = (1-r) f'(r) / (1 - f(r)) against its closed-form upper bound;
// the denominator is evaluated through the factored form (1-f(r))/(1-r) =
// sum_j P(X > j) r^j, which is stable arbitrarily close to r = 1.
// Grid points above 1 - 1e-6 are skipped. Requires P(X=0) < 1.
HBoundCheck h_bound_check(const OffspringDistribution& dist,
                          std::span<const double> r_grid);

std::vector<double> make_r_grid(std::size_t points);

struct BoundReport {
    double rho_hat = 0.0;          // max |psi| over grid points with |t| in [1,T]
    double c = 0.0;
    std::uint64_t trunc_n = 0;
    bool quad_ok = false;          // |psi(t)| <= 1 - c t^2 on (0, 1/(2N)]
    bool quad_vacuous = false;     // c = 0, nothing to test
    double quad_min_slack = 0.0;
    std::size_t h_violations = 0;
    double h_max_excess = 0.0;
    std::size_t h_states_checked = 0;
    std::size_t h_states_skipped = 0;  // states with P(X=0) ~ 1, where the ratio bound is vacuous
    std::vector<double> b_values;      // per-shift contraction estimates
    std::vector<TailWindow> psi_prime_tail;
    double psi_prime_total = 0.0;
};

struct BoundOptions {
    std::size_t b_count = 4;
    std::size_t quad_points = 200;
    std::size_t r_points = 200;
    int threads = 0;
};

// Runs the whole bound battery against one grid. The per-shift b values use
// the shifted grid's own rho_hat as a stand-in for the true tail supremum
// and are labeled estimates in artifacts.
BoundReport bound_suite(const CharFnGrid& grid, const EnvironmentPath& path,
                        const MartingaleSample& sample, const BoundOptions& opts = {});

}  // namespace bprelab
