#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "bprelab/charfn.hpp"
#include "bprelab/montecarlo.hpp"

namespace bprelab {

// One Fourier convention everywhere: f(x) = (1/2pi) * Integral psi(t) e^{-itx} dt.

struct Window {
    enum class Kind { fejer, gaussian };
    Kind kind = Kind::fejer;
    double sigma = 0.01;  // gaussian only: weight exp(-(sigma*t)^2/2)

    double weight(double t, double T) const;
    std::string describe(double T) const;
};

struct DensityEstimate {
    std::vector<double> x;
    std::vector<double> f;
    double atom = 0.0;
    double total_mass = 0.0;    // trapezoid of f over x
    double min_f = 0.0;         // windowed inversion can undershoot; reported, not clamped
    double imag_residual = 0.0; // max |imaginary part| before taking the real part
    bool atom_warning = false;  // atom exceeds the observed |psi| floor at large |t|
    std::string method;
    std::string window;
};

// Direct windowed inversion of (psi - atom). Works on any uniformly sampled
// symmetric charfn, not just the recursion grid.
DensityEstimate invert_direct(std::span<const double> t, std::span<const complexd> psi,
                              double atom, std::span<const double> x, const Window& window,
                              int threads = 0);
DensityEstimate invert_direct(const CharFnGrid& grid, double atom, std::span<const double> x,
                              const Window& window, int threads = 0);

// Derivative route: g(x) = (1/2pi) * sum w(t) psi'(t) e^{-itx} dt equals
// i x f(x), so f(x) = Im(g(x))/x. The atom differentiates away, but the
// formula is singular at 0: every x must satisfy |x| >= x_min > 0.
DensityEstimate invert_derivative(std::span<const double> t, std::span<const complexd> dpsi,
                                  std::span<const double> x, const Window& window,
                                  double x_min = 0.1, int threads = 0);
DensityEstimate invert_derivative(const CharFnGrid& grid, std::span<const double> x,
                                  const Window& window, double x_min = 0.1, int threads = 0);

struct Bandwidth {
    enum class Rule { silverman, fixed };
    Rule rule = Rule::silverman;
    double h = 0.0;  // fixed only
};

// Gaussian kernel estimate over the nonzero values, scaled by the survivor
// fraction; needs at least 100 nonzero values.
DensityEstimate kde(const MartingaleSample& sample, const Bandwidth& bw,
                    std::span<const double> x, int threads = 0);

struct CompareResult {
    double l1 = 0.0;
    double sup = 0.0;
};

// Discrepancies over [lo, hi]: b is linearly interpolated onto a's grid
// restricted to the overlap. Throws when the overlap is empty.
CompareResult compare(const DensityEstimate& a, const DensityEstimate& b, double lo,
                      double hi);

std::vector<double> make_x_grid(double lo, double hi, double step);

}  // namespace bprelab
