#include "bprelab/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bprelab/numeric.hpp"
#include "bprelab/parallel.hpp"

namespace bprelab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_uniform_symmetric(std::span<const double> t) {
    if (t.size() < 3) throw std::invalid_argument("inversion: need at least 3 grid points");
    const double dt = t[1] - t[0];
    if (!(dt > 0.0)) throw std::invalid_argument("inversion: grid not increasing");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs((t[i] - t[i - 1]) - dt) > 1e-9 * (1.0 + std::abs(t[i])))
            throw std::invalid_argument("inversion: grid not uniform");
    if (std::abs(t.front() + t.back()) > 1e-9 * (1.0 + std::abs(t.back())))
        throw std::invalid_argument("inversion: grid not symmetric about 0");
}

// shared inversion core: f_out[j] = Re or Im of (dt/2pi) sum_k w_k c_k e^{-i t_k x_j}
struct InversionSums {
    std::vector<double> real;
    std::vector<double> imag;
    double max_imag = 0.0;
    double max_real = 0.0;
};

InversionSums invert_core(std::span<const double> t, std::span<const complexd> values,
                          std::span<const double> weights, std::span<const double> x,
                          int threads) {
    const double dt = t[1] - t[0];
    InversionSums out;
    out.real.resize(x.size());
    out.imag.resize(x.size());
    std::vector<double> max_imag_chunk(x.size(), 0.0);

    parallel_for(x.size(), threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<complexd> terms(t.size());
        for (std::size_t j = lo; j < hi; ++j) {
            for (std::size_t k = 0; k < t.size(); ++k)
                terms[k] = weights[k] * values[k] * std::polar(1.0, -t[k] * x[j]);
            const complexd s = pairwise_sum(terms) * (dt / kTwoPi);
            out.real[j] = s.real();
            out.imag[j] = s.imag();
        }
    });
    for (std::size_t j = 0; j < x.size(); ++j) {
        out.max_imag = std::max(out.max_imag, std::abs(out.imag[j]));
        out.max_real = std::max(out.max_real, std::abs(out.real[j]));
    }
    return out;
}

void finish_mass_stats(DensityEstimate& est) {
    est.total_mass = trapezoid(est.x, est.f);
    est.min_f = est.f.empty() ? 0.0 : *std::min_element(est.f.begin(), est.f.end());
}

}  // namespace

double Window::weight(double t, double T) const {
    switch (kind) {
        case Kind::fejer:
            return std::max(0.0, 1.0 - std::abs(t) / T);
        case Kind::gaussian:
            return std::exp(-0.5 * sqr(sigma * t));
    }
    return 0.0;
}

std::string Window::describe(double T) const {
    switch (kind) {
        case Kind::fejer:
            return "fejer(T=" + format17(T) + ")";
        case Kind::gaussian:
            return "gaussian(sigma=" + format17(sigma) + ",T=" + format17(T) + ")";
    }
    return "?";
}

std::vector<double> make_x_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("make_x_grid: bad range");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = lo + static_cast<double>(i) * step;
    return x;
}

DensityEstimate invert_direct(std::span<const double> t, std::span<const complexd> psi,
                              double atom, std::span<const double> x, const Window& window,
                              int threads) {
    if (t.size() != psi.size()) throw std::invalid_argument("invert_direct: size mismatch");
    if (!(atom >= 0.0 && atom <= 1.0)) throw std::invalid_argument("invert_direct: atom outside [0,1]");
    check_uniform_symmetric(t);
    const double T = t.back();

    std::vector<double> weights(t.size());
    std::vector<complexd> centered(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        weights[k] = window.weight(t[k], T);
        centered[k] = psi[k] - atom;
    }

    // a tail floor of |psi| below the atom suggests the atom is overstated
    double tail_floor = 1.0;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (std::abs(t[k]) >= 0.8 * T) tail_floor = std::min(tail_floor, std::abs(psi[k]));

    const auto sums = invert_core(t, centered, weights, x, threads);

    DensityEstimate est;
    est.x.assign(x.begin(), x.end());
    est.f = sums.real;
    est.atom = atom;
    est.imag_residual = sums.max_imag;
    est.atom_warning = atom > tail_floor + 1e-9;
    est.method = "direct";
    est.window = window.describe(T);
    finish_mass_stats(est);
    return est;
}

DensityEstimate invert_direct(const CharFnGrid& grid, double atom, std::span<const double> x,
                              const Window& window, int threads) {
    return invert_direct(grid.t, grid.psi, atom, x, window, threads);
}

DensityEstimate invert_derivative(std::span<const double> t, std::span<const complexd> dpsi,
                                  std::span<const double> x, const Window& window,
                                  double x_min, int threads) {
    if (t.size() != dpsi.size()) throw std::invalid_argument("invert_derivative: size mismatch");
    if (!(x_min > 0.0)) throw std::invalid_argument("invert_derivative: x_min must be positive");
    for (double xi : x)
        if (std::abs(xi) < x_min)
            throw std::invalid_argument("invert_derivative: x grid enters the excluded band |x| < " +
                                        format17(x_min));
    check_uniform_symmetric(t);
    const double T = t.back();

    std::vector<double> weights(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) weights[k] = window.weight(t[k], T);

    const auto sums = invert_core(t, dpsi, weights, x, threads);

    DensityEstimate est;
    est.x.assign(x.begin(), x.end());
    est.f.resize(x.size());
    // g(x) = i x f(x), so the density is the imaginary part over x
    for (std::size_t j = 0; j < x.size(); ++j) est.f[j] = sums.imag[j] / x[j];
    est.atom = 0.0;
    est.imag_residual = sums.max_real;  // here the real part is the spurious one
    est.method = "derivative";
    est.window = window.describe(T);
    finish_mass_stats(est);
    return est;
}

DensityEstimate invert_derivative(const CharFnGrid& grid, std::span<const double> x,
                                  const Window& window, double x_min, int threads) {
    const auto d = derivative_grid(grid);
    std::vector<double> ts(grid.t.begin() + static_cast<std::ptrdiff_t>(d.lo),
                           grid.t.begin() + static_cast<std::ptrdiff_t>(d.hi + 1));
    std::vector<complexd> ds(d.values.begin() + static_cast<std::ptrdiff_t>(d.lo),
                             d.values.begin() + static_cast<std::ptrdiff_t>(d.hi + 1));
    return invert_derivative(ts, ds, x, window, x_min, threads);
}

DensityEstimate kde(const MartingaleSample& sample, const Bandwidth& bw,
                    std::span<const double> x, int threads) {
    std::vector<double> nonzero;
    nonzero.reserve(sample.values.size());
    for (std::size_t i = 0; i < sample.values.size(); ++i)
        if (sample.extinct_at[i] < 0) nonzero.push_back(sample.values[i]);
    if (nonzero.empty()) throw std::invalid_argument("kde: all values are zero");
    if (nonzero.size() < 100) throw std::invalid_argument("kde: need at least 100 nonzero values");
    std::sort(nonzero.begin(), nonzero.end());
    const double n = static_cast<double>(nonzero.size());

    double h = bw.h;
    if (bw.rule == Bandwidth::Rule::silverman) {
        const double mean = pairwise_sum(nonzero) / n;
        std::vector<double> sq(nonzero.size());
        for (std::size_t i = 0; i < nonzero.size(); ++i) sq[i] = sqr(nonzero[i] - mean);
        const double sd = std::sqrt(pairwise_sum(sq) / n);
        const double iqr = nonzero[static_cast<std::size_t>(0.75 * (n - 1))] -
                           nonzero[static_cast<std::size_t>(0.25 * (n - 1))];
        double scale = std::min(sd, iqr / 1.34);
        if (scale <= 0.0) scale = std::max(sd, 1e-12);
        h = 0.9 * scale * std::pow(n, -0.2);
    }
    if (!(h > 0.0)) throw std::invalid_argument("kde: bandwidth must be positive");

    const double survivors = n / static_cast<double>(sample.values.size());
    const double norm = survivors / (n * h * std::sqrt(kTwoPi));
    // the Gaussian kernel under 8.5 bandwidths is below double rounding
    const double cutoff = 8.5 * h;

    DensityEstimate est;
    est.x.assign(x.begin(), x.end());
    est.f.resize(x.size());
    parallel_for(x.size(), threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> terms;
        for (std::size_t j = lo; j < hi; ++j) {
            const auto first = std::lower_bound(nonzero.begin(), nonzero.end(), x[j] - cutoff);
            const auto last = std::upper_bound(nonzero.begin(), nonzero.end(), x[j] + cutoff);
            terms.assign(static_cast<std::size_t>(last - first), 0.0);
            for (auto it = first; it != last; ++it)
                terms[static_cast<std::size_t>(it - first)] = std::exp(-0.5 * sqr((x[j] - *it) / h));
            est.f[j] = norm * pairwise_sum(terms);
        }
    });

    const double extinct = static_cast<double>(sample.values.size() - nonzero.size());
    est.atom = extinct / static_cast<double>(sample.values.size());
    est.method = "kde";
    est.window = "gaussian_kernel(h=" + format17(h) + ")";
    finish_mass_stats(est);
    return est;
}

CompareResult compare(const DensityEstimate& a, const DensityEstimate& b, double lo,
                      double hi) {
    if (a.x.size() < 2 || b.x.size() < 2) throw std::invalid_argument("compare: degenerate grids");
    const double clo = std::max({lo, a.x.front(), b.x.front()});
    const double chi = std::min({hi, a.x.back(), b.x.back()});
    if (!(clo < chi)) throw std::invalid_argument("compare: ranges do not overlap");

    std::vector<double> xs, diffs;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
        if (a.x[i] < clo || a.x[i] > chi) continue;
        xs.push_back(a.x[i]);
        diffs.push_back(std::abs(a.f[i] - lerp_at(b.x, b.f, a.x[i])));
    }
    if (xs.size() < 2) throw std::invalid_argument("compare: overlap contains too few points");

    CompareResult r;
    r.sup = *std::max_element(diffs.begin(), diffs.end());
    r.l1 = trapezoid(xs, diffs);
    return r;
}

}  // namespace bprelab
