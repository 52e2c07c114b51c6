#pragma once

#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bprelab {

using complexd = std::complex<double>;

// Pairwise (cascade) summation: O(eps log n) error and a fixed reduction
// tree, so results do not depend on chunking or thread count.
template <typename T>
T pairwise_sum(std::span<const T> v) {
    const std::size_t n = v.size();
    if (n == 0) return T{};
    if (n <= 8) {
        T s = v[0];
        for (std::size_t i = 1; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(std::span<const double>(v));
}
inline complexd pairwise_sum(const std::vector<complexd>& v) {
    return pairwise_sum(std::span<const complexd>(v));
}

// Trapezoid rule on an arbitrary sorted grid.
inline double trapezoid(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("trapezoid: size mismatch");
    if (x.size() < 2) return 0.0;
    std::vector<double> terms(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        terms[i] = 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
    return pairwise_sum(terms);
}

// Piecewise-linear interpolation; x must be strictly increasing, queries
// outside the range are an error (callers clamp regions beforehand).
inline double lerp_at(std::span<const double> x, std::span<const double> y, double q) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("lerp_at: bad grid");
    if (q < x.front() || q > x.back())
        throw std::out_of_range("lerp_at: query outside grid");
    std::size_t lo = 0, hi = x.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (x[mid] <= q ? lo : hi) = mid;
    }
    const double w = (q - x[lo]) / (x[lo + 1] - x[lo]);
    return y[lo] + w * (y[lo + 1] - y[lo]);
}

// Locale-independent 17-significant-digit rendering; round-trips doubles
// and is byte-stable across runs.
inline std::string format17(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
    if (ec != std::errc{}) throw std::runtime_error("format17: to_chars failed");
    return std::string(buf, p);
}

inline double sqr(double x) { return x * x; }

}  // namespace bprelab
