#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "recalx/error.hpp"

namespace recalx {

// Probability floor applied inside every logarithm so that cross-entropy,
// KL divergence and friends stay finite. Reported values inherit it.
inline constexpr double kProbFloor = 1e-12;

inline double log_floored(double p) { return std::log(std::max(p, kProbFloor)); }

// Pairwise (cascade) summation in a fixed order. Used for every mean/max
// reduction that feeds a reported number, so reruns and worker counts cannot
// change output bytes.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double mean(std::span<const double> v) {
    require(!v.empty(), ErrorCode::invalid_argument, "mean of empty range");
    return pairwise_sum(v) / static_cast<double>(v.size());
}

// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
inline double sample_stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1));
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// softmax(z / T) with max subtraction, one reciprocal and a single fused
// pass — this sits inside every calibrated prediction. T = 1 yields 1/T = 1
// exactly and (x - zmax) * 1.0 == x - zmax bitwise, so the plain softmax is
// unchanged by the scaling term.
inline std::vector<double> softmax_scaled(std::span<const double> logits, double temperature) {
    require(!logits.empty(), ErrorCode::invalid_argument, "softmax of empty vector");
    require(all_finite(logits), ErrorCode::numeric, "softmax: non-finite logits");
    require(temperature > 0.0, ErrorCode::invalid_argument, "softmax: temperature must be > 0");
    const double inv = 1.0 / temperature;  // issued early so it overlaps the copy+max
    std::vector<double> z(logits.begin(), logits.end());
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double& x : z) {
        x = std::exp((x - zmax) * inv);
        denom += x;
    }
    for (double& x : z) x /= denom;
    return z;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    return softmax_scaled(logits, 1.0);
}

// First index attaining the maximum.
inline int argmax(std::span<const double> v) {
    require(!v.empty(), ErrorCode::invalid_argument, "argmax of empty vector");
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Exact factorials up to 20! (the largest that fits in 64 bits).
inline std::uint64_t factorial_u64(int n) {
    require(n >= 0 && n <= 20, ErrorCode::invalid_argument, "factorial_u64: n out of [0,20]");
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
    return f;
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// A is n x n row-major. Throws ErrorCode::numeric on a (near-)singular pivot.
std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b,
                                        std::size_t n);

}  // namespace recalx
