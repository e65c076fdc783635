#include "recalx/numeric.hpp"

#include <cmath>

namespace recalx {

std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b,
                                        std::size_t n) {
    require(a.size() == n * n && b.size() == n, ErrorCode::invalid_argument,
            "solve_linear_system: shape mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::fabs(a[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double cand = std::fabs(a[r * n + col]);
            if (cand > best) {
                best = cand;
                pivot = r;
            }
        }
        if (!(best > 1e-300)) {
            fail(ErrorCode::numeric, "solve_linear_system: singular matrix");
        }
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[pivot * n + c], a[col * n + c]);
            std::swap(b[pivot], b[col]);
        }
        const double diag = a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r * n + col] / diag;
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * x[c];
        x[i] = s / a[i * n + i];
    }
    return x;
}

}  // namespace recalx
