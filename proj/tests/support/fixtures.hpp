#pragma once

// Shared test fixtures and independent reference implementations. Reference
// code here deliberately avoids the library's own routines (plain loops,
// std::map enumeration) so tests cross-check rather than echo.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "recalx/coalition.hpp"
#include "recalx/dataset.hpp"
#include "recalx/model.hpp"
#include "recalx/rng.hpp"

namespace recalx::test {

// d=3 binary features, two classes: P(x) uniform over the cube,
// P(y=1|x) = 0.1 + 0.35 x0 + 0.25 x1 + 0.15 x2. Alphabets contain 0, so the
// zero baseline is closed over the support.
inline FiniteJoint fixture_joint() {
    FiniteJoint j;
    j.n_classes = 2;
    for (int mask = 0; mask < 8; ++mask) {
        const double x0 = (mask & 1) ? 1.0 : 0.0;
        const double x1 = (mask & 2) ? 1.0 : 0.0;
        const double x2 = (mask & 4) ? 1.0 : 0.0;
        const double p1 = 0.1 + 0.35 * x0 + 0.25 * x1 + 0.15 * x2;
        for (int y = 0; y < 2; ++y) {
            j.xs.push_back({x0, x1, x2});
            j.ys.push_back(y);
            j.probs.push_back((y == 1 ? p1 : 1.0 - p1) / 8.0);
        }
    }
    return j;
}

// Two well-separated Gaussian blobs; any sane classifier exceeds 95%.
inline Dataset make_blobs(std::size_t n, int dim, std::uint64_t seed, double separation = 2.0) {
    Rng rng(seed);
    Dataset ds;
    ds.n_classes = 2;
    for (int c = 0; c < dim; ++c) ds.feature_names.push_back("x" + std::to_string(c));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double center = label == 0 ? -separation / 2.0 : separation / 2.0;
        for (int c = 0; c < dim; ++c) ds.features.push_back(center + rng.normal());
        ds.labels.push_back(label);
    }
    return ds;
}

// Replacement a zero-baseline perturbation applies outside S, written as a
// plain loop.
inline std::vector<double> zero_perturb(const std::vector<double>& x, const Coalition& s) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (s.contains(static_cast<int>(i))) out[i] = x[i];
    return out;
}

// Reference conditional P(Y | pi(X, S)) for the zero baseline over a finite
// joint, by direct enumeration into maps.
inline std::map<std::vector<double>, std::vector<double>> zero_conditionals(const FiniteJoint& j,
                                                                            const Coalition& s) {
    std::map<std::vector<double>, std::vector<double>> acc;  // perturbed x -> class mass
    for (std::size_t i = 0; i < j.probs.size(); ++i) {
        const std::vector<double> key = zero_perturb(j.xs[i], s);
        auto& cell = acc[key];
        if (cell.empty()) cell.assign(static_cast<std::size_t>(j.n_classes), 0.0);
        cell[static_cast<std::size_t>(j.ys[i])] += j.probs[i];
    }
    for (auto& [key, cell] : acc) {
        double total = 0.0;
        for (double v : cell) total += v;
        for (double& v : cell) v /= total;
    }
    return acc;
}

// Exact Shapley values of an arbitrary game given as a value-per-mask table,
// via the permutation definition (d! orderings) — independent of the
// subset-weighted formula in the library.
inline std::vector<double> shapley_by_permutations(const std::vector<double>& value_by_mask,
                                                   int d) {
    std::vector<int> order(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
    std::vector<double> phi(static_cast<std::size_t>(d), 0.0);
    std::size_t n_perm = 0;
    do {
        std::uint64_t mask = 0;
        for (int i : order) {
            const double before = value_by_mask[mask];
            mask |= (1ULL << i);
            phi[static_cast<std::size_t>(i)] += value_by_mask[mask] - before;
        }
        ++n_perm;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& v : phi) v /= static_cast<double>(n_perm);
    return phi;
}

}  // namespace recalx::test
