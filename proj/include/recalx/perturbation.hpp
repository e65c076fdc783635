#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recalx/coalition.hpp"
#include "recalx/error.hpp"

namespace recalx {

// How coordinates OUTSIDE the kept coalition are replaced.
//
// The gaussian-noise kind adds N(0, sigma^2) to each replaced coordinate; its
// randomness is derived from mix64(seed, kept-mask), so a (seed, mask) pair
// always reproduces the same perturbation regardless of evaluation order.
// Callers that perturb many samples fold the sample index into the seed.
struct PerturbationStrategy {
    enum class Kind { zero_baseline, fixed_baseline, mean_replacement, gaussian_noise };

    Kind kind = Kind::zero_baseline;
    std::vector<double> baseline;  // fixed_baseline: b; mean_replacement: mu
    double sigma = 0.0;            // gaussian_noise
    std::string name = "zero-baseline";

    static PerturbationStrategy zero();
    static PerturbationStrategy fixed(std::vector<double> b);
    static PerturbationStrategy mean(std::vector<double> mu);
    static PerturbationStrategy noise(double sigma);

    bool stochastic() const { return kind == Kind::gaussian_noise; }

    // Checks internal consistency and, when d >= 0, the dimension match.
    void validate(int d = -1) const;
};

// pi(x, S): coordinates in S are kept, the rest replaced per the strategy.
std::vector<double> perturb(std::span<const double> x, const Coalition& s,
                            const PerturbationStrategy& strategy, std::uint64_t seed);

enum class CoalitionPolicy {
    uniform_size,    // |S| uniform in {0..d}, then uniform subset of that size
    shapley_kernel,  // |S| in {1..d-1} with mass proportional to (d-1)/(|S|(d-|S|))
    fixed_level,     // |S| = round((1-level)*d), uniform subset
    exhaustive,      // all 2^d coalitions in ascending bitmask order (d <= 20)
};

// `count` draws (ignored by exhaustive, which always returns all 2^d).
// `level` is consulted only by fixed_level.
std::vector<Coalition> sample_coalitions(int d, CoalitionPolicy policy, std::size_t count,
                                         std::uint64_t seed, double level = 0.0);

class Classifier;
struct ReCalXCalibrator;

// f_S(x): predict on pi(x, S); with a calibrator, logits are divided by the
// temperature selected for the perturbation level of S before the softmax.
std::vector<double> restricted_predict(const Classifier& m, const ReCalXCalibrator* calib,
                                       std::span<const double> x, const Coalition& s,
                                       const PerturbationStrategy& strategy, std::uint64_t seed);

}  // namespace recalx
