#include "recalx/perturbation.hpp"

#include <cmath>

#include "recalx/calibration.hpp"
#include "recalx/model.hpp"
#include "recalx/numeric.hpp"
#include "recalx/rng.hpp"

namespace recalx {

PerturbationStrategy PerturbationStrategy::zero() {
    PerturbationStrategy s;
    s.kind = Kind::zero_baseline;
    s.name = "zero-baseline";
    return s;
}

PerturbationStrategy PerturbationStrategy::fixed(std::vector<double> b) {
    PerturbationStrategy s;
    s.kind = Kind::fixed_baseline;
    s.baseline = std::move(b);
    s.name = "fixed-baseline";
    return s;
}

PerturbationStrategy PerturbationStrategy::mean(std::vector<double> mu) {
    PerturbationStrategy s;
    s.kind = Kind::mean_replacement;
    s.baseline = std::move(mu);
    s.name = "mean-replacement";
    return s;
}

PerturbationStrategy PerturbationStrategy::noise(double sigma) {
    PerturbationStrategy s;
    s.kind = Kind::gaussian_noise;
    s.sigma = sigma;
    s.name = "gaussian-noise";
    return s;
}

void PerturbationStrategy::validate(int d) const {
    switch (kind) {
        case Kind::zero_baseline:
            break;
        case Kind::fixed_baseline:
        case Kind::mean_replacement:
            require(!baseline.empty(), ErrorCode::invalid_argument,
                    "PerturbationStrategy: baseline vector required");
            require(all_finite(baseline), ErrorCode::numeric,
                    "PerturbationStrategy: non-finite baseline entry");
            if (d >= 0) {
                require(static_cast<int>(baseline.size()) == d, ErrorCode::invalid_argument,
                        "PerturbationStrategy: baseline length must equal d");
            }
            break;
        case Kind::gaussian_noise:
            require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::invalid_argument,
                    "PerturbationStrategy: sigma must be finite and > 0");
            break;
    }
}

std::vector<double> perturb(std::span<const double> x, const Coalition& s,
                            const PerturbationStrategy& strategy, std::uint64_t seed) {
    s.validate();
    require(static_cast<int>(x.size()) == s.d, ErrorCode::invalid_argument,
            "perturb: input dimension does not match coalition");
    strategy.validate(s.d);

    std::vector<double> out(x.begin(), x.end());
    switch (strategy.kind) {
        case PerturbationStrategy::Kind::zero_baseline:
            for (int i = 0; i < s.d; ++i) {
                if (!s.contains(i)) out[static_cast<std::size_t>(i)] = 0.0;
            }
            break;
        case PerturbationStrategy::Kind::fixed_baseline:
        case PerturbationStrategy::Kind::mean_replacement:
            for (int i = 0; i < s.d; ++i) {
                if (!s.contains(i)) {
                    out[static_cast<std::size_t>(i)] = strategy.baseline[static_cast<std::size_t>(i)];
                }
            }
            break;
        case PerturbationStrategy::Kind::gaussian_noise: {
            Rng rng(mix64(seed, s.kept));
            for (int i = 0; i < s.d; ++i) {
                if (!s.contains(i)) {
                    out[static_cast<std::size_t>(i)] += rng.normal(0.0, strategy.sigma);
                }
            }
            break;
        }
    }
    return out;
}

std::vector<Coalition> sample_coalitions(int d, CoalitionPolicy policy, std::size_t count,
                                         std::uint64_t seed, double level) {
    require(d >= 1 && d <= 64, ErrorCode::invalid_argument, "sample_coalitions: need 1 <= d <= 64");
    std::vector<Coalition> out;

    if (policy == CoalitionPolicy::exhaustive) {
        require(d <= 20, ErrorCode::invalid_argument,
                "sample_coalitions: exhaustive requires d <= 20");
        const std::uint64_t total = std::uint64_t{1} << d;
        out.reserve(total);
        for (std::uint64_t mask = 0; mask < total; ++mask) out.emplace_back(mask, d);
        return out;
    }

    Rng rng(seed);
    out.reserve(count);
    switch (policy) {
        case CoalitionPolicy::uniform_size:
            for (std::size_t i = 0; i < count; ++i) {
                const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(d) + 1));
                out.emplace_back(rng.subset_mask(d, k), d);
            }
            break;
        case CoalitionPolicy::shapley_kernel: {
            require(d >= 2, ErrorCode::invalid_argument,
                    "sample_coalitions: shapley-kernel requires d >= 2");
            // Per-size mass of the Shapley kernel: (d-1) / (k (d-k)).
            std::vector<double> cdf(static_cast<std::size_t>(d - 1));
            double total = 0.0;
            for (int k = 1; k <= d - 1; ++k) {
                total += static_cast<double>(d - 1) / (static_cast<double>(k) *
                                                       static_cast<double>(d - k));
                cdf[static_cast<std::size_t>(k - 1)] = total;
            }
            for (std::size_t i = 0; i < count; ++i) {
                const double u = rng.uniform01() * total;
                int k = 1;
                while (k < d - 1 && u > cdf[static_cast<std::size_t>(k - 1)]) ++k;
                out.emplace_back(rng.subset_mask(d, k), d);
            }
            break;
        }
        case CoalitionPolicy::fixed_level: {
            require(level >= 0.0 && level <= 1.0, ErrorCode::invalid_argument,
                    "sample_coalitions: level must be in [0,1]");
            const int k = static_cast<int>(std::llround((1.0 - level) * d));
            for (std::size_t i = 0; i < count; ++i) {
                out.emplace_back(rng.subset_mask(d, k), d);
            }
            break;
        }
        case CoalitionPolicy::exhaustive:
            break;  // handled above
    }
    return out;
}

std::vector<double> restricted_predict(const Classifier& m, const ReCalXCalibrator* calib,
                                       std::span<const double> x, const Coalition& s,
                                       const PerturbationStrategy& strategy, std::uint64_t seed) {
    require(s.d == m.input_dim(), ErrorCode::invalid_argument,
            "restricted_predict: coalition dimension does not match model");
    const std::vector<double> xp = perturb(x, s, strategy, seed);
    if (calib == nullptr) return softmax(m.logits_under(xp, s));
    // Temperature selection depends only on the coalition; issuing its
    // division before the forward pass keeps it off the latency-critical tail.
    const double t = select_temperature(*calib, s);
    return apply_temperature(m.logits_under(xp, s), t);
}

}  // namespace recalx
