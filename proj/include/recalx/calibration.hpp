#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recalx/coalition.hpp"
#include "recalx/dataset.hpp"
#include "recalx/model.hpp"
#include "recalx/numeric.hpp"
#include "recalx/perturbation.hpp"

namespace recalx {

inline constexpr double kTemperatureMin = 0.01;
inline constexpr double kTemperatureMax = 100.0;

// softmax(z / T); T restricted to [kTemperatureMin, kTemperatureMax].
// Inline: this sits inside every calibrated prediction.
inline std::vector<double> apply_temperature(std::span<const double> z, double temperature) {
    require(temperature >= kTemperatureMin && temperature <= kTemperatureMax,
            ErrorCode::invalid_argument, "apply_temperature: T out of [0.01, 100]");
    return softmax_scaled(z, temperature);
}

struct TemperatureFit {
    double temperature = 1.0;
    double ce_before = 0.0;  // mean cross-entropy at T = 1
    double ce_after = 0.0;   // mean cross-entropy at the fitted T
    bool boundary_warning = false;  // optimum pinned at a search bound (e.g. one-class data)
    bool flat_objective = false;    // fit no better than T = 1; tie-broken to the identity
    std::vector<double> trace;      // bracketed minimum per search iteration (non-increasing)
};

// Golden-section search on log10 T over [-2, 2] to 1e-4 absolute tolerance
// in log space; the mean cross-entropy objective is convex in 1/T.
TemperatureFit fit_temperature_on(const std::vector<std::vector<double>>& logits,
                                  const std::vector<int>& labels);

// Single temperature on unperturbed validation data.
TemperatureFit fit_temperature(const Classifier& m, const Dataset& val);

// Per-level temperatures: equal-width bins over the perturbation level.
struct ReCalXCalibrator {
    int bins = 1;
    std::vector<double> edges;         // bins + 1 values, 0 = e_0 < ... < e_B = 1
    std::vector<double> temperatures;  // one per bin, each in [kTemperatureMin, kTemperatureMax]

    // Fit metadata (not consulted at inference time).
    std::string strategy_name;
    std::size_t validation_size = 0;
    std::vector<std::size_t> bin_counts;
    std::uint64_t seed = 0;

    void validate() const;

    // Bins are left-closed, right-open; the last bin is closed so level 1
    // belongs to bin B-1.
    int bin_of(double level) const {
        require(level >= 0.0 && level <= 1.0, ErrorCode::invalid_argument,
                "ReCalXCalibrator: level out of [0, 1]");
        const int b = static_cast<int>(std::floor(level * static_cast<double>(bins)));
        return std::min(b, bins - 1);
    }

    static std::vector<double> uniform_edges(int bins);
};

inline double select_temperature(const ReCalXCalibrator& c, const Coalition& s) {
    return c.temperatures[static_cast<std::size_t>(c.bin_of(perturbation_level(s)))];
}

struct BinFit {
    int bin = 0;
    std::size_t samples = 0;
    std::vector<int> coalition_sizes;  // achievable |S| values this bin samples from
    double temperature = 1.0;
    double ce_before = 0.0;
    double ce_after = 0.0;
    bool inherited = false;  // no achievable |S| maps here; T copied from nearest bin
    bool boundary_warning = false;
    bool flat_objective = false;
    std::vector<double> trace;
};

struct FitReport {
    std::vector<BinFit> bins;
    std::string strategy_name;
    std::size_t validation_size = 0;
    int reps_per_point = 0;
    std::uint64_t seed = 0;
    // Within a bin, coalition sizes are drawn uniformly among the |S| values
    // whose level lands in the bin.
    std::string size_rule = "uniform-over-achievable-sizes";
};

// Fits one temperature per level bin. Each bin's fit set takes every
// validation point `reps_per_point` times, with an independently sampled
// coalition whose level falls in the bin. Per-bin sampling streams are
// derived from (seed, bin), so bins can be fit concurrently without
// changing results.
std::pair<ReCalXCalibrator, FitReport> fit_recalx(const Classifier& m, const Dataset& val,
                                                  const PerturbationStrategy& strategy, int bins,
                                                  int reps_per_point, std::uint64_t seed);

}  // namespace recalx
