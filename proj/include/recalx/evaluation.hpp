#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "recalx/dataset.hpp"
#include "recalx/explainers.hpp"
#include "recalx/metrics.hpp"
#include "recalx/model.hpp"

namespace recalx {

struct RoarCurve {
    std::vector<int> k_values;
    std::vector<double> mean_loss;               // per k, averaged over retrain seeds
    std::vector<double> std_loss;                // per k, sample stddev over retrain seeds
    std::vector<std::vector<double>> seed_loss;  // [k][seed]
    std::vector<std::uint64_t> seeds;
};

// Remove-and-retrain: for each k, drop the k top-ranked feature columns,
// retrain from scratch per seed, and record held-out mean cross-entropy.
// The dataset is split once; training uses the train part, losses are
// measured on the test part.
RoarCurve roar(const Dataset& ds_full, std::span<const int> ranking, std::span<const int> k_values,
               const TrainConfig& cfg, std::span<const std::uint64_t> retrain_seeds,
               const SplitSpec& split_spec);

struct SensitivityReport {
    double s_avg = 0.0;
    double s_max = 0.0;
    double radius = 0.0;
    int n_probes = 0;
    std::string norm = "L2";
    std::vector<double> per_probe;  // |phi(x') - phi(x)|_2 per probe
};

using ExplainFn =
    std::function<AttributionVector(std::span<const double> x, std::uint64_t seed)>;

// Probes are drawn uniformly in the L-infinity ball around x. All
// explanations (base and probes) share one derived seed, so the only thing
// that varies between probes is the input point; radius 0 is exactly 0.
SensitivityReport sensitivity(const ExplainFn& explain, std::span<const double> x, double radius,
                              int n_probes, std::uint64_t seed);

struct SensitivitySummary {
    double mean_s_avg = 0.0;
    double mean_s_max = 0.0;
    double radius = 0.0;
    int n_probes = 0;
    std::string method;
    std::vector<SensitivityReport> per_sample;
};

// Sensitivity over the first n_explain rows; each sample is explained against
// its predicted class at the base point, held fixed across probes.
SensitivitySummary sensitivity_summary(const Classifier& m, const ReCalXCalibrator* calib,
                                       const Dataset& data, AttributionMethod method,
                                       const PerturbationStrategy& strategy,
                                       const ExplainParams& params, double radius, int n_probes,
                                       std::size_t n_explain, std::uint64_t seed);

struct DriftBoundReport {
    double delta = 0.0;
    double ce_max = 0.0;          // max over all coalitions, exact enumeration
    double bound = 0.0;           // 2 * ce_max + sqrt(8 * ln(1 / delta))
    double violation_rate = 0.0;  // fraction of trials with lhs > bound
    double mean_lhs = 0.0;
    bool vacuous = false;  // bound >= 4, the largest possible lhs for probability games
    std::vector<double> lhs_values;
};

// Per trial, draws x from the joint and compares the exact Shapley
// explanation of `miscal` against the Bayes oracle's under the same strategy:
// lhs = |phi - phi*|_2^2 / d. Exactness of ce_max restricts d to <= 4.
DriftBoundReport drift_bound_check(const FiniteJoint& joint, const Classifier& miscal,
                                   const PerturbationStrategy& strategy, double delta,
                                   int n_trials, std::uint64_t seed);

}  // namespace recalx
