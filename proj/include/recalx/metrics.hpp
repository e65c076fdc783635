#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "recalx/calibration.hpp"
#include "recalx/coalition.hpp"
#include "recalx/dataset.hpp"
#include "recalx/model.hpp"
#include "recalx/perturbation.hpp"

namespace recalx {

// -log(max(p_y, 1e-12)); finite for any simplex vector.
double cross_entropy(std::span<const double> p, int y);

// sum_i p_i log(p_i / max(q_i, 1e-12)); terms with p_i = 0 contribute 0.
// Clamped at 0 to absorb rounding on near-identical inputs.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Estimator of P(Y | f(X) = p) evaluated at each sample's own prediction.
struct ConditionalEstimatorSpec {
    enum class Kind { exact_groupby, kernel };
    Kind kind = Kind::exact_groupby;
    double bandwidth = 0.05;   // kernel kind only
    bool leave_one_out = true; // kernel kind only

    void validate() const;
};

struct ConditionalEstimate {
    std::vector<std::vector<double>> rows;  // row i = estimated P(Y = . | f(X) = preds[i])
    std::size_t distinct_predictions = 0;
    bool singleton_fallback = false;  // leave-one-out hit an isolated point; self included
};

// exact-groupby: empirical label frequencies among rows with a bit-identical
// prediction vector; valid only while distinct predictions stay <= 10^4.
// kernel: Nadaraya-Watson with Gaussian weight exp(-|p_i - p_j|^2 / (2 h^2)),
// grouped by distinct (prediction, label) pairs so cost scales with the
// number of distinct pairs, not the raw sample count.
ConditionalEstimate estimate_conditional(const std::vector<std::vector<double>>& preds,
                                         const std::vector<int>& labels, int n_classes,
                                         const ConditionalEstimatorSpec& spec);

// mean_i KL(conditional_i || preds_i)
double calibration_error_kl(const std::vector<std::vector<double>>& preds,
                            const std::vector<int>& labels, int n_classes,
                            const ConditionalEstimatorSpec& spec);

// mean_i KL(conditional_i || empirical label marginal)
double mutual_information(const std::vector<std::vector<double>>& preds,
                          const std::vector<int>& labels, int n_classes,
                          const ConditionalEstimatorSpec& spec);

// Mean cross-entropy with nothing observed minus mean cross-entropy with S
// observed, over the dataset.
double predictive_power(const Classifier& m, const ReCalXCalibrator* calib, const Dataset& data,
                        const Coalition& s, const PerturbationStrategy& strategy,
                        std::uint64_t seed);

// v = baseline_bias + mutual_info - calib_error, up to the reported residual.
struct DecompositionReport {
    double baseline_bias = 0.0;      // KL(label marginal || prediction with nothing observed)
    double mutual_info = 0.0;        // information the restricted prediction carries about Y
    double calib_error = 0.0;        // KL calibration error of the restricted prediction
    double predictive_power = 0.0;   // measured directly from the two cross-entropies
    double residual = 0.0;           // v - (bias + MI - CE)
};

// Exact mode: every term computed by enumeration over the joint's support
// pushed through the (deterministic) perturbation; residual is provably
// within rounding of zero.
DecompositionReport decomposition_report_exact(const Classifier& m, const ReCalXCalibrator* calib,
                                               const FiniteJoint& joint, const Coalition& s,
                                               const PerturbationStrategy& strategy);

// Estimation mode on sampled data: terms use the configured conditional
// estimator; residual is reported, not asserted.
DecompositionReport decomposition_report_estimated(const Classifier& m,
                                                   const ReCalXCalibrator* calib,
                                                   const Dataset& data, const Coalition& s,
                                                   const PerturbationStrategy& strategy,
                                                   const ConditionalEstimatorSpec& spec,
                                                   std::uint64_t seed);

struct LevelProfile {
    std::vector<double> levels;
    std::vector<double> ce_per_level;
    double ce_avg = 0.0;
    double ce_max = 0.0;
};

// For each level, pools `reps` perturbed predictions per data point at the
// matching coalition size and computes the KL calibration error of the pool.
LevelProfile per_level_profile(const Classifier& m, const ReCalXCalibrator* calib,
                               const Dataset& data, const PerturbationStrategy& strategy,
                               std::span<const double> levels, int reps, std::uint64_t seed,
                               const ConditionalEstimatorSpec& spec);

}  // namespace recalx
