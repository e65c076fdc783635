#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "recalx/calibration.hpp"
#include "recalx/coalition.hpp"
#include "recalx/dataset.hpp"
#include "recalx/model.hpp"
#include "recalx/perturbation.hpp"

namespace recalx {

struct AttributionVector {
    std::vector<double> values;  // one weight per feature
    int target_class = 0;
    std::string method;
    double base_value = 0.0;  // target-class probability with nothing observed

    // Provenance carried into reports.
    std::string strategy_name;
    bool calibrated = false;
    std::uint64_t seed = 0;
    std::size_t n_samples = 0;  // coalitions actually used (0 for exhaustive methods)
};

// Coalition game v(S): the target-class probability of the restricted
// prediction. Values are cached by bitmask, so every distinct coalition costs
// exactly one model evaluation; evaluations() exposes that count.
class ValueFunction {
public:
    ValueFunction(const Classifier& m, const ReCalXCalibrator* calib, std::span<const double> x,
                  int target_class, const PerturbationStrategy& strategy, std::uint64_t seed);

    double operator()(const Coalition& s);

    // Evaluates uncached masks (concurrently when workers > 1) and caches them.
    void prefetch(std::span<const Coalition> coalitions);

    std::size_t evaluations() const { return evaluations_; }
    int dim() const { return d_; }
    double empty_value();
    double full_value();

private:
    double evaluate(std::uint64_t kept) const;

    const Classifier& model_;
    const ReCalXCalibrator* calib_;
    std::vector<double> x_;
    int target_ = 0;
    PerturbationStrategy strategy_;
    std::uint64_t seed_ = 0;
    int d_ = 0;
    std::unordered_map<std::uint64_t, double> cache_;
    std::size_t evaluations_ = 0;
};

// Exact subset-weighted Shapley values; evaluates all 2^d coalitions (d <= 15).
std::vector<double> shapley_exact(ValueFunction& v);

AttributionVector shapley(const Classifier& m, const ReCalXCalibrator* calib,
                          std::span<const double> x, int target_class,
                          const PerturbationStrategy& strategy, std::uint64_t seed);

// Weighted least squares with the Shapley kernel over sampled non-trivial
// coalitions; the efficiency constraint (sum phi = v(full) - v(empty)) is
// enforced by variable substitution. When n_samples covers all 2^d - 2
// non-trivial coalitions (and d <= 20), enumeration replaces sampling and the
// result matches shapley_exact.
AttributionVector kernel_shap(const Classifier& m, const ReCalXCalibrator* calib,
                              std::span<const double> x, int target_class,
                              const PerturbationStrategy& strategy, std::size_t n_samples,
                              std::uint64_t seed);

// Ridge-weighted linear regression of v(S) on the coalition indicator vector,
// with proximity weight exp(-(d - |S|)^2 / width^2). kernel_width <= 0 selects
// the default 0.75 * sqrt(d). When n_samples >= 2^d (and d <= 20) the draws
// are replaced by full enumeration.
AttributionVector lime(const Classifier& m, const ReCalXCalibrator* calib,
                       std::span<const double> x, int target_class,
                       const PerturbationStrategy& strategy, std::size_t n_samples,
                       double kernel_width, double ridge_lambda, std::uint64_t seed);

// phi_i = v(full) - v(full without i): the drop from perturbing feature i alone.
AttributionVector feature_ablation(const Classifier& m, const ReCalXCalibrator* calib,
                                   std::span<const double> x, int target_class,
                                   const PerturbationStrategy& strategy, std::uint64_t seed);

enum class AttributionMethod { shapley, kernelshap, lime, ablation };

AttributionMethod attribution_method_from_name(const std::string& name);
const char* attribution_method_name(AttributionMethod method);

struct ExplainParams {
    std::size_t n_samples = 256;     // kernelshap / lime coalition draws
    double lime_kernel_width = 0.0;  // <= 0: default 0.75 * sqrt(d)
    double lime_ridge = 1e-3;
};

AttributionVector explain_one(const Classifier& m, const ReCalXCalibrator* calib,
                              std::span<const double> x, int target_class,
                              AttributionMethod method, const PerturbationStrategy& strategy,
                              std::uint64_t seed, const ExplainParams& params);

struct GlobalImportance {
    std::vector<double> mean_abs;  // mean |phi_i| over the explained samples
    std::vector<int> ranking;      // descending mean_abs; ties by ascending index
    std::size_t n_explained = 0;
    std::string method;
};

// Explains the first n_explain rows, each against its own predicted class,
// with per-sample seeds derived from (seed, row index).
GlobalImportance global_importance(const Classifier& m, const ReCalXCalibrator* calib,
                                   const Dataset& data, AttributionMethod method,
                                   const PerturbationStrategy& strategy, std::size_t n_explain,
                                   std::uint64_t seed, const ExplainParams& params);

}  // namespace recalx
