#include "recalx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recalx/numeric.hpp"
#include "recalx/parallel.hpp"
#include "recalx/rng.hpp"

namespace recalx {

namespace {

Dataset keep_columns(const Dataset& ds, const std::vector<int>& columns) {
    std::vector<double> features;
    features.reserve(ds.n() * columns.size());
    std::vector<std::string> names;
    names.reserve(columns.size());
    for (int c : columns) names.push_back(ds.feature_names[static_cast<std::size_t>(c)]);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto row = ds.row(i);
        for (int c : columns) features.push_back(row[static_cast<std::size_t>(c)]);
    }
    return make_dataset(std::move(features), ds.labels, std::move(names), ds.n_classes);
}

double mean_ce_loss(const Classifier& m, const Dataset& ds) {
    std::vector<double> losses(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        losses[i] = cross_entropy(predict_proba(m, ds.row(i)), ds.labels[i]);
    }
    return pairwise_sum(losses) / static_cast<double>(ds.n());
}

}  // namespace

RoarCurve roar(const Dataset& ds_full, std::span<const int> ranking, std::span<const int> k_values,
               const TrainConfig& cfg, std::span<const std::uint64_t> retrain_seeds,
               const SplitSpec& split_spec) {
    ds_full.require_nonempty();
    cfg.validate();
    const int d = ds_full.dim();
    require(static_cast<int>(ranking.size()) == d, ErrorCode::invalid_argument,
            "roar: ranking must list every feature index once");
    std::vector<bool> seen(static_cast<std::size_t>(d), false);
    for (int r : ranking) {
        require(r >= 0 && r < d && !seen[static_cast<std::size_t>(r)],
                ErrorCode::invalid_argument, "roar: ranking is not a permutation");
        seen[static_cast<std::size_t>(r)] = true;
    }
    require(!k_values.empty(), ErrorCode::invalid_argument, "roar: no removal counts given");
    for (int k : k_values) {
        require(k >= 0 && k < d, ErrorCode::invalid_argument,
                "roar: removal count must stay below d");
    }
    require(!retrain_seeds.empty(), ErrorCode::invalid_argument, "roar: need at least one seed");

    const auto parts = split(ds_full, split_spec);
    const Dataset& train_part = parts[0];
    const Dataset& test_part = parts[2];
    require(train_part.n() > 0 && test_part.n() > 0, ErrorCode::invalid_argument,
            "roar: split must leave nonempty train and test parts");

    const std::size_t nk = k_values.size();
    const std::size_t ns = retrain_seeds.size();
    std::vector<double> losses(nk * ns);
    parallel_for(nk * ns, [&](std::size_t job) {
        const std::size_t ki = job / ns;
        const std::size_t si = job % ns;
        const int k = k_values[ki];
        std::vector<bool> removed(static_cast<std::size_t>(d), false);
        for (int j = 0; j < k; ++j) removed[static_cast<std::size_t>(ranking[j])] = true;
        std::vector<int> kept;
        for (int c = 0; c < d; ++c) {
            if (!removed[static_cast<std::size_t>(c)]) kept.push_back(c);
        }
        TrainConfig run_cfg = cfg;
        run_cfg.seed = retrain_seeds[si];
        const MlpClassifier net = train_mlp(keep_columns(train_part, kept), run_cfg);
        losses[job] = mean_ce_loss(net, keep_columns(test_part, kept));
    });

    RoarCurve curve;
    curve.k_values.assign(k_values.begin(), k_values.end());
    curve.seeds.assign(retrain_seeds.begin(), retrain_seeds.end());
    curve.seed_loss.resize(nk);
    curve.mean_loss.resize(nk);
    curve.std_loss.resize(nk);
    for (std::size_t ki = 0; ki < nk; ++ki) {
        curve.seed_loss[ki].assign(losses.begin() + static_cast<std::ptrdiff_t>(ki * ns),
                                   losses.begin() + static_cast<std::ptrdiff_t>((ki + 1) * ns));
        curve.mean_loss[ki] = mean(curve.seed_loss[ki]);
        curve.std_loss[ki] = sample_stddev(curve.seed_loss[ki]);
    }
    return curve;
}

SensitivityReport sensitivity(const ExplainFn& explain, std::span<const double> x, double radius,
                              int n_probes, std::uint64_t seed) {
    require(radius >= 0.0 && std::isfinite(radius), ErrorCode::invalid_argument,
            "sensitivity: radius must be finite and >= 0");
    require(n_probes >= 1, ErrorCode::invalid_argument, "sensitivity: n_probes must be >= 1");

    const std::uint64_t explain_seed = derive_seed(seed, "sensitivity-explain");
    const std::vector<double> base = explain(x, explain_seed).values;

    SensitivityReport report;
    report.radius = radius;
    report.n_probes = n_probes;
    report.per_probe.resize(static_cast<std::size_t>(n_probes));
    parallel_for(static_cast<std::size_t>(n_probes), [&](std::size_t j) {
        Rng rng(mix64(seed, fnv1a64("sensitivity-probe"), j));
        std::vector<double> probe(x.begin(), x.end());
        for (double& c : probe) c += rng.uniform(-radius, radius);
        const std::vector<double> values = explain(probe, explain_seed).values;
        require(values.size() == base.size(), ErrorCode::invalid_argument,
                "sensitivity: explanation dimension changed between probes");
        double sq = 0.0;
        for (std::size_t c = 0; c < values.size(); ++c) {
            const double diff = values[c] - base[c];
            sq += diff * diff;
        }
        report.per_probe[j] = std::sqrt(sq);
    });
    report.s_avg = mean(report.per_probe);
    report.s_max = *std::max_element(report.per_probe.begin(), report.per_probe.end());
    return report;
}

SensitivitySummary sensitivity_summary(const Classifier& m, const ReCalXCalibrator* calib,
                                       const Dataset& data, AttributionMethod method,
                                       const PerturbationStrategy& strategy,
                                       const ExplainParams& params, double radius, int n_probes,
                                       std::size_t n_explain, std::uint64_t seed) {
    data.require_nonempty();
    require(n_explain >= 1 && n_explain <= data.n(), ErrorCode::invalid_argument,
            "sensitivity_summary: n_explain must be in [1, N]");
    require(data.dim() == m.input_dim() && data.n_classes == m.n_classes(),
            ErrorCode::invalid_argument, "sensitivity_summary: dataset does not match model");

    SensitivitySummary summary;
    summary.radius = radius;
    summary.n_probes = n_probes;
    summary.method = attribution_method_name(method);
    summary.per_sample.resize(n_explain);
    parallel_for(n_explain, [&](std::size_t i) {
        const auto row = data.row(i);
        const int target = argmax(m.logits(row));
        const ExplainFn fn = [&, target](std::span<const double> point, std::uint64_t s) {
            return explain_one(m, calib, point, target, method, strategy, s, params);
        };
        summary.per_sample[i] = sensitivity(fn, row, radius, n_probes, mix64(seed, i));
    });

    std::vector<double> avgs(n_explain), maxs(n_explain);
    for (std::size_t i = 0; i < n_explain; ++i) {
        avgs[i] = summary.per_sample[i].s_avg;
        maxs[i] = summary.per_sample[i].s_max;
    }
    summary.mean_s_avg = mean(avgs);
    summary.mean_s_max = mean(maxs);
    return summary;
}

DriftBoundReport drift_bound_check(const FiniteJoint& joint, const Classifier& miscal,
                                   const PerturbationStrategy& strategy, double delta,
                                   int n_trials, std::uint64_t seed) {
    joint.validate();
    const int d = joint.dim();
    require(d <= 4, ErrorCode::unsupported,
            "drift_bound_check: d > 4 (exact max calibration error enumerates all coalitions)");
    require(delta > 0.0 && delta < 1.0, ErrorCode::invalid_argument,
            "drift_bound_check: delta must be in (0, 1)");
    require(n_trials >= 1, ErrorCode::invalid_argument, "drift_bound_check: n_trials must be >= 1");
    require(joint.dim() == miscal.input_dim() && joint.n_classes == miscal.n_classes(),
            ErrorCode::invalid_argument, "drift_bound_check: joint does not match classifier");

    double ce_max = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
        const DecompositionReport rep =
            decomposition_report_exact(miscal, nullptr, joint, Coalition(mask, d), strategy);
        ce_max = std::max(ce_max, rep.calib_error);
    }

    const BayesRestrictedOracle oracle(joint, strategy);

    // Draw the trial support indices up front so trials can run concurrently.
    std::vector<double> cdf(joint.probs.size());
    std::partial_sum(joint.probs.begin(), joint.probs.end(), cdf.begin());
    cdf.back() = 1.0;
    Rng rng(derive_seed(seed, "drift-trials"));
    std::vector<std::size_t> trial_idx(static_cast<std::size_t>(n_trials));
    for (auto& idx : trial_idx) {
        idx = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), rng.uniform01()) - cdf.begin());
    }

    DriftBoundReport report;
    report.delta = delta;
    report.ce_max = ce_max;
    report.bound = 2.0 * ce_max + std::sqrt(8.0 * std::log(1.0 / delta));
    report.vacuous = report.bound >= 4.0;
    report.lhs_values.resize(static_cast<std::size_t>(n_trials));
    parallel_for(static_cast<std::size_t>(n_trials), [&](std::size_t t) {
        const std::vector<double>& x = joint.xs[trial_idx[t]];
        const int target = argmax(oracle.logits(x));
        ValueFunction v_mis(miscal, nullptr, x, target, strategy, 0);
        ValueFunction v_ref(oracle, nullptr, x, target, strategy, 0);
        const std::vector<double> phi = shapley_exact(v_mis);
        const std::vector<double> phi_ref = shapley_exact(v_ref);
        double sq = 0.0;
        for (int c = 0; c < d; ++c) {
            const double diff = phi[static_cast<std::size_t>(c)] -
                                phi_ref[static_cast<std::size_t>(c)];
            sq += diff * diff;
        }
        report.lhs_values[t] = sq / static_cast<double>(d);
    });

    std::size_t violations = 0;
    for (double lhs : report.lhs_values) {
        if (lhs > report.bound) ++violations;
    }
    report.violation_rate =
        static_cast<double>(violations) / static_cast<double>(n_trials);
    report.mean_lhs = mean(report.lhs_values);
    return report;
}

}  // namespace recalx
