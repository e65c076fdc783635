#include "recalx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "recalx/numeric.hpp"
#include "recalx/parallel.hpp"
#include "recalx/rng.hpp"

namespace recalx {

double cross_entropy(std::span<const double> p, int y) {
    require(y >= 0 && static_cast<std::size_t>(y) < p.size(), ErrorCode::invalid_argument,
            "cross_entropy: class index out of range");
    return -log_floored(p[static_cast<std::size_t>(y)]);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    require(!p.empty() && p.size() == q.size(), ErrorCode::invalid_argument,
            "kl_divergence: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) s += p[i] * (std::log(p[i]) - log_floored(q[i]));
    }
    return std::max(0.0, s);
}

void ConditionalEstimatorSpec::validate() const {
    if (kind == Kind::kernel) {
        require(bandwidth > 0.0 && std::isfinite(bandwidth), ErrorCode::invalid_argument,
                "ConditionalEstimatorSpec: bandwidth must be finite and > 0");
    }
}

namespace {

void check_pred_table(const std::vector<std::vector<double>>& preds,
                      const std::vector<int>& labels, int n_classes) {
    require(preds.size() >= 2, ErrorCode::invalid_argument,
            "estimate_conditional: need at least 2 samples");
    require(preds.size() == labels.size(), ErrorCode::invalid_argument,
            "estimate_conditional: preds/labels length mismatch");
    require(n_classes >= 1, ErrorCode::invalid_argument,
            "estimate_conditional: n_classes must be >= 1");
    for (std::size_t i = 0; i < preds.size(); ++i) {
        require(preds[i].size() == static_cast<std::size_t>(n_classes),
                ErrorCode::invalid_argument, "estimate_conditional: ragged prediction rows");
        require(all_finite(preds[i]), ErrorCode::numeric,
                "estimate_conditional: non-finite prediction");
        require(labels[i] >= 0 && labels[i] < n_classes, ErrorCode::domain,
                "estimate_conditional: label out of range");
    }
}

ConditionalEstimate estimate_exact_groupby(const std::vector<std::vector<double>>& preds,
                                           const std::vector<int>& labels, int n_classes) {
    struct Group {
        std::vector<double> counts;
        double total = 0.0;
    };
    std::map<std::vector<double>, Group> groups;
    std::vector<const Group*> row_group(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        Group& g = groups[preds[i]];
        if (g.counts.empty()) g.counts.assign(static_cast<std::size_t>(n_classes), 0.0);
        g.counts[static_cast<std::size_t>(labels[i])] += 1.0;
        g.total += 1.0;
    }
    require(groups.size() <= 10000, ErrorCode::unsupported,
            "estimate_conditional: exact-groupby needs <= 10^4 distinct predictions; "
            "use the kernel estimator");
    for (auto& [key, g] : groups) {
        for (double& c : g.counts) c /= g.total;
    }
    for (std::size_t i = 0; i < preds.size(); ++i) row_group[i] = &groups.find(preds[i])->second;

    ConditionalEstimate out;
    out.distinct_predictions = groups.size();
    out.rows.resize(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) out.rows[i] = row_group[i]->counts;
    return out;
}

ConditionalEstimate estimate_kernel(const std::vector<std::vector<double>>& preds,
                                    const std::vector<int>& labels, int n_classes,
                                    const ConditionalEstimatorSpec& spec) {
    // Distinct (prediction, label) pairs with multiplicities; the weighted
    // sums depend only on the pair, so the N^2 pair loop shrinks to G^2.
    struct Pair {
        const std::vector<double>* pred;
        int label;
        double count;
    };
    std::map<std::pair<std::vector<double>, int>, double> multiplicity;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        multiplicity[{preds[i], labels[i]}] += 1.0;
    }
    std::vector<Pair> pairs;
    pairs.reserve(multiplicity.size());
    for (const auto& [key, count] : multiplicity) {
        pairs.push_back({&key.first, key.second, count});
    }
    const std::size_t n_groups = pairs.size();
    const double inv_two_h2 = 1.0 / (2.0 * spec.bandwidth * spec.bandwidth);

    // Per distinct pair g: weighted class mass and total weight over ALL rows.
    std::vector<std::vector<double>> mass(n_groups);
    std::vector<double> total(n_groups, 0.0);
    parallel_for(n_groups, [&](std::size_t g) {
        std::vector<double> acc(static_cast<std::size_t>(n_classes), 0.0);
        double den = 0.0;
        const std::vector<double>& pg = *pairs[g].pred;
        for (std::size_t h = 0; h < n_groups; ++h) {
            const std::vector<double>& ph = *pairs[h].pred;
            double dist2 = 0.0;
            for (std::size_t k = 0; k < pg.size(); ++k) {
                const double diff = pg[k] - ph[k];
                dist2 += diff * diff;
            }
            const double w = std::exp(-dist2 * inv_two_h2) * pairs[h].count;
            acc[static_cast<std::size_t>(pairs[h].label)] += w;
            den += w;
        }
        mass[g] = std::move(acc);
        total[g] = den;
    });

    bool fallback = false;
    std::vector<std::vector<double>> cond(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
        std::vector<double> num = mass[g];
        double den = total[g];
        if (spec.leave_one_out) {
            // Removing the row itself costs weight exactly 1 (distance 0).
            num[static_cast<std::size_t>(pairs[g].label)] -= 1.0;
            den -= 1.0;
            if (den <= 0.0) {  // isolated singleton: everything else underflowed
                num = mass[g];
                den = total[g];
                fallback = true;
            }
        }
        for (double& v : num) v /= den;
        cond[g] = std::move(num);
    }

    std::map<std::pair<std::vector<double>, int>, std::size_t> index;
    for (std::size_t g = 0; g < n_groups; ++g) {
        index[{*pairs[g].pred, pairs[g].label}] = g;
    }

    ConditionalEstimate out;
    out.singleton_fallback = fallback;
    std::map<std::vector<double>, int> distinct_preds;
    for (const auto& p : preds) distinct_preds[p] = 1;
    out.distinct_predictions = distinct_preds.size();
    out.rows.resize(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        out.rows[i] = cond[index.find({preds[i], labels[i]})->second];
    }
    return out;
}

}  // namespace

ConditionalEstimate estimate_conditional(const std::vector<std::vector<double>>& preds,
                                         const std::vector<int>& labels, int n_classes,
                                         const ConditionalEstimatorSpec& spec) {
    spec.validate();
    check_pred_table(preds, labels, n_classes);
    if (spec.kind == ConditionalEstimatorSpec::Kind::exact_groupby) {
        return estimate_exact_groupby(preds, labels, n_classes);
    }
    return estimate_kernel(preds, labels, n_classes, spec);
}

double calibration_error_kl(const std::vector<std::vector<double>>& preds,
                            const std::vector<int>& labels, int n_classes,
                            const ConditionalEstimatorSpec& spec) {
    const ConditionalEstimate est = estimate_conditional(preds, labels, n_classes, spec);
    std::vector<double> terms(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        terms[i] = kl_divergence(est.rows[i], preds[i]);
    }
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double mutual_information(const std::vector<std::vector<double>>& preds,
                          const std::vector<int>& labels, int n_classes,
                          const ConditionalEstimatorSpec& spec) {
    const ConditionalEstimate est = estimate_conditional(preds, labels, n_classes, spec);
    std::vector<double> marginal(static_cast<std::size_t>(n_classes), 0.0);
    for (int y : labels) marginal[static_cast<std::size_t>(y)] += 1.0;
    for (double& v : marginal) v /= static_cast<double>(labels.size());
    std::vector<double> terms(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        terms[i] = kl_divergence(est.rows[i], marginal);
    }
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double predictive_power(const Classifier& m, const ReCalXCalibrator* calib, const Dataset& data,
                        const Coalition& s, const PerturbationStrategy& strategy,
                        std::uint64_t seed) {
    data.require_nonempty();
    require(data.dim() == m.input_dim() && data.n_classes == m.n_classes(),
            ErrorCode::invalid_argument, "predictive_power: dataset does not match model");
    const Coalition none = Coalition::empty(s.d);
    std::vector<double> loss_none(data.n());
    std::vector<double> loss_s(data.n());
    parallel_for(data.n(), [&](std::size_t i) {
        const std::uint64_t row_seed = mix64(seed, i);
        const auto row = data.row(i);
        loss_none[i] = cross_entropy(restricted_predict(m, calib, row, none, strategy, row_seed),
                                     data.labels[i]);
        loss_s[i] = cross_entropy(restricted_predict(m, calib, row, s, strategy, row_seed),
                                  data.labels[i]);
    });
    return pairwise_sum(loss_none) / static_cast<double>(data.n()) -
           pairwise_sum(loss_s) / static_cast<double>(data.n());
}

namespace {

std::vector<double> calibrated_prediction(const Classifier& m, const ReCalXCalibrator* calib,
                                          std::span<const double> xp, const Coalition& s) {
    if (calib == nullptr) return softmax(m.logits_under(xp, s));
    const double t = select_temperature(*calib, s);
    return apply_temperature(m.logits_under(xp, s), t);
}

}  // namespace

DecompositionReport decomposition_report_exact(const Classifier& m, const ReCalXCalibrator* calib,
                                               const FiniteJoint& joint, const Coalition& s,
                                               const PerturbationStrategy& strategy) {
    joint.validate();
    require(!strategy.stochastic(), ErrorCode::unsupported,
            "decomposition_report_exact: requires a deterministic strategy");
    require(joint.dim() == m.input_dim() && joint.n_classes == m.n_classes(),
            ErrorCode::invalid_argument, "decomposition_report_exact: joint does not match model");
    require(s.d == joint.dim(), ErrorCode::invalid_argument,
            "decomposition_report_exact: coalition dimension mismatch");

    const std::size_t support = joint.support_size();
    const Coalition none = Coalition::empty(s.d);

    // With a deterministic strategy every support point collapses to the same
    // fully-perturbed input, so the nothing-observed prediction is constant.
    const std::vector<double> x_none = perturb(joint.xs[0], none, strategy, 0);
    const std::vector<double> q_none = calibrated_prediction(m, calib, x_none, none);

    std::vector<std::vector<double>> q(support);
    for (std::size_t i = 0; i < support; ++i) {
        const std::vector<double> xp = perturb(joint.xs[i], s, strategy, 0);
        q[i] = calibrated_prediction(m, calib, xp, s);
    }

    // Predictive power: both expected losses by exact enumeration.
    std::vector<double> loss_none(support), loss_s(support);
    for (std::size_t i = 0; i < support; ++i) {
        loss_none[i] = joint.probs[i] * cross_entropy(q_none, joint.ys[i]);
        loss_s[i] = joint.probs[i] * cross_entropy(q[i], joint.ys[i]);
    }
    const double v = pairwise_sum(loss_none) - pairwise_sum(loss_s);

    // Group the pushforward by prediction vector for the exact conditional.
    struct Group {
        std::vector<double> class_mass;
        double weight = 0.0;
    };
    std::map<std::vector<double>, Group> groups;
    for (std::size_t i = 0; i < support; ++i) {
        Group& g = groups[q[i]];
        if (g.class_mass.empty()) {
            g.class_mass.assign(static_cast<std::size_t>(joint.n_classes), 0.0);
        }
        g.class_mass[static_cast<std::size_t>(joint.ys[i])] += joint.probs[i];
        g.weight += joint.probs[i];
    }

    const std::vector<double> marginal = joint.class_marginal();
    std::vector<double> mi_terms, ce_terms;
    mi_terms.reserve(groups.size());
    ce_terms.reserve(groups.size());
    for (const auto& [pred, g] : groups) {
        std::vector<double> cond(g.class_mass);
        for (double& c : cond) c /= g.weight;
        mi_terms.push_back(g.weight * kl_divergence(cond, marginal));
        ce_terms.push_back(g.weight * kl_divergence(cond, pred));
    }

    DecompositionReport report;
    report.baseline_bias = kl_divergence(marginal, q_none);
    report.mutual_info = pairwise_sum(mi_terms);
    report.calib_error = pairwise_sum(ce_terms);
    report.predictive_power = v;
    report.residual =
        v - (report.baseline_bias + report.mutual_info - report.calib_error);
    return report;
}

DecompositionReport decomposition_report_estimated(const Classifier& m,
                                                   const ReCalXCalibrator* calib,
                                                   const Dataset& data, const Coalition& s,
                                                   const PerturbationStrategy& strategy,
                                                   const ConditionalEstimatorSpec& spec,
                                                   std::uint64_t seed) {
    data.require_nonempty();
    require(data.dim() == m.input_dim() && data.n_classes == m.n_classes(),
            ErrorCode::invalid_argument,
            "decomposition_report_estimated: dataset does not match model");
    const std::size_t n = data.n();
    const Coalition none = Coalition::empty(s.d);

    std::vector<std::vector<double>> preds_s(n), preds_none(n);
    parallel_for(n, [&](std::size_t i) {
        const std::uint64_t row_seed = mix64(seed, i);
        preds_none[i] = restricted_predict(m, calib, data.row(i), none, strategy, row_seed);
        preds_s[i] = restricted_predict(m, calib, data.row(i), s, strategy, row_seed);
    });

    std::vector<double> loss_none(n), loss_s(n), bias_terms(n);
    std::vector<double> marginal(static_cast<std::size_t>(data.n_classes), 0.0);
    for (int y : data.labels) marginal[static_cast<std::size_t>(y)] += 1.0;
    for (double& v : marginal) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        loss_none[i] = cross_entropy(preds_none[i], data.labels[i]);
        loss_s[i] = cross_entropy(preds_s[i], data.labels[i]);
        bias_terms[i] = kl_divergence(marginal, preds_none[i]);
    }

    DecompositionReport report;
    report.predictive_power = (pairwise_sum(loss_none) - pairwise_sum(loss_s)) /
                              static_cast<double>(n);
    report.baseline_bias = pairwise_sum(bias_terms) / static_cast<double>(n);
    report.mutual_info = mutual_information(preds_s, data.labels, data.n_classes, spec);
    report.calib_error = calibration_error_kl(preds_s, data.labels, data.n_classes, spec);
    report.residual = report.predictive_power -
                      (report.baseline_bias + report.mutual_info - report.calib_error);
    return report;
}

LevelProfile per_level_profile(const Classifier& m, const ReCalXCalibrator* calib,
                               const Dataset& data, const PerturbationStrategy& strategy,
                               std::span<const double> levels, int reps, std::uint64_t seed,
                               const ConditionalEstimatorSpec& spec) {
    data.require_nonempty();
    require(!levels.empty(), ErrorCode::invalid_argument, "per_level_profile: empty level grid");
    require(reps >= 1, ErrorCode::invalid_argument, "per_level_profile: reps must be >= 1");
    require(data.dim() == m.input_dim() && data.n_classes == m.n_classes(),
            ErrorCode::invalid_argument, "per_level_profile: dataset does not match model");
    const int d = data.dim();
    const std::size_t n = data.n();
    const std::size_t per_level = n * static_cast<std::size_t>(reps);

    LevelProfile profile;
    profile.levels.assign(levels.begin(), levels.end());
    profile.ce_per_level.resize(levels.size());

    std::vector<std::vector<double>> preds(per_level);
    std::vector<int> pool_labels(per_level);
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const double level = levels[li];
        require(level >= 0.0 && level <= 1.0, ErrorCode::invalid_argument,
                "per_level_profile: level out of [0, 1]");
        const int k = static_cast<int>(std::llround((1.0 - level) * d));
        parallel_for(n, [&](std::size_t i) {
            Rng rng(mix64(seed, li, i));
            for (int r = 0; r < reps; ++r) {
                const Coalition s(rng.subset_mask(d, k), d);
                const std::uint64_t call_seed =
                    mix64(seed, li, i, static_cast<std::uint64_t>(r));
                const std::size_t slot = i * static_cast<std::size_t>(reps) +
                                         static_cast<std::size_t>(r);
                preds[slot] = restricted_predict(m, calib, data.row(i), s, strategy, call_seed);
                pool_labels[slot] = data.labels[i];
            }
        });
        profile.ce_per_level[li] =
            calibration_error_kl(preds, pool_labels, data.n_classes, spec);
    }
    profile.ce_avg = mean(profile.ce_per_level);
    profile.ce_max = *std::max_element(profile.ce_per_level.begin(), profile.ce_per_level.end());
    return profile;
}

}  // namespace recalx
