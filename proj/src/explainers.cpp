#include "recalx/explainers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "recalx/numeric.hpp"
#include "recalx/parallel.hpp"
#include "recalx/rng.hpp"

namespace recalx {

ValueFunction::ValueFunction(const Classifier& m, const ReCalXCalibrator* calib,
                             std::span<const double> x, int target_class,
                             const PerturbationStrategy& strategy, std::uint64_t seed)
    : model_(m),
      calib_(calib),
      x_(x.begin(), x.end()),
      target_(target_class),
      strategy_(strategy),
      seed_(seed),
      d_(m.input_dim()) {
    require(static_cast<int>(x_.size()) == d_, ErrorCode::invalid_argument,
            "ValueFunction: input dimension does not match model");
    require(target_ >= 0 && target_ < m.n_classes(), ErrorCode::invalid_argument,
            "ValueFunction: target class out of range");
    strategy_.validate(d_);
}

double ValueFunction::evaluate(std::uint64_t kept) const {
    const Coalition s(kept, d_);
    const std::vector<double> p = restricted_predict(model_, calib_, x_, s, strategy_, seed_);
    return p[static_cast<std::size_t>(target_)];
}

double ValueFunction::operator()(const Coalition& s) {
    require(s.d == d_, ErrorCode::invalid_argument, "ValueFunction: coalition dimension mismatch");
    auto it = cache_.find(s.kept);
    if (it != cache_.end()) return it->second;
    const double v = evaluate(s.kept);
    cache_.emplace(s.kept, v);
    ++evaluations_;
    return v;
}

void ValueFunction::prefetch(std::span<const Coalition> coalitions) {
    std::vector<std::uint64_t> missing;
    missing.reserve(coalitions.size());
    for (const Coalition& s : coalitions) {
        require(s.d == d_, ErrorCode::invalid_argument,
                "ValueFunction: coalition dimension mismatch");
        if (cache_.find(s.kept) == cache_.end()) missing.push_back(s.kept);
    }
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::vector<double> values(missing.size());
    parallel_for(missing.size(), [&](std::size_t i) { values[i] = evaluate(missing[i]); });
    for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], values[i]);
    evaluations_ += missing.size();
}

double ValueFunction::empty_value() { return (*this)(Coalition::empty(d_)); }
double ValueFunction::full_value() { return (*this)(Coalition::full(d_)); }

std::vector<double> shapley_exact(ValueFunction& v) {
    const int d = v.dim();
    require(d <= 15, ErrorCode::unsupported, "shapley_exact: d > 15 (2^d evaluations)");

    std::vector<Coalition> all;
    const std::uint64_t total = std::uint64_t{1} << d;
    all.reserve(total);
    for (std::uint64_t mask = 0; mask < total; ++mask) all.emplace_back(mask, d);
    v.prefetch(all);

    // weight(|S|) = |S|! (d - |S| - 1)! / d!, exact in 64-bit integers for d <= 15.
    std::vector<double> weight(static_cast<std::size_t>(d));
    for (int s = 0; s < d; ++s) {
        weight[static_cast<std::size_t>(s)] =
            static_cast<double>(factorial_u64(s) * factorial_u64(d - s - 1)) /
            static_cast<double>(factorial_u64(d));
    }

    std::vector<double> phi(static_cast<std::size_t>(d), 0.0);
    std::vector<double> terms(total / 2);
    for (int i = 0; i < d; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        std::size_t t = 0;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            if (mask & bit) continue;
            const double gain = v(Coalition(mask | bit, d)) - v(Coalition(mask, d));
            terms[t++] = weight[static_cast<std::size_t>(std::popcount(mask))] * gain;
        }
        phi[static_cast<std::size_t>(i)] = pairwise_sum(terms);
    }
    return phi;
}

namespace {

AttributionVector make_attribution(std::vector<double> values, int target, const char* method,
                                   double base_value, const PerturbationStrategy& strategy,
                                   const ReCalXCalibrator* calib, std::uint64_t seed,
                                   std::size_t n_samples) {
    AttributionVector a;
    a.values = std::move(values);
    a.target_class = target;
    a.method = method;
    a.base_value = base_value;
    a.strategy_name = strategy.name;
    a.calibrated = calib != nullptr;
    a.seed = seed;
    a.n_samples = n_samples;
    return a;
}

double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) {
        c *= static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return c;
}

}  // namespace

AttributionVector shapley(const Classifier& m, const ReCalXCalibrator* calib,
                          std::span<const double> x, int target_class,
                          const PerturbationStrategy& strategy, std::uint64_t seed) {
    ValueFunction v(m, calib, x, target_class, strategy, seed);
    std::vector<double> phi = shapley_exact(v);
    return make_attribution(std::move(phi), target_class, "shapley", v.empty_value(), strategy,
                            calib, seed, 0);
}

AttributionVector kernel_shap(const Classifier& m, const ReCalXCalibrator* calib,
                              std::span<const double> x, int target_class,
                              const PerturbationStrategy& strategy, std::size_t n_samples,
                              std::uint64_t seed) {
    const int d = m.input_dim();
    require(n_samples >= static_cast<std::size_t>(d) + 2, ErrorCode::invalid_argument,
            "kernel_shap: n_samples must be at least d + 2");
    ValueFunction v(m, calib, x, target_class, strategy, seed);
    const double v0 = v.empty_value();
    const double delta = v.full_value() - v0;

    if (d == 1) {
        return make_attribution({delta}, target_class, "kernelshap", v0, strategy, calib, seed,
                                0);
    }

    // Distinct non-trivial coalitions, ascending by mask for a fixed solve order.
    std::vector<Coalition> coalitions;
    const bool exhaustive =
        d <= 20 && n_samples >= (std::uint64_t{1} << d) - 2;
    if (exhaustive) {
        const std::uint64_t full = (std::uint64_t{1} << d) - 1;
        for (std::uint64_t mask = 1; mask < full; ++mask) coalitions.emplace_back(mask, d);
    } else {
        std::set<std::uint64_t> masks;
        for (const Coalition& s :
             sample_coalitions(d, CoalitionPolicy::shapley_kernel, n_samples, seed)) {
            masks.insert(s.kept);
        }
        for (std::uint64_t mask : masks) coalitions.emplace_back(mask, d);
        require(coalitions.size() >= static_cast<std::size_t>(d), ErrorCode::numeric,
                "kernel_shap: fewer distinct coalitions than features; increase n_samples");
    }
    v.prefetch(coalitions);

    // Efficiency by substitution: phi_{d-1} = delta - sum of the others, so we
    // regress v(S) - v0 - z_{d-1} * delta on u_i = z_i - z_{d-1}, i < d - 1.
    const std::size_t p = static_cast<std::size_t>(d - 1);
    std::vector<double> ata(p * p, 0.0);
    std::vector<double> atb(p, 0.0);
    std::vector<double> u(p);
    for (const Coalition& s : coalitions) {
        const int k = s.size();
        const double w = static_cast<double>(d - 1) /
                         (binomial(d, k) * static_cast<double>(k) * static_cast<double>(d - k));
        const double z_last = s.contains(d - 1) ? 1.0 : 0.0;
        for (int i = 0; i < d - 1; ++i) {
            u[static_cast<std::size_t>(i)] = (s.contains(i) ? 1.0 : 0.0) - z_last;
        }
        const double t = v(s) - v0 - z_last * delta;
        for (std::size_t r = 0; r < p; ++r) {
            if (u[r] == 0.0) continue;
            const double wu = w * u[r];
            for (std::size_t c = 0; c < p; ++c) ata[r * p + c] += wu * u[c];
            atb[r] += wu * t;
        }
    }

    std::vector<double> beta;
    try {
        beta = solve_linear_system(std::move(ata), std::move(atb), p);
    } catch (const Error&) {
        fail(ErrorCode::numeric, "kernel_shap: singular design; increase n_samples");
    }

    std::vector<double> phi(static_cast<std::size_t>(d), 0.0);
    double partial = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        phi[i] = beta[i];
        partial += beta[i];
    }
    phi[static_cast<std::size_t>(d - 1)] = delta - partial;
    return make_attribution(std::move(phi), target_class, "kernelshap", v0, strategy, calib,
                            seed, coalitions.size());
}

AttributionVector lime(const Classifier& m, const ReCalXCalibrator* calib,
                       std::span<const double> x, int target_class,
                       const PerturbationStrategy& strategy, std::size_t n_samples,
                       double kernel_width, double ridge_lambda, std::uint64_t seed) {
    const int d = m.input_dim();
    require(n_samples >= static_cast<std::size_t>(d) + 2, ErrorCode::invalid_argument,
            "lime: n_samples must be at least d + 2");
    require(ridge_lambda >= 0.0 && std::isfinite(ridge_lambda), ErrorCode::invalid_argument,
            "lime: ridge_lambda must be >= 0");
    const double width =
        kernel_width > 0.0 ? kernel_width : 0.75 * std::sqrt(static_cast<double>(d));

    std::vector<Coalition> draws;
    const bool exhaustive = d <= 20 && n_samples >= (std::uint64_t{1} << d);
    if (exhaustive) {
        draws = sample_coalitions(d, CoalitionPolicy::exhaustive, 0, seed);
    } else {
        Rng rng(seed);
        draws.reserve(n_samples);
        const std::uint64_t span = d == 64 ? 0 : (std::uint64_t{1} << d);
        for (std::size_t i = 0; i < n_samples; ++i) {
            const std::uint64_t mask = d == 64 ? rng.next_u64() : rng.below(span);
            draws.emplace_back(mask, d);
        }
    }

    ValueFunction v(m, calib, x, target_class, strategy, seed);
    v.prefetch(draws);

    // Weighted ridge regression with an unpenalized intercept.
    const std::size_t p = static_cast<std::size_t>(d) + 1;
    std::vector<double> ata(p * p, 0.0);
    std::vector<double> atb(p, 0.0);
    std::vector<double> row(p);
    for (const Coalition& s : draws) {
        const int removed = d - s.size();
        const double ratio = static_cast<double>(removed) / width;
        const double w = std::exp(-ratio * ratio);
        row[0] = 1.0;
        for (int i = 0; i < d; ++i) {
            row[static_cast<std::size_t>(i) + 1] = s.contains(i) ? 1.0 : 0.0;
        }
        const double t = v(s);
        for (std::size_t r = 0; r < p; ++r) {
            if (row[r] == 0.0) continue;
            const double wr = w * row[r];
            for (std::size_t c = 0; c < p; ++c) ata[r * p + c] += wr * row[c];
            atb[r] += wr * t;
        }
    }
    for (std::size_t j = 1; j < p; ++j) ata[j * p + j] += ridge_lambda;

    std::vector<double> beta;
    try {
        beta = solve_linear_system(std::move(ata), std::move(atb), p);
    } catch (const Error&) {
        fail(ErrorCode::numeric,
             "lime: singular normal equations; increase n_samples or use ridge_lambda > 0");
    }

    std::vector<double> phi(beta.begin() + 1, beta.end());
    return make_attribution(std::move(phi), target_class, "lime", v.empty_value(), strategy,
                            calib, seed, draws.size());
}

AttributionVector feature_ablation(const Classifier& m, const ReCalXCalibrator* calib,
                                   std::span<const double> x, int target_class,
                                   const PerturbationStrategy& strategy, std::uint64_t seed) {
    const int d = m.input_dim();
    ValueFunction v(m, calib, x, target_class, strategy, seed);
    std::vector<Coalition> wanted;
    wanted.reserve(static_cast<std::size_t>(d) + 2);
    const Coalition full = Coalition::full(d);
    wanted.push_back(full);
    wanted.push_back(Coalition::empty(d));
    for (int i = 0; i < d; ++i) wanted.push_back(full.without(i));
    v.prefetch(wanted);

    const double v_full = v.full_value();
    std::vector<double> phi(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        phi[static_cast<std::size_t>(i)] = v_full - v(full.without(i));
    }
    return make_attribution(std::move(phi), target_class, "ablation", v.empty_value(), strategy,
                            calib, seed, 0);
}

AttributionMethod attribution_method_from_name(const std::string& name) {
    if (name == "shapley") return AttributionMethod::shapley;
    if (name == "kernelshap") return AttributionMethod::kernelshap;
    if (name == "lime") return AttributionMethod::lime;
    if (name == "ablation") return AttributionMethod::ablation;
    fail(ErrorCode::invalid_argument,
         "unknown attribution method '" + name +
             "' (valid: shapley, kernelshap, lime, ablation)");
}

const char* attribution_method_name(AttributionMethod method) {
    switch (method) {
        case AttributionMethod::shapley: return "shapley";
        case AttributionMethod::kernelshap: return "kernelshap";
        case AttributionMethod::lime: return "lime";
        case AttributionMethod::ablation: return "ablation";
    }
    fail(ErrorCode::invalid_argument, "unknown attribution method enum value");
}

AttributionVector explain_one(const Classifier& m, const ReCalXCalibrator* calib,
                              std::span<const double> x, int target_class,
                              AttributionMethod method, const PerturbationStrategy& strategy,
                              std::uint64_t seed, const ExplainParams& params) {
    switch (method) {
        case AttributionMethod::shapley:
            return shapley(m, calib, x, target_class, strategy, seed);
        case AttributionMethod::kernelshap:
            return kernel_shap(m, calib, x, target_class, strategy, params.n_samples, seed);
        case AttributionMethod::lime:
            return lime(m, calib, x, target_class, strategy, params.n_samples,
                        params.lime_kernel_width, params.lime_ridge, seed);
        case AttributionMethod::ablation:
            return feature_ablation(m, calib, x, target_class, strategy, seed);
    }
    fail(ErrorCode::invalid_argument, "unknown attribution method enum value");
}

GlobalImportance global_importance(const Classifier& m, const ReCalXCalibrator* calib,
                                   const Dataset& data, AttributionMethod method,
                                   const PerturbationStrategy& strategy, std::size_t n_explain,
                                   std::uint64_t seed, const ExplainParams& params) {
    data.require_nonempty();
    require(n_explain >= 1 && n_explain <= data.n(), ErrorCode::invalid_argument,
            "global_importance: n_explain must be in [1, N]");
    require(data.dim() == m.input_dim() && data.n_classes == m.n_classes(),
            ErrorCode::invalid_argument, "global_importance: dataset does not match model");
    const std::size_t d = static_cast<std::size_t>(data.dim());

    std::vector<std::vector<double>> abs_values(n_explain);
    parallel_for(n_explain, [&](std::size_t i) {
        const auto row = data.row(i);
        const int target = argmax(m.logits(row));
        AttributionVector a =
            explain_one(m, calib, row, target, method, strategy, mix64(seed, i), params);
        for (double& value : a.values) value = std::fabs(value);
        abs_values[i] = std::move(a.values);
    });

    GlobalImportance g;
    g.method = attribution_method_name(method);
    g.n_explained = n_explain;
    g.mean_abs.resize(d);
    std::vector<double> column(n_explain);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n_explain; ++i) column[i] = abs_values[i][j];
        g.mean_abs[j] = pairwise_sum(column) / static_cast<double>(n_explain);
    }
    g.ranking.resize(d);
    std::iota(g.ranking.begin(), g.ranking.end(), 0);
    std::sort(g.ranking.begin(), g.ranking.end(), [&](int a, int b) {
        const double ma = g.mean_abs[static_cast<std::size_t>(a)];
        const double mb = g.mean_abs[static_cast<std::size_t>(b)];
        if (ma != mb) return ma > mb;
        return a < b;
    });
    return g;
}

}  // namespace recalx
