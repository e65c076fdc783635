#include "recalx/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "recalx/numeric.hpp"
#include "recalx/parallel.hpp"
#include "recalx/rng.hpp"

namespace recalx {

namespace {

constexpr double kLogTLo = -2.0;
constexpr double kLogTHi = 2.0;
constexpr double kLogTTol = 1e-4;

double mean_ce_at(const std::vector<std::vector<double>>& logits, const std::vector<int>& labels,
                  double temperature) {
    std::vector<double> losses(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const std::vector<double> p = softmax_scaled(logits[i], temperature);
        losses[i] = -log_floored(p[static_cast<std::size_t>(labels[i])]);
    }
    return pairwise_sum(losses) / static_cast<double>(losses.size());
}

}  // namespace

TemperatureFit fit_temperature_on(const std::vector<std::vector<double>>& logits,
                                  const std::vector<int>& labels) {
    require(!logits.empty(), ErrorCode::invalid_argument, "fit_temperature_on: empty fit set");
    require(logits.size() == labels.size(), ErrorCode::invalid_argument,
            "fit_temperature_on: logits/labels length mismatch");
    const std::size_t klass = logits.front().size();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        require(logits[i].size() == klass, ErrorCode::invalid_argument,
                "fit_temperature_on: ragged logit rows");
        require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < klass, ErrorCode::domain,
                "fit_temperature_on: label out of range");
    }
    const bool single_class =
        std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels.front(); });

    const auto objective = [&](double log10_t) {
        return mean_ce_at(logits, labels, std::pow(10.0, log10_t));
    };

    TemperatureFit fit;
    constexpr double kGolden = 0.6180339887498949;  // (sqrt(5) - 1) / 2
    double a = kLogTLo, b = kLogTHi;
    double x1 = b - kGolden * (b - a);
    double x2 = a + kGolden * (b - a);
    double f1 = objective(x1);
    double f2 = objective(x2);
    fit.trace.push_back(std::min(f1, f2));
    while (b - a > kLogTTol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kGolden * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kGolden * (b - a);
            f2 = objective(x2);
        }
        fit.trace.push_back(std::min(f1, f2));
    }
    const double log10_t = 0.5 * (a + b);
    double temperature =
        std::clamp(std::pow(10.0, log10_t), kTemperatureMin, kTemperatureMax);

    fit.ce_before = objective(0.0);
    double ce_fitted = mean_ce_at(logits, labels, temperature);
    // Tie-break: keep the identity unless the fit is a real improvement.
    if (fit.ce_before - ce_fitted <= 1e-12) {
        temperature = 1.0;
        ce_fitted = fit.ce_before;
        fit.flat_objective = true;
    }
    fit.temperature = temperature;
    fit.ce_after = ce_fitted;
    fit.boundary_warning =
        single_class || log10_t <= kLogTLo + 1e-3 || log10_t >= kLogTHi - 1e-3;
    return fit;
}

TemperatureFit fit_temperature(const Classifier& m, const Dataset& val) {
    val.require_nonempty();
    require(val.dim() == m.input_dim(), ErrorCode::invalid_argument,
            "fit_temperature: dataset dimension does not match model");
    require(val.n_classes == m.n_classes(), ErrorCode::invalid_argument,
            "fit_temperature: class count does not match model");
    std::vector<std::vector<double>> logits(val.n());
    std::vector<int> labels(val.labels.begin(), val.labels.end());
    parallel_for(val.n(), [&](std::size_t i) { logits[i] = m.logits(val.row(i)); });
    return fit_temperature_on(logits, labels);
}

std::vector<double> ReCalXCalibrator::uniform_edges(int bins) {
    require(bins >= 1, ErrorCode::invalid_argument, "uniform_edges: bins must be >= 1");
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (int j = 0; j <= bins; ++j) {
        edges[static_cast<std::size_t>(j)] = static_cast<double>(j) / static_cast<double>(bins);
    }
    return edges;
}

void ReCalXCalibrator::validate() const {
    require(bins >= 1, ErrorCode::invalid_argument, "ReCalXCalibrator: bins must be >= 1");
    require(edges.size() == static_cast<std::size_t>(bins) + 1, ErrorCode::invalid_argument,
            "ReCalXCalibrator: need bins + 1 edges");
    require(temperatures.size() == static_cast<std::size_t>(bins), ErrorCode::invalid_argument,
            "ReCalXCalibrator: need one temperature per bin");
    require(edges.front() == 0.0 && edges.back() == 1.0, ErrorCode::domain,
            "ReCalXCalibrator: edges must span [0, 1]");
    const double width = 1.0 / static_cast<double>(bins);
    for (int j = 0; j < bins; ++j) {
        const double w = edges[static_cast<std::size_t>(j) + 1] - edges[static_cast<std::size_t>(j)];
        require(w > 0.0 && std::fabs(w - width) <= 1e-12, ErrorCode::domain,
                "ReCalXCalibrator: edges must be equal-width");
    }
    for (double t : temperatures) {
        require(t >= kTemperatureMin && t <= kTemperatureMax, ErrorCode::domain,
                "ReCalXCalibrator: temperature out of [0.01, 100]");
    }
}

std::pair<ReCalXCalibrator, FitReport> fit_recalx(const Classifier& m, const Dataset& val,
                                                  const PerturbationStrategy& strategy, int bins,
                                                  int reps_per_point, std::uint64_t seed) {
    val.require_nonempty();
    const int d = m.input_dim();
    require(val.dim() == d, ErrorCode::invalid_argument,
            "fit_recalx: dataset dimension does not match model");
    require(val.n_classes == m.n_classes(), ErrorCode::invalid_argument,
            "fit_recalx: class count does not match model");
    require(bins >= 1, ErrorCode::invalid_argument, "fit_recalx: bins must be >= 1");
    require(reps_per_point >= 1, ErrorCode::invalid_argument,
            "fit_recalx: reps_per_point must be >= 1");
    strategy.validate(d);

    const auto bin_of = [bins](double level) {
        return std::min(static_cast<int>(std::floor(level * static_cast<double>(bins))), bins - 1);
    };

    // Achievable coalition sizes per bin: |S| = k gives level (d - k) / d.
    std::vector<std::vector<int>> sizes_per_bin(static_cast<std::size_t>(bins));
    for (int k = 0; k <= d; ++k) {
        const double level = static_cast<double>(d - k) / static_cast<double>(d);
        sizes_per_bin[static_cast<std::size_t>(bin_of(level))].push_back(k);
    }

    const std::size_t n = val.n();
    std::vector<std::optional<TemperatureFit>> fits(static_cast<std::size_t>(bins));
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);

    parallel_for(static_cast<std::size_t>(bins), [&](std::size_t b) {
        const auto& sizes = sizes_per_bin[b];
        if (sizes.empty()) return;
        Rng rng(mix64(seed, fnv1a64("recalx-bin"), b));
        std::vector<std::vector<double>> logits;
        std::vector<int> labels;
        logits.reserve(n * static_cast<std::size_t>(reps_per_point));
        labels.reserve(n * static_cast<std::size_t>(reps_per_point));
        for (std::size_t i = 0; i < n; ++i) {
            for (int r = 0; r < reps_per_point; ++r) {
                const int k = sizes[static_cast<std::size_t>(rng.below(sizes.size()))];
                const Coalition s(rng.subset_mask(d, k), d);
                const std::uint64_t call_seed =
                    mix64(seed, b, i, static_cast<std::uint64_t>(r));
                const std::vector<double> xp = perturb(val.row(i), s, strategy, call_seed);
                logits.push_back(m.logits_under(xp, s));
                labels.push_back(val.labels[i]);
            }
        }
        counts[b] = labels.size();
        fits[b] = fit_temperature_on(logits, labels);
    });

    ReCalXCalibrator calib;
    calib.bins = bins;
    calib.edges = ReCalXCalibrator::uniform_edges(bins);
    calib.temperatures.assign(static_cast<std::size_t>(bins), 1.0);
    calib.strategy_name = strategy.name;
    calib.validation_size = n;
    calib.bin_counts = counts;
    calib.seed = seed;

    FitReport report;
    report.strategy_name = strategy.name;
    report.validation_size = n;
    report.reps_per_point = reps_per_point;
    report.seed = seed;
    report.bins.resize(static_cast<std::size_t>(bins));

    for (int b = 0; b < bins; ++b) {
        BinFit& entry = report.bins[static_cast<std::size_t>(b)];
        entry.bin = b;
        entry.coalition_sizes = sizes_per_bin[static_cast<std::size_t>(b)];
        if (fits[static_cast<std::size_t>(b)].has_value()) {
            const TemperatureFit& tf = *fits[static_cast<std::size_t>(b)];
            entry.samples = counts[static_cast<std::size_t>(b)];
            entry.temperature = tf.temperature;
            entry.ce_before = tf.ce_before;
            entry.ce_after = tf.ce_after;
            entry.boundary_warning = tf.boundary_warning;
            entry.flat_objective = tf.flat_objective;
            entry.trace = tf.trace;
            calib.temperatures[static_cast<std::size_t>(b)] = tf.temperature;
        }
    }
    // Bins with no achievable |S| value (possible when bins > d + 1) inherit
    // the temperature of the nearest fitted bin; ties resolve downward.
    for (int b = 0; b < bins; ++b) {
        if (fits[static_cast<std::size_t>(b)].has_value()) continue;
        int best = -1;
        for (int other = 0; other < bins; ++other) {
            if (!fits[static_cast<std::size_t>(other)].has_value()) continue;
            if (best < 0 || std::abs(other - b) < std::abs(best - b)) best = other;
        }
        require(best >= 0, ErrorCode::numeric, "fit_recalx: no bin has achievable sizes");
        calib.temperatures[static_cast<std::size_t>(b)] =
            calib.temperatures[static_cast<std::size_t>(best)];
        report.bins[static_cast<std::size_t>(b)].inherited = true;
        report.bins[static_cast<std::size_t>(b)].temperature =
            calib.temperatures[static_cast<std::size_t>(b)];
    }

    calib.validate();
    return {std::move(calib), std::move(report)};
}

}  // namespace recalx
