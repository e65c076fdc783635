#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "recalx/error.hpp"
#include "recalx/explainers.hpp"
#include "recalx/model.hpp"
#include "recalx/numeric.hpp"
#include "recalx/rng.hpp"

using recalx::AttributionMethod;
using recalx::AttributionVector;
using recalx::Coalition;
using recalx::Error;
using recalx::ExplainParams;
using recalx::PerturbationStrategy;
using recalx::ValueFunction;

namespace {

// Classifier whose class-0 probability is an arbitrary function of which
// coordinates survived. With strictly nonzero inputs and the zero baseline, a
// zero coordinate marks a dropped feature, so the coalition is recoverable
// from the perturbed point alone. softmax(log p, log(1-p)) = (p, 1-p), so the
// game value round-trips exactly (up to ~1 ulp).
class MaskGameClassifier final : public recalx::Classifier {
public:
    MaskGameClassifier(int d, std::function<double(std::uint64_t)> game)
        : d_(d), game_(std::move(game)) {}

    int n_classes() const override { return 2; }
    int input_dim() const override { return d_; }
    std::vector<double> logits(std::span<const double> x) const override {
        std::uint64_t mask = 0;
        for (int i = 0; i < d_; ++i) {
            if (x[static_cast<std::size_t>(i)] != 0.0) mask |= std::uint64_t{1} << i;
        }
        const double p = game_(mask);
        return {std::log(p), std::log(1.0 - p)};
    }

private:
    int d_;
    std::function<double(std::uint64_t)> game_;
};

std::vector<double> nonzero_point(int d) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] = static_cast<double>(i + 1);
    return x;
}

// Pseudo-random but deterministic game values in [0.05, 0.95].
double hashed_game_value(std::uint64_t game_seed, std::uint64_t mask) {
    const double u =
        static_cast<double>(recalx::mix64(game_seed, mask) >> 11) * 0x1.0p-53;
    return 0.05 + 0.9 * u;
}

std::vector<double> game_table(std::uint64_t game_seed, int d) {
    std::vector<double> table(std::size_t{1} << d);
    for (std::uint64_t mask = 0; mask < table.size(); ++mask) {
        table[mask] = hashed_game_value(game_seed, mask);
    }
    return table;
}

}  // namespace

TEST_CASE("value function caches one evaluation per distinct coalition") {
    int calls = 0;
    const MaskGameClassifier m(3, [&](std::uint64_t mask) {
        ++calls;
        return 0.1 + 0.1 * static_cast<double>(std::popcount(mask));
    });
    const auto x = nonzero_point(3);
    ValueFunction v(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);

    const Coalition s = Coalition::of({0, 2}, 3);
    const double first = v(s);
    const double second = v(s);
    CHECK(first == second);
    CHECK(first == doctest::Approx(0.3));
    CHECK(v.evaluations() == 1);
    CHECK(calls == 1);

    CHECK(v.empty_value() == doctest::Approx(0.1));
    CHECK(v.full_value() == doctest::Approx(0.4));
    CHECK(v.evaluations() == 3);

    // prefetch only evaluates what is missing.
    const std::vector<Coalition> batch = {s, Coalition::of({1}, 3), Coalition::empty(3)};
    v.prefetch(batch);
    CHECK(v.evaluations() == 4);
}

TEST_CASE("shapley on an additive game returns the per-feature increments") {
    const std::vector<double> w = {0.12, 0.04, 0.3, 0.0};
    const MaskGameClassifier m(4, [&](std::uint64_t mask) {
        double p = 0.05;
        for (int i = 0; i < 4; ++i) {
            if (mask & (std::uint64_t{1} << i)) p += w[static_cast<std::size_t>(i)];
        }
        return p;
    });
    const auto x = nonzero_point(4);
    const AttributionVector a =
        recalx::shapley(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);
    REQUIRE(a.values.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.values[i] == doctest::Approx(w[i]).epsilon(1e-9));
    CHECK(a.base_value == doctest::Approx(0.05));
    CHECK(a.method == "shapley");
    CHECK(a.target_class == 0);
}

TEST_CASE("shapley on a symmetric game splits the value equally") {
    const MaskGameClassifier m(5, [](std::uint64_t mask) {
        return 0.1 + 0.15 * static_cast<double>(std::popcount(mask));
    });
    const auto x = nonzero_point(5);
    const AttributionVector a =
        recalx::shapley(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);
    for (double phi : a.values) CHECK(phi == doctest::Approx(0.15).epsilon(1e-9));
}

TEST_CASE("shapley gives a dummy player exactly zero") {
    // The game ignores feature 2 entirely.
    const MaskGameClassifier m(4, [](std::uint64_t mask) {
        return hashed_game_value(77, mask & ~std::uint64_t{4});
    });
    const auto x = nonzero_point(4);
    const AttributionVector a =
        recalx::shapley(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);
    CHECK(std::abs(a.values[2]) <= 1e-12);
}

TEST_CASE("shapley matches the permutation definition on random games") {
    for (const auto& [game_seed, d] : {std::pair<std::uint64_t, int>{101, 4}, {202, 5}}) {
        const auto table = game_table(game_seed, d);
        const MaskGameClassifier m(d, [&](std::uint64_t mask) { return table[mask]; });
        const auto x = nonzero_point(d);

        const AttributionVector lib =
            recalx::shapley(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);
        const auto ref = recalx::test::shapley_by_permutations(table, d);
        REQUIRE(lib.values.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CAPTURE(game_seed);
            CAPTURE(i);
            CHECK(lib.values[i] == doctest::Approx(ref[i]).epsilon(1e-8));
        }
    }
}

TEST_CASE("shapley values satisfy efficiency on random games") {
    recalx::Rng pick(9);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 3 + static_cast<int>(pick.below(6));  // 3..8
        const std::uint64_t game_seed = pick.next_u64();
        const MaskGameClassifier m(
            d, [&](std::uint64_t mask) { return hashed_game_value(game_seed, mask); });
        const auto x = nonzero_point(d);

        ValueFunction v(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);
        const auto phi = recalx::shapley_exact(v);
        const double total = recalx::pairwise_sum(phi);
        CAPTURE(trial);
        CHECK(std::abs(total - (v.full_value() - v.empty_value())) <= 1e-8);
    }
}

TEST_CASE("kernel shap with full enumeration reproduces exact shapley") {
    for (int d : {4, 6, 8}) {
        const std::uint64_t game_seed = 500 + static_cast<std::uint64_t>(d);
        const MaskGameClassifier m(
            d, [&](std::uint64_t mask) { return hashed_game_value(game_seed, mask); });
        const auto x = nonzero_point(d);

        const AttributionVector exact =
            recalx::shapley(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);
        const std::size_t all = (std::size_t{1} << d) - 2;
        const AttributionVector ks =
            recalx::kernel_shap(m, nullptr, x, 0, PerturbationStrategy::zero(), all, 0);
        CHECK(ks.method == "kernelshap");
        for (std::size_t i = 0; i < exact.values.size(); ++i) {
            CAPTURE(d);
            CAPTURE(i);
            CHECK(std::abs(ks.values[i] - exact.values[i]) <= 1e-6);
        }
    }
}

TEST_CASE("sampled kernel shap stays close to exact and respects efficiency") {
    const int d = 10;  // 2^10 - 2 coalitions; sample far fewer
    const auto table = game_table(31, d);
    const MaskGameClassifier m(d, [&](std::uint64_t mask) { return table[mask]; });
    const auto x = nonzero_point(d);

    const AttributionVector exact =
        recalx::shapley(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);
    const AttributionVector ks =
        recalx::kernel_shap(m, nullptr, x, 0, PerturbationStrategy::zero(), 400, 3);
    // Efficiency is built in by substitution, so it holds even for samples.
    double sum_ks = 0.0, sum_exact = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        sum_ks += ks.values[i];
        sum_exact += exact.values[i];
    }
    CHECK(sum_ks == doctest::Approx(sum_exact).epsilon(1e-9));
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(ks.values[i] == doctest::Approx(exact.values[i]).epsilon(0.15));
    }
}

TEST_CASE("kernel shap rejects too few samples") {
    const MaskGameClassifier m(5, [](std::uint64_t mask) { return hashed_game_value(1, mask); });
    const auto x = nonzero_point(5);
    CHECK_THROWS_AS(recalx::kernel_shap(m, nullptr, x, 0, PerturbationStrategy::zero(), 6, 0),
                    Error);  // needs at least d + 2 = 7
    CHECK_NOTHROW(recalx::kernel_shap(m, nullptr, x, 0, PerturbationStrategy::zero(), 30, 0));
}

TEST_CASE("lime recovers the coefficients of an additive game") {
    const std::vector<double> w = {0.2, -0.05, 0.1};
    const MaskGameClassifier m(3, [&](std::uint64_t mask) {
        double p = 0.3;
        for (int i = 0; i < 3; ++i) {
            if (mask & (std::uint64_t{1} << i)) p += w[static_cast<std::size_t>(i)];
        }
        return p;
    });
    const auto x = nonzero_point(3);
    // Full enumeration (n_samples >= 2^d) and tiny ridge: the weighted least
    // squares on a linear target recovers it almost exactly.
    const AttributionVector a =
        recalx::lime(m, nullptr, x, 0, PerturbationStrategy::zero(), 8, 0.0, 1e-9, 0);
    CHECK(a.method == "lime");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.values[i] == doctest::Approx(w[i]).epsilon(1e-4));
    }
}

TEST_CASE("lime validates its arguments") {
    const MaskGameClassifier m(4, [](std::uint64_t mask) { return hashed_game_value(2, mask); });
    const auto x = nonzero_point(4);
    CHECK_THROWS_AS(recalx::lime(m, nullptr, x, 0, PerturbationStrategy::zero(), 3, 0.0, 1e-3, 0),
                    Error);  // n_samples < d + 2
    CHECK_THROWS_AS(recalx::lime(m, nullptr, x, 0, PerturbationStrategy::zero(), 16, 0.0, -1.0, 0),
                    Error);  // negative ridge
}

TEST_CASE("feature ablation reports the per-feature drop from full") {
    const auto table = game_table(61, 3);
    const MaskGameClassifier m(3, [&](std::uint64_t mask) { return table[mask]; });
    const auto x = nonzero_point(3);
    const AttributionVector a =
        recalx::feature_ablation(m, nullptr, x, 0, PerturbationStrategy::zero(), 0);
    CHECK(a.method == "ablation");
    const double v_full = table[7];
    CHECK(a.values[0] == doctest::Approx(v_full - table[0b110]).epsilon(1e-12));
    CHECK(a.values[1] == doctest::Approx(v_full - table[0b101]).epsilon(1e-12));
    CHECK(a.values[2] == doctest::Approx(v_full - table[0b011]).epsilon(1e-12));
    CHECK(a.base_value == doctest::Approx(table[0]).epsilon(1e-12));
}

TEST_CASE("attribution method names round trip and errors list the options") {
    using recalx::attribution_method_from_name;
    using recalx::attribution_method_name;
    for (auto method : {AttributionMethod::shapley, AttributionMethod::kernelshap,
                        AttributionMethod::lime, AttributionMethod::ablation}) {
        CHECK(attribution_method_from_name(attribution_method_name(method)) == method);
    }
    try {
        (void)attribution_method_from_name("gradcam");
        FAIL("expected an error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("gradcam") != std::string::npos);
        CHECK(msg.find("shapley") != std::string::npos);
        CHECK(msg.find("kernelshap") != std::string::npos);
        CHECK(msg.find("lime") != std::string::npos);
        CHECK(msg.find("ablation") != std::string::npos);
    }
}

TEST_CASE("explain_one dispatches on the method and stamps provenance") {
    const MaskGameClassifier m(3, [](std::uint64_t mask) { return hashed_game_value(3, mask); });
    const auto x = nonzero_point(3);
    ExplainParams params;
    params.n_samples = 64;
    for (auto method : {AttributionMethod::shapley, AttributionMethod::kernelshap,
                        AttributionMethod::lime, AttributionMethod::ablation}) {
        const AttributionVector a = recalx::explain_one(m, nullptr, x, 0, method,
                                                        PerturbationStrategy::zero(), 5, params);
        CHECK(a.method == recalx::attribution_method_name(method));
        CHECK(a.values.size() == 3);
        CHECK(a.strategy_name == "zero-baseline");
        CHECK(a.seed == 5);
        CHECK_FALSE(a.calibrated);
    }
}

TEST_CASE("explain_one is deterministic in the seed") {
    const MaskGameClassifier m(6, [](std::uint64_t mask) { return hashed_game_value(4, mask); });
    const auto x = nonzero_point(6);
    ExplainParams params;
    params.n_samples = 20;
    const auto a = recalx::explain_one(m, nullptr, x, 0, AttributionMethod::kernelshap,
                                       PerturbationStrategy::zero(), 11, params);
    const auto b = recalx::explain_one(m, nullptr, x, 0, AttributionMethod::kernelshap,
                                       PerturbationStrategy::zero(), 11, params);
    CHECK(a.values == b.values);
    const auto c = recalx::explain_one(m, nullptr, x, 0, AttributionMethod::kernelshap,
                                       PerturbationStrategy::zero(), 12, params);
    CHECK(a.values != c.values);
}

TEST_CASE("global importance ranks by mean absolute attribution with index ties") {
    // Additive game: |phi_i| = w_i at every sample, so the ranking is exact.
    const std::vector<double> w = {0.1, 0.3, 0.1, 0.0};
    const MaskGameClassifier m(4, [&](std::uint64_t mask) {
        double p = 0.05;
        for (int i = 0; i < 4; ++i) {
            if (mask & (std::uint64_t{1} << i)) p += w[static_cast<std::size_t>(i)];
        }
        return p;
    });

    recalx::Dataset data;
    data.n_classes = 2;
    data.feature_names = {"a", "b", "c", "d"};
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 4; ++c) data.features.push_back(static_cast<double>(c + 1));
        data.labels.push_back(r % 2);
    }

    const auto g =
        recalx::global_importance(m, nullptr, data, AttributionMethod::shapley,
                                  PerturbationStrategy::zero(), 5, 0, ExplainParams{});
    CHECK(g.n_explained == 5);
    CHECK(g.method == "shapley");
    REQUIRE(g.mean_abs.size() == 4);
    CHECK(g.mean_abs[1] == doctest::Approx(0.3).epsilon(1e-9));
    // Descending mean |phi|; the w_0 = w_2 tie resolves to the lower index.
    CHECK(g.ranking == std::vector<int>{1, 0, 2, 3});

    CHECK_THROWS_AS(recalx::global_importance(m, nullptr, data, AttributionMethod::shapley,
                                              PerturbationStrategy::zero(), 9, 0,
                                              ExplainParams{}),
                    Error);  // n_explain > n
}
