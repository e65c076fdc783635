// Exercises the shared-library C interface end to end: happy paths, error
// mapping, and handle ownership. Links against the C API, not the core.
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "recalx.h"

namespace {

// RAII helpers so failed REQUIREs cannot leak handles across subcases.
template <typename T, void (*FreeFn)(T*)>
struct Owned {
    T* p = nullptr;
    ~Owned() { FreeFn(p); }
    T** slot() { return &p; }
};

struct OwnedStr {
    char* p = nullptr;
    ~OwnedStr() { recalx_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

using DatasetH = Owned<recalx_dataset, recalx_dataset_free>;
using JointH = Owned<recalx_joint, recalx_joint_free>;
using StrategyH = Owned<recalx_strategy, recalx_strategy_free>;
using ModelH = Owned<recalx_model, recalx_model_free>;
using CalibratorH = Owned<recalx_calibrator, recalx_calibrator_free>;

const char* kPlantedSpec = R"({"version":1,"kind":"planted","w":[2,1,0]})";

}  // namespace

TEST_CASE("version string and seed derivation") {
    CHECK(std::string(recalx_version()) == "1.0.0");
    const uint64_t a = recalx_derive_seed(7, "fit");
    const uint64_t b = recalx_derive_seed(7, "fit");
    const uint64_t c = recalx_derive_seed(7, "explain");
    const uint64_t d = recalx_derive_seed(8, "fit");
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a != d);
}

TEST_CASE("null arguments map to RECALX_E_INVALID_ARGUMENT with a message") {
    DatasetH ds;
    const recalx_status st = recalx_dataset_load_csv(nullptr, "label", 2, ds.slot(), nullptr);
    CHECK(st == RECALX_E_INVALID_ARGUMENT);
    CHECK(ds.p == nullptr);
    CHECK(std::strlen(recalx_last_error()) > 0);
}

TEST_CASE("malformed json maps to RECALX_E_PARSE") {
    JointH j;
    CHECK(recalx_joint_from_json("{not json", j.slot()) == RECALX_E_PARSE);
    StrategyH s;
    CHECK(recalx_strategy_from_json("[]", s.slot()) == RECALX_E_PARSE);
    ModelH m;
    CHECK(recalx_model_from_json("{}", m.slot()) == RECALX_E_PARSE);
}

TEST_CASE("missing file maps to RECALX_E_IO") {
    DatasetH ds;
    const recalx_status st =
        recalx_dataset_load_csv("/nonexistent/nowhere.csv", "label", 2, ds.slot(), nullptr);
    CHECK(st == RECALX_E_IO);
    CHECK(std::string(recalx_last_error()).find("nowhere") != std::string::npos);
}

TEST_CASE("workers must be positive") {
    CHECK(recalx_set_workers(0) == RECALX_E_INVALID_ARGUMENT);
    CHECK(recalx_set_workers(1) == RECALX_OK);
}

TEST_CASE("generate, inspect, split, and standardize a dataset") {
    DatasetH ds;
    const recalx_status st = recalx_dataset_generate(kPlantedSpec, 200, 5, ds.slot(), nullptr);
    REQUIRE(st == RECALX_OK);
    REQUIRE(ds.p != nullptr);
    CHECK(recalx_dataset_rows(ds.p) == 200);
    CHECK(recalx_dataset_dim(ds.p) == 3);
    CHECK(recalx_dataset_classes(ds.p) == 2);
    CHECK(std::string(recalx_dataset_feature_name(ds.p, 0)) == "f0");
    CHECK(recalx_dataset_feature_name(ds.p, 9) == nullptr);

    double row[3];
    int label = -1;
    REQUIRE(recalx_dataset_row(ds.p, 0, row, &label) == RECALX_OK);
    CHECK((label == 0 || label == 1));
    CHECK(recalx_dataset_row(ds.p, 200, row, &label) == RECALX_E_INVALID_ARGUMENT);

    DatasetH train, val, test;
    REQUIRE(recalx_dataset_split(ds.p, 0.8, 0.1, 0.1, 3, train.slot(), val.slot(), test.slot()) ==
            RECALX_OK);
    CHECK(recalx_dataset_rows(train.p) == 160);
    CHECK(recalx_dataset_rows(val.p) == 20);
    CHECK(recalx_dataset_rows(test.p) == 20);

    recalx_dataset* targets[2] = {train.p, test.p};
    CHECK(recalx_dataset_standardize(train.p, targets, 2) == RECALX_OK);

    // Fractions that do not sum to 1 are rejected.
    DatasetH t2, v2, s2;
    CHECK(recalx_dataset_split(ds.p, 0.5, 0.1, 0.1, 3, t2.slot(), v2.slot(), s2.slot()) ==
          RECALX_E_INVALID_ARGUMENT);
}

TEST_CASE("train, predict, calibrate, and persist through the C boundary") {
    DatasetH ds;
    REQUIRE(recalx_dataset_generate(kPlantedSpec, 600, 11, ds.slot(), nullptr) == RECALX_OK);
    DatasetH train, val, test;
    REQUIRE(recalx_dataset_split(ds.p, 0.6, 0.2, 0.2, 1, train.slot(), val.slot(), test.slot()) ==
            RECALX_OK);

    ModelH model;
    REQUIRE(recalx_model_train_mlp(train.p, R"({"hidden_sizes":[8],"epochs":10,"seed":4})",
                                   model.slot()) == RECALX_OK);
    CHECK(recalx_model_classes(model.p) == 2);
    CHECK(recalx_model_input_dim(model.p) == 3);

    // Full-coalition prediction: strategy may be NULL; probs form a simplex.
    const double x[3] = {0.5, -0.2, 1.0};
    double probs[2] = {0.0, 0.0};
    REQUIRE(recalx_model_predict(model.p, nullptr, x, 3, 0x7, nullptr, 0, probs) == RECALX_OK);
    CHECK(probs[0] > 0.0);
    CHECK(probs[1] > 0.0);
    CHECK(std::abs(probs[0] + probs[1] - 1.0) < 1e-12);

    // A strict sub-coalition without a strategy is an error.
    CHECK(recalx_model_predict(model.p, nullptr, x, 3, 0x3, nullptr, 0, probs) ==
          RECALX_E_INVALID_ARGUMENT);

    StrategyH zero;
    REQUIRE(recalx_strategy_from_json(R"({"kind":"zero-baseline"})", zero.slot()) == RECALX_OK);
    REQUIRE(recalx_model_predict(model.p, nullptr, x, 3, 0x3, zero.p, 0, probs) == RECALX_OK);
    CHECK(std::abs(probs[0] + probs[1] - 1.0) < 1e-12);

    // Plain temperature scaling packages as a one-bin calibrator.
    CalibratorH ts;
    OwnedStr ts_report;
    REQUIRE(recalx_fit_temperature(model.p, val.p, 2, ts.slot(), &ts_report.p) == RECALX_OK);
    CHECK(ts_report.str().find("unperturbed") != std::string::npos);
    double t_level0 = 0.0, t_level1 = 0.0;
    REQUIRE(recalx_calibrator_temperature(ts.p, 0.0, &t_level0) == RECALX_OK);
    REQUIRE(recalx_calibrator_temperature(ts.p, 1.0, &t_level1) == RECALX_OK);
    CHECK(t_level0 == t_level1);  // one bin covers every level
    CHECK(recalx_calibrator_temperature(ts.p, 1.5, &t_level1) == RECALX_E_INVALID_ARGUMENT);

    // Per-level recalibration with a real strategy.
    CalibratorH recal;
    OwnedStr fit_report;
    REQUIRE(recalx_fit_recalx(model.p, val.p, zero.p, 4, 2, 3, recal.slot(), &fit_report.p) ==
            RECALX_OK);
    CHECK(fit_report.str().find("\"bins\"") != std::string::npos);

    // Calibrated prediction differs from raw once temperatures move off 1.
    double probs_cal[2];
    REQUIRE(recalx_model_predict(model.p, recal.p, x, 3, 0x1, zero.p, 0, probs_cal) == RECALX_OK);
    CHECK(std::abs(probs_cal[0] + probs_cal[1] - 1.0) < 1e-12);

    // Round trips: model and calibrator JSON reload to identical dumps.
    OwnedStr mjson;
    REQUIRE(recalx_model_to_json(model.p, &mjson.p) == RECALX_OK);
    ModelH reloaded;
    REQUIRE(recalx_model_from_json(mjson.p, reloaded.slot()) == RECALX_OK);
    OwnedStr mjson2;
    REQUIRE(recalx_model_to_json(reloaded.p, &mjson2.p) == RECALX_OK);
    CHECK(mjson.str() == mjson2.str());

    OwnedStr cjson;
    REQUIRE(recalx_calibrator_to_json(recal.p, &cjson.p) == RECALX_OK);
    CalibratorH creload;
    REQUIRE(recalx_calibrator_from_json(cjson.p, creload.slot()) == RECALX_OK);
    OwnedStr cjson2;
    REQUIRE(recalx_calibrator_to_json(creload.p, &cjson2.p) == RECALX_OK);
    CHECK(cjson.str() == cjson2.str());

    // Identical prediction from the reloaded pair (weights survive as text).
    double probs_reload[2];
    REQUIRE(recalx_model_predict(reloaded.p, creload.p, x, 3, 0x1, zero.p, 0, probs_reload) ==
            RECALX_OK);
    CHECK(probs_reload[0] == probs_cal[0]);
    CHECK(probs_reload[1] == probs_cal[1]);
}

TEST_CASE("oracle models support exact decomposition and refuse serialization") {
    // Two-feature binary joint, uniform over x, P(y=1|x) = 0.2 + 0.5 x0.
    const char* joint_json = R"({
        "version": 1, "n_classes": 2,
        "xs": [[0,0],[0,0],[1,0],[1,0],[0,1],[0,1],[1,1],[1,1]],
        "ys": [0, 1, 0, 1, 0, 1, 0, 1],
        "probs": [0.2, 0.05, 0.075, 0.175, 0.2, 0.05, 0.075, 0.175]
    })";
    JointH joint;
    REQUIRE(recalx_joint_from_json(joint_json, joint.slot()) == RECALX_OK);

    StrategyH zero;
    REQUIRE(recalx_strategy_from_json(R"({"kind":"zero-baseline"})", zero.slot()) == RECALX_OK);

    ModelH oracle;
    REQUIRE(recalx_model_oracle(joint.p, zero.p, oracle.slot()) == RECALX_OK);
    CHECK(recalx_model_classes(oracle.p) == 2);

    OwnedStr json;
    CHECK(recalx_model_to_json(oracle.p, &json.p) == RECALX_E_UNSUPPORTED);

    OwnedStr decomp;
    REQUIRE(recalx_decomposition_exact(oracle.p, nullptr, joint.p, 0x1, 2, zero.p, &decomp.p) ==
            RECALX_OK);
    const std::string d = decomp.str();
    CHECK(d.find("\"predictive_power\"") != std::string::npos);
    CHECK(d.find("\"residual\"") != std::string::npos);

    // Scaled variants stay usable as models.
    ModelH scaled;
    REQUIRE(recalx_model_scale_logits(oracle.p, 3.0, scaled.slot()) == RECALX_OK);
    ModelH level_scaled;
    REQUIRE(recalx_model_scale_logits_above(oracle.p, 3.0, 0.5, level_scaled.slot()) == RECALX_OK);
    OwnedStr drift;
    REQUIRE(recalx_drift_bound(joint.p, scaled.p, zero.p, 0.1, 20, 7, &drift.p) == RECALX_OK);
    CHECK(drift.str().find("\"violation_rate\"") != std::string::npos);
}

TEST_CASE("explanations and profiles through the C boundary") {
    DatasetH ds;
    REQUIRE(recalx_dataset_generate(kPlantedSpec, 300, 21, ds.slot(), nullptr) == RECALX_OK);
    ModelH model;
    REQUIRE(recalx_model_train_mlp(ds.p, R"({"hidden_sizes":[6],"epochs":10,"seed":2})",
                                   model.slot()) == RECALX_OK);
    StrategyH mean;
    REQUIRE(recalx_strategy_mean_from_dataset(ds.p, mean.slot()) == RECALX_OK);
    OwnedStr mean_json;
    REQUIRE(recalx_strategy_to_json(mean.p, &mean_json.p) == RECALX_OK);
    CHECK(mean_json.str().find("mean-replacement") != std::string::npos);

    const double x[3] = {1.0, 0.5, -0.5};
    double values[3];
    double base = 0.0;
    int target = -2;
    REQUIRE(recalx_explain_one(model.p, nullptr, x, 3, -1, "shapley", mean.p, nullptr, 5, values,
                               &base, &target) == RECALX_OK);
    CHECK((target == 0 || target == 1));
    CHECK(base > 0.0);
    CHECK(base < 1.0);

    CHECK(recalx_explain_one(model.p, nullptr, x, 3, -1, "saliency", mean.p, nullptr, 5, values,
                             &base, &target) == RECALX_E_INVALID_ARGUMENT);
    CHECK(std::string(recalx_last_error()).find("saliency") != std::string::npos);

    int ranking[3] = {-1, -1, -1};
    OwnedStr gjson;
    REQUIRE(recalx_global_importance(model.p, nullptr, ds.p, "ablation", mean.p, 20, nullptr, 9,
                                     &gjson.p, ranking) == RECALX_OK);
    CHECK(gjson.str().find("\"ranking\"") != std::string::npos);
    bool seen[3] = {false, false, false};
    for (int r : ranking) {
        REQUIRE(r >= 0);
        REQUIRE(r < 3);
        seen[r] = true;
    }
    CHECK((seen[0] && seen[1] && seen[2]));

    const double levels[3] = {0.0, 0.5, 1.0};
    OwnedStr pjson, pcsv;
    REQUIRE(recalx_profile(model.p, nullptr, ds.p, mean.p, levels, 3, 2, 13,
                           R"({"kind":"kernel","bandwidth":0.05})", &pjson.p, &pcsv.p) ==
            RECALX_OK);
    CHECK(pjson.str().find("\"ce_max\"") != std::string::npos);
    CHECK(pcsv.str().find("level,ce") != std::string::npos);

    OwnedStr sjson;
    REQUIRE(recalx_sensitivity(model.p, nullptr, ds.p, "ablation", mean.p, nullptr, 0.05, 3, 5,
                               17, &sjson.p) == RECALX_OK);
    CHECK(sjson.str().find("\"mean_s_max\"") != std::string::npos);
}

TEST_CASE("roar through the C boundary") {
    DatasetH ds;
    REQUIRE(recalx_dataset_generate(kPlantedSpec, 400, 31, ds.slot(), nullptr) == RECALX_OK);
    const int ranking[3] = {0, 1, 2};
    const int ks[2] = {0, 1};
    const uint64_t seeds[2] = {1, 2};
    OwnedStr rjson, rcsv;
    REQUIRE(recalx_roar(ds.p, ranking, 3, ks, 2, R"({"epochs":8,"hidden_sizes":[4]})", seeds, 2,
                        5, &rjson.p, &rcsv.p) == RECALX_OK);
    CHECK(rjson.str().find("\"mean_loss\"") != std::string::npos);
    CHECK(rcsv.str().find("k,mean_loss") != std::string::npos);

    const int bad_ranking[3] = {0, 0, 1};
    OwnedStr j2, c2;
    CHECK(recalx_roar(ds.p, bad_ranking, 3, ks, 2, nullptr, seeds, 2, 5, &j2.p, &c2.p) ==
          RECALX_E_INVALID_ARGUMENT);
}
