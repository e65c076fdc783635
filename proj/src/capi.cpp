#include "recalx.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "recalx/calibration.hpp"
#include "recalx/dataset.hpp"
#include "recalx/error.hpp"
#include "recalx/evaluation.hpp"
#include "recalx/explainers.hpp"
#include "recalx/metrics.hpp"
#include "recalx/model.hpp"
#include "recalx/numeric.hpp"
#include "recalx/parallel.hpp"
#include "recalx/perturbation.hpp"
#include "recalx/rng.hpp"
#include "recalx/serialize.hpp"

struct recalx_dataset {
    recalx::Dataset ds;
};
struct recalx_joint {
    recalx::FiniteJoint j;
};
struct recalx_strategy {
    recalx::PerturbationStrategy s;
};
struct recalx_model {
    std::shared_ptr<const recalx::Classifier> impl;
    // Set when the underlying classifier is an MLP; needed for persistence.
    const recalx::MlpClassifier* mlp = nullptr;
};
struct recalx_calibrator {
    recalx::ReCalXCalibrator c;
};

namespace {

using recalx::Error;
using recalx::ErrorCode;
using recalx::fail;
using recalx::require;
using nlohmann::json;

thread_local std::string g_last_error;

recalx_status to_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return RECALX_E_INVALID_ARGUMENT;
        case ErrorCode::io: return RECALX_E_IO;
        case ErrorCode::parse: return RECALX_E_PARSE;
        case ErrorCode::domain: return RECALX_E_DOMAIN;
        case ErrorCode::numeric: return RECALX_E_NUMERIC;
        case ErrorCode::unsupported: return RECALX_E_UNSUPPORTED;
    }
    return RECALX_E_INTERNAL;
}

template <typename Fn>
recalx_status guarded(Fn&& fn) noexcept {
    try {
        fn();
        g_last_error.clear();
        return RECALX_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RECALX_E_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return RECALX_E_INTERNAL;
    }
}

// Null-pointer contract checks, reported like any other invalid argument.
void req_arg(const void* p, const char* name) {
    require(p != nullptr, ErrorCode::invalid_argument, std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    require(out != nullptr, ErrorCode::io, "out of memory");
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit_string(char** slot, const std::string& value) {
    if (slot != nullptr) *slot = dup_string(value);
}

json parse_bundle(const char* text, const char* what) {
    if (text == nullptr) return json::object();
    try {
        json j = json::parse(text);
        require(j.is_object(), ErrorCode::parse, std::string(what) + ": expected a JSON object");
        return j;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string(what) + ": " + e.what());
    }
}

recalx::TrainConfig parse_train_config(const char* text) {
    json j = parse_bundle(text, "train config");
    recalx::TrainConfig cfg;
    try {
        if (j.contains("hidden_sizes")) cfg.hidden_sizes = j["hidden_sizes"].get<std::vector<int>>();
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.momentum = j.value("momentum", cfg.momentum);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string("train config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

recalx::ConditionalEstimatorSpec parse_estimator(const char* text) {
    json j = parse_bundle(text, "estimator");
    recalx::ConditionalEstimatorSpec spec;
    try {
        const std::string kind = j.value("kind", "exact-groupby");
        if (kind == "exact-groupby") {
            spec.kind = recalx::ConditionalEstimatorSpec::Kind::exact_groupby;
        } else if (kind == "kernel") {
            spec.kind = recalx::ConditionalEstimatorSpec::Kind::kernel;
        } else {
            fail(ErrorCode::parse,
                 "estimator: unknown kind '" + kind + "' (valid: exact-groupby, kernel)");
        }
        spec.bandwidth = j.value("bandwidth", spec.bandwidth);
        spec.leave_one_out = j.value("leave_one_out", spec.leave_one_out);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string("estimator: ") + e.what());
    }
    spec.validate();
    return spec;
}

recalx::ExplainParams parse_explain_params(const char* text) {
    json j = parse_bundle(text, "explain params");
    recalx::ExplainParams p;
    try {
        p.n_samples = j.value("n_samples", p.n_samples);
        p.lime_kernel_width = j.value("lime_kernel_width", p.lime_kernel_width);
        p.lime_ridge = j.value("lime_ridge", p.lime_ridge);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string("explain params: ") + e.what());
    }
    return p;
}

const recalx::ReCalXCalibrator* calib_of(const recalx_calibrator* c) {
    return c == nullptr ? nullptr : &c->c;
}

recalx_model* wrap_model(std::shared_ptr<const recalx::Classifier> impl) {
    auto* out = new recalx_model;
    out->impl = std::move(impl);
    out->mlp = dynamic_cast<const recalx::MlpClassifier*>(out->impl.get());
    return out;
}

int resolve_target(const recalx::Classifier& m, std::span<const double> x, int target_class) {
    if (target_class >= 0) return target_class;
    return recalx::argmax(m.logits(x));
}

}  // namespace

extern "C" {

const char* recalx_version(void) { return "1.0.0"; }

const char* recalx_last_error(void) { return g_last_error.c_str(); }

void recalx_string_free(char* s) { std::free(s); }

recalx_status recalx_set_workers(int n) {
    return guarded([&] { recalx::set_worker_count(n); });
}

uint64_t recalx_derive_seed(uint64_t base, const char* label) {
    return recalx::derive_seed(base, label == nullptr ? "" : label);
}

/* ---- datasets --------------------------------------------------------- */

recalx_status recalx_dataset_load_csv(const char* path, const char* label_column, int n_classes,
                                      recalx_dataset** out, size_t* dropped_rows) {
    return guarded([&] {
        req_arg(path, "path");
        req_arg(out, "out");
        auto loaded = recalx::load_csv_dataset(
            path, label_column == nullptr ? "label" : label_column, n_classes);
        if (dropped_rows != nullptr) *dropped_rows = loaded.rows_dropped;
        *out = new recalx_dataset{std::move(loaded.dataset)};
    });
}

recalx_status recalx_dataset_save_csv(const recalx_dataset* ds, const char* path) {
    return guarded([&] {
        req_arg(ds, "ds");
        req_arg(path, "path");
        recalx::dataset_save_csv(ds->ds, path);
    });
}

recalx_status recalx_dataset_generate(const char* genspec_json, size_t n, uint64_t seed,
                                      recalx_dataset** out_ds, recalx_joint** out_joint) {
    return guarded([&] {
        req_arg(genspec_json, "genspec_json");
        req_arg(out_ds, "out_ds");
        auto spec = recalx::synthetic_spec_from_json(genspec_json);
        auto result = recalx::make_synthetic(spec, n, seed);
        if (out_joint != nullptr)
            *out_joint = result.joint ? new recalx_joint{std::move(*result.joint)} : nullptr;
        *out_ds = new recalx_dataset{std::move(result.dataset)};
    });
}

recalx_status recalx_dataset_split(const recalx_dataset* ds, double train_frac, double val_frac,
                                   double test_frac, uint64_t seed, recalx_dataset** out_train,
                                   recalx_dataset** out_val, recalx_dataset** out_test) {
    return guarded([&] {
        req_arg(ds, "ds");
        req_arg(out_train, "out_train");
        req_arg(out_val, "out_val");
        req_arg(out_test, "out_test");
        recalx::SplitSpec spec;
        spec.train = train_frac;
        spec.val = val_frac;
        spec.test = test_frac;
        spec.seed = seed;
        auto parts = recalx::split(ds->ds, spec);
        *out_train = new recalx_dataset{std::move(parts[0])};
        *out_val = new recalx_dataset{std::move(parts[1])};
        *out_test = new recalx_dataset{std::move(parts[2])};
    });
}

recalx_status recalx_dataset_standardize(const recalx_dataset* fit_on, recalx_dataset** targets,
                                         size_t n_targets) {
    return guarded([&] {
        req_arg(fit_on, "fit_on");
        req_arg(targets, "targets");
        auto stats = recalx::zscore_fit(fit_on->ds);
        for (size_t i = 0; i < n_targets; ++i) {
            req_arg(targets[i], "targets[i]");
            targets[i]->ds = recalx::zscore_apply(targets[i]->ds, stats);
        }
    });
}

size_t recalx_dataset_rows(const recalx_dataset* ds) { return ds == nullptr ? 0 : ds->ds.n(); }

int recalx_dataset_dim(const recalx_dataset* ds) { return ds == nullptr ? 0 : ds->ds.dim(); }

int recalx_dataset_classes(const recalx_dataset* ds) {
    return ds == nullptr ? 0 : ds->ds.n_classes;
}

const char* recalx_dataset_feature_name(const recalx_dataset* ds, int i) {
    if (ds == nullptr || i < 0 || i >= ds->ds.dim()) return nullptr;
    return ds->ds.feature_names[static_cast<size_t>(i)].c_str();
}

recalx_status recalx_dataset_row(const recalx_dataset* ds, size_t i, double* out_features,
                                 int* out_label) {
    return guarded([&] {
        req_arg(ds, "ds");
        require(i < ds->ds.n(), ErrorCode::invalid_argument, "row index out of range");
        if (out_features != nullptr) {
            auto row = ds->ds.row(i);
            std::memcpy(out_features, row.data(), row.size() * sizeof(double));
        }
        if (out_label != nullptr) *out_label = ds->ds.labels[i];
    });
}

void recalx_dataset_free(recalx_dataset* ds) { delete ds; }

/* ---- finite joints ----------------------------------------------------- */

recalx_status recalx_joint_from_json(const char* text, recalx_joint** out) {
    return guarded([&] {
        req_arg(text, "text");
        req_arg(out, "out");
        *out = new recalx_joint{recalx::joint_from_json(text)};
    });
}

recalx_status recalx_joint_to_json(const recalx_joint* j, char** out) {
    return guarded([&] {
        req_arg(j, "j");
        req_arg(out, "out");
        *out = dup_string(recalx::joint_to_json(j->j));
    });
}

void recalx_joint_free(recalx_joint* j) { delete j; }

/* ---- strategies ---------------------------------------------------------- */

recalx_status recalx_strategy_from_json(const char* text, recalx_strategy** out) {
    return guarded([&] {
        req_arg(text, "text");
        req_arg(out, "out");
        *out = new recalx_strategy{recalx::strategy_from_json(text)};
    });
}

recalx_status recalx_strategy_to_json(const recalx_strategy* s, char** out) {
    return guarded([&] {
        req_arg(s, "s");
        req_arg(out, "out");
        *out = dup_string(recalx::strategy_to_json(s->s));
    });
}

recalx_status recalx_strategy_mean_from_dataset(const recalx_dataset* ds, recalx_strategy** out) {
    return guarded([&] {
        req_arg(ds, "ds");
        req_arg(out, "out");
        *out = new recalx_strategy{recalx::PerturbationStrategy::mean(recalx::feature_means(ds->ds))};
    });
}

void recalx_strategy_free(recalx_strategy* s) { delete s; }

/* ---- models ---------------------------------------------------------------- */

recalx_status recalx_model_train_mlp(const recalx_dataset* train, const char* config_json,
                                     recalx_model** out) {
    return guarded([&] {
        req_arg(train, "train");
        req_arg(out, "out");
        auto cfg = parse_train_config(config_json);
        auto mlp = std::make_shared<recalx::MlpClassifier>(recalx::train_mlp(train->ds, cfg));
        *out = wrap_model(std::move(mlp));
    });
}

recalx_status recalx_model_from_json(const char* text, recalx_model** out) {
    return guarded([&] {
        req_arg(text, "text");
        req_arg(out, "out");
        auto mlp = std::make_shared<recalx::MlpClassifier>(recalx::model_from_json(text));
        *out = wrap_model(std::move(mlp));
    });
}

recalx_status recalx_model_to_json(const recalx_model* m, char** out) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(out, "out");
        require(m->mlp != nullptr, ErrorCode::unsupported,
                "only MLP models have a JSON form; oracles and wrappers are rebuilt from their inputs");
        *out = dup_string(recalx::model_to_json(*m->mlp));
    });
}

recalx_status recalx_model_oracle(const recalx_joint* joint, const recalx_strategy* strategy,
                                  recalx_model** out) {
    return guarded([&] {
        req_arg(joint, "joint");
        req_arg(strategy, "strategy");
        req_arg(out, "out");
        *out = wrap_model(std::make_shared<recalx::BayesRestrictedOracle>(joint->j, strategy->s));
    });
}

recalx_status recalx_model_scale_logits(const recalx_model* inner, double factor,
                                        recalx_model** out) {
    return guarded([&] {
        req_arg(inner, "inner");
        req_arg(out, "out");
        *out = wrap_model(std::make_shared<recalx::ScaledLogitsClassifier>(inner->impl, factor));
    });
}

recalx_status recalx_model_scale_logits_above(const recalx_model* inner, double factor,
                                              double level_threshold, recalx_model** out) {
    return guarded([&] {
        req_arg(inner, "inner");
        req_arg(out, "out");
        *out = wrap_model(std::make_shared<recalx::LevelScaledLogitsClassifier>(inner->impl, factor,
                                                                                level_threshold));
    });
}

int recalx_model_classes(const recalx_model* m) {
    return m == nullptr ? 0 : m->impl->n_classes();
}

int recalx_model_input_dim(const recalx_model* m) {
    return m == nullptr ? 0 : m->impl->input_dim();
}

recalx_status recalx_model_predict(const recalx_model* m, const recalx_calibrator* calib,
                                   const double* x, int dim, uint64_t kept_mask,
                                   const recalx_strategy* strategy, uint64_t seed,
                                   double* out_probs) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(x, "x");
        req_arg(out_probs, "out_probs");
        require(dim == m->impl->input_dim(), ErrorCode::invalid_argument,
                "dim does not match the model's input dimension");
        recalx::Coalition s{kept_mask, dim};
        s.validate();
        require(strategy != nullptr || s.is_full(), ErrorCode::invalid_argument,
                "strategy is required unless the coalition keeps every coordinate");
        const recalx::PerturbationStrategy strat =
            strategy != nullptr ? strategy->s : recalx::PerturbationStrategy::zero();
        auto probs = recalx::restricted_predict(*m->impl, calib_of(calib),
                                                std::span<const double>(x, static_cast<size_t>(dim)),
                                                s, strat, seed);
        std::memcpy(out_probs, probs.data(), probs.size() * sizeof(double));
    });
}

void recalx_model_free(recalx_model* m) { delete m; }

/* ---- calibration ------------------------------------------------------------ */

recalx_status recalx_fit_temperature(const recalx_model* m, const recalx_dataset* val,
                                     uint64_t seed, recalx_calibrator** out, char** report_json) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(val, "val");
        req_arg(out, "out");
        auto fit = recalx::fit_temperature(*m->impl, val->ds);

        recalx::ReCalXCalibrator c;
        c.bins = 1;
        c.edges = {0.0, 1.0};
        c.temperatures = {fit.temperature};
        c.strategy_name = "unperturbed";
        c.validation_size = val->ds.n();
        c.bin_counts = {val->ds.n()};
        c.seed = seed;
        c.validate();

        if (report_json != nullptr) {
            recalx::FitReport report;
            recalx::BinFit bin;
            bin.bin = 0;
            bin.samples = val->ds.n();
            bin.temperature = fit.temperature;
            bin.ce_before = fit.ce_before;
            bin.ce_after = fit.ce_after;
            bin.boundary_warning = fit.boundary_warning;
            bin.flat_objective = fit.flat_objective;
            bin.trace = fit.trace;
            report.bins.push_back(std::move(bin));
            report.strategy_name = "unperturbed";
            report.validation_size = val->ds.n();
            report.reps_per_point = 0;
            report.seed = seed;
            report.size_rule = "unperturbed";
            emit_string(report_json, recalx::fit_report_to_json(report));
        }
        *out = new recalx_calibrator{std::move(c)};
    });
}

recalx_status recalx_fit_recalx(const recalx_model* m, const recalx_dataset* val,
                                const recalx_strategy* strategy, int bins, int reps_per_point,
                                uint64_t seed, recalx_calibrator** out, char** report_json) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(val, "val");
        req_arg(strategy, "strategy");
        req_arg(out, "out");
        auto [calib, report] =
            recalx::fit_recalx(*m->impl, val->ds, strategy->s, bins, reps_per_point, seed);
        if (report_json != nullptr) emit_string(report_json, recalx::fit_report_to_json(report));
        *out = new recalx_calibrator{std::move(calib)};
    });
}

recalx_status recalx_calibrator_from_json(const char* text, recalx_calibrator** out) {
    return guarded([&] {
        req_arg(text, "text");
        req_arg(out, "out");
        *out = new recalx_calibrator{recalx::calibrator_from_json(text)};
    });
}

recalx_status recalx_calibrator_to_json(const recalx_calibrator* c, char** out) {
    return guarded([&] {
        req_arg(c, "c");
        req_arg(out, "out");
        *out = dup_string(recalx::calibrator_to_json(c->c));
    });
}

recalx_status recalx_calibrator_temperature(const recalx_calibrator* c, double level,
                                            double* out_temperature) {
    return guarded([&] {
        req_arg(c, "c");
        req_arg(out_temperature, "out_temperature");
        require(level >= 0.0 && level <= 1.0, ErrorCode::invalid_argument,
                "level must lie in [0, 1]");
        *out_temperature = c->c.temperatures[static_cast<size_t>(c->c.bin_of(level))];
    });
}

void recalx_calibrator_free(recalx_calibrator* c) { delete c; }

/* ---- verification metrics ----------------------------------------------------- */

recalx_status recalx_profile(const recalx_model* m, const recalx_calibrator* calib,
                             const recalx_dataset* data, const recalx_strategy* strategy,
                             const double* levels, size_t n_levels, int reps, uint64_t seed,
                             const char* estimator_json, char** out_json, char** out_csv) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(data, "data");
        req_arg(strategy, "strategy");
        req_arg(levels, "levels");
        require(n_levels > 0, ErrorCode::invalid_argument, "n_levels must be positive");
        auto spec = parse_estimator(estimator_json);
        auto profile = recalx::per_level_profile(*m->impl, calib_of(calib), data->ds, strategy->s,
                                                 std::span<const double>(levels, n_levels), reps,
                                                 seed, spec);
        emit_string(out_json, recalx::profile_to_json(profile, strategy->s.name, spec, seed));
        emit_string(out_csv, recalx::profile_to_csv(profile));
    });
}

recalx_status recalx_decomposition_exact(const recalx_model* m, const recalx_calibrator* calib,
                                         const recalx_joint* joint, uint64_t kept_mask, int dim,
                                         const recalx_strategy* strategy, char** out_json) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(joint, "joint");
        req_arg(strategy, "strategy");
        req_arg(out_json, "out_json");
        recalx::Coalition s{kept_mask, dim};
        s.validate();
        auto report =
            recalx::decomposition_report_exact(*m->impl, calib_of(calib), joint->j, s, strategy->s);
        emit_string(out_json, recalx::decomposition_to_json(report));
    });
}

recalx_status recalx_decomposition_estimated(const recalx_model* m,
                                             const recalx_calibrator* calib,
                                             const recalx_dataset* data, uint64_t kept_mask,
                                             int dim, const recalx_strategy* strategy,
                                             const char* estimator_json, uint64_t seed,
                                             char** out_json) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(data, "data");
        req_arg(strategy, "strategy");
        req_arg(out_json, "out_json");
        recalx::Coalition s{kept_mask, dim};
        s.validate();
        auto spec = parse_estimator(estimator_json);
        auto report = recalx::decomposition_report_estimated(*m->impl, calib_of(calib), data->ds, s,
                                                             strategy->s, spec, seed);
        emit_string(out_json, recalx::decomposition_to_json(report));
    });
}

/* ---- explanations --------------------------------------------------------------- */

recalx_status recalx_explain_one(const recalx_model* m, const recalx_calibrator* calib,
                                 const double* x, int dim, int target_class, const char* method,
                                 const recalx_strategy* strategy, const char* params_json,
                                 uint64_t seed, double* out_values, double* out_base_value,
                                 int* out_target) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(x, "x");
        req_arg(method, "method");
        req_arg(strategy, "strategy");
        req_arg(out_values, "out_values");
        require(dim == m->impl->input_dim(), ErrorCode::invalid_argument,
                "dim does not match the model's input dimension");
        std::span<const double> xs(x, static_cast<size_t>(dim));
        const int target = resolve_target(*m->impl, xs, target_class);
        auto att = recalx::explain_one(*m->impl, calib_of(calib), xs, target,
                                       recalx::attribution_method_from_name(method), strategy->s,
                                       seed, parse_explain_params(params_json));
        std::memcpy(out_values, att.values.data(), att.values.size() * sizeof(double));
        if (out_base_value != nullptr) *out_base_value = att.base_value;
        if (out_target != nullptr) *out_target = target;
    });
}

recalx_status recalx_global_importance(const recalx_model* m, const recalx_calibrator* calib,
                                       const recalx_dataset* data, const char* method,
                                       const recalx_strategy* strategy, size_t n_explain,
                                       const char* params_json, uint64_t seed, char** out_json,
                                       int* out_ranking) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(data, "data");
        req_arg(method, "method");
        req_arg(strategy, "strategy");
        auto g = recalx::global_importance(*m->impl, calib_of(calib), data->ds,
                                           recalx::attribution_method_from_name(method),
                                           strategy->s, n_explain, seed,
                                           parse_explain_params(params_json));
        emit_string(out_json, recalx::global_importance_to_json(g));
        if (out_ranking != nullptr)
            std::memcpy(out_ranking, g.ranking.data(), g.ranking.size() * sizeof(int));
    });
}

/* ---- evaluation ------------------------------------------------------------------- */

recalx_status recalx_roar(const recalx_dataset* full, const int* ranking, int dim,
                          const int* k_values, size_t n_k, const char* train_config_json,
                          const uint64_t* retrain_seeds, size_t n_seeds, uint64_t split_seed,
                          char** out_json, char** out_csv) {
    return guarded([&] {
        req_arg(full, "full");
        req_arg(ranking, "ranking");
        req_arg(k_values, "k_values");
        req_arg(retrain_seeds, "retrain_seeds");
        require(dim == full->ds.dim(), ErrorCode::invalid_argument,
                "dim does not match the dataset");
        auto cfg = parse_train_config(train_config_json);
        recalx::SplitSpec split;
        split.seed = split_seed;
        auto curve = recalx::roar(full->ds, std::span<const int>(ranking, static_cast<size_t>(dim)),
                                  std::span<const int>(k_values, n_k), cfg,
                                  std::span<const uint64_t>(retrain_seeds, n_seeds), split);
        emit_string(out_json, recalx::roar_to_json(curve));
        emit_string(out_csv, recalx::roar_to_csv(curve));
    });
}

recalx_status recalx_sensitivity(const recalx_model* m, const recalx_calibrator* calib,
                                 const recalx_dataset* data, const char* method,
                                 const recalx_strategy* strategy, const char* params_json,
                                 double radius, int n_probes, size_t n_explain, uint64_t seed,
                                 char** out_json) {
    return guarded([&] {
        req_arg(m, "m");
        req_arg(data, "data");
        req_arg(method, "method");
        req_arg(strategy, "strategy");
        req_arg(out_json, "out_json");
        auto summary = recalx::sensitivity_summary(
            *m->impl, calib_of(calib), data->ds, recalx::attribution_method_from_name(method),
            strategy->s, parse_explain_params(params_json), radius, n_probes, n_explain, seed);
        emit_string(out_json, recalx::sensitivity_to_json(summary));
    });
}

recalx_status recalx_drift_bound(const recalx_joint* joint, const recalx_model* miscal,
                                 const recalx_strategy* strategy, double delta, int n_trials,
                                 uint64_t seed, char** out_json) {
    return guarded([&] {
        req_arg(joint, "joint");
        req_arg(miscal, "miscal");
        req_arg(strategy, "strategy");
        req_arg(out_json, "out_json");
        auto report =
            recalx::drift_bound_check(joint->j, *miscal->impl, strategy->s, delta, n_trials, seed);
        emit_string(out_json, recalx::drift_to_json(report));
    });
}

}  // extern "C"
