/* C interface to the recalx library.
 *
 * Conventions:
 *   - Every fallible function returns a recalx_status; RECALX_OK is 0.
 *   - On failure, recalx_last_error() returns a thread-local message that
 *     stays valid until the same thread's next failing call.
 *   - Output handles (recalx_*_free) and strings (recalx_string_free) are
 *     owned by the caller on success and untouched on failure.
 *   - Configuration bundles (training, estimator, explainer) travel as JSON
 *     strings; NULL selects the documented defaults.
 */
#ifndef RECALX_H
#define RECALX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum recalx_status {
    RECALX_OK = 0,
    RECALX_E_INVALID_ARGUMENT = 1,
    RECALX_E_IO = 2,
    RECALX_E_PARSE = 3,
    RECALX_E_DOMAIN = 4,
    RECALX_E_NUMERIC = 5,
    RECALX_E_UNSUPPORTED = 6,
    RECALX_E_INTERNAL = 7
} recalx_status;

typedef struct recalx_dataset recalx_dataset;
typedef struct recalx_joint recalx_joint;
typedef struct recalx_strategy recalx_strategy;
typedef struct recalx_model recalx_model;
typedef struct recalx_calibrator recalx_calibrator;

/* ---- diagnostics / runtime ------------------------------------------- */

const char* recalx_version(void);
const char* recalx_last_error(void);
void recalx_string_free(char* s);

/* Worker threads used by parallel loops; n < 1 is an error. */
recalx_status recalx_set_workers(int n);

/* Stable sub-seed derivation: identical (base, label) gives an identical
 * stream on every platform. */
uint64_t recalx_derive_seed(uint64_t base, const char* label);

/* ---- datasets --------------------------------------------------------- */

recalx_status recalx_dataset_load_csv(const char* path, const char* label_column, int n_classes,
                                      recalx_dataset** out, size_t* dropped_rows);
recalx_status recalx_dataset_save_csv(const recalx_dataset* ds, const char* path);

/* genspec_json kinds: finite (embedded joint), planted, moons. For the
 * finite kind, *out_joint (if non-NULL) receives the generating joint. */
recalx_status recalx_dataset_generate(const char* genspec_json, size_t n, uint64_t seed,
                                      recalx_dataset** out_ds, recalx_joint** out_joint);

recalx_status recalx_dataset_split(const recalx_dataset* ds, double train_frac, double val_frac,
                                   double test_frac, uint64_t seed, recalx_dataset** out_train,
                                   recalx_dataset** out_val, recalx_dataset** out_test);

/* Z-scores every listed dataset in place with statistics fit on fit_on. */
recalx_status recalx_dataset_standardize(const recalx_dataset* fit_on, recalx_dataset** targets,
                                         size_t n_targets);

size_t recalx_dataset_rows(const recalx_dataset* ds);
int recalx_dataset_dim(const recalx_dataset* ds);
int recalx_dataset_classes(const recalx_dataset* ds);
/* Borrowed pointer, valid while ds lives; NULL when i is out of range. */
const char* recalx_dataset_feature_name(const recalx_dataset* ds, int i);
recalx_status recalx_dataset_row(const recalx_dataset* ds, size_t i, double* out_features,
                                 int* out_label);
void recalx_dataset_free(recalx_dataset* ds);

/* ---- finite joint distributions --------------------------------------- */

recalx_status recalx_joint_from_json(const char* text, recalx_joint** out);
recalx_status recalx_joint_to_json(const recalx_joint* j, char** out);
void recalx_joint_free(recalx_joint* j);

/* ---- perturbation strategies ------------------------------------------ */

recalx_status recalx_strategy_from_json(const char* text, recalx_strategy** out);
recalx_status recalx_strategy_to_json(const recalx_strategy* s, char** out);
/* mean-replacement built from the dataset's per-column means. */
recalx_status recalx_strategy_mean_from_dataset(const recalx_dataset* ds, recalx_strategy** out);
void recalx_strategy_free(recalx_strategy* s);

/* ---- models ------------------------------------------------------------ */

/* config_json keys (all optional): hidden_sizes, epochs, batch_size,
 * learning_rate, momentum, weight_decay, seed. */
recalx_status recalx_model_train_mlp(const recalx_dataset* train, const char* config_json,
                                     recalx_model** out);
recalx_status recalx_model_from_json(const char* text, recalx_model** out);
recalx_status recalx_model_to_json(const recalx_model* m, char** out);

/* Bayes-optimal predictor for the joint under the given deterministic
 * strategy; it conditions on the observed coalition. */
recalx_status recalx_model_oracle(const recalx_joint* joint, const recalx_strategy* strategy,
                                  recalx_model** out);

/* Planted miscalibration: logits scaled by factor, either always or only
 * when the perturbation level exceeds level_threshold. */
recalx_status recalx_model_scale_logits(const recalx_model* inner, double factor,
                                        recalx_model** out);
recalx_status recalx_model_scale_logits_above(const recalx_model* inner, double factor,
                                              double level_threshold, recalx_model** out);

int recalx_model_classes(const recalx_model* m);
int recalx_model_input_dim(const recalx_model* m);

/* Restricted prediction: keep the coalition in kept_mask, perturb the rest
 * with strategy, apply the calibrator's temperature for the coalition's
 * level. calib may be NULL (raw softmax). strategy may be NULL only when
 * kept_mask keeps every coordinate. */
recalx_status recalx_model_predict(const recalx_model* m, const recalx_calibrator* calib,
                                   const double* x, int dim, uint64_t kept_mask,
                                   const recalx_strategy* strategy, uint64_t seed,
                                   double* out_probs);

void recalx_model_free(recalx_model* m);

/* ---- calibration -------------------------------------------------------- */

/* Single temperature on unperturbed validation predictions, packaged as a
 * one-bin calibrator tagged "unperturbed". */
recalx_status recalx_fit_temperature(const recalx_model* m, const recalx_dataset* val,
                                     uint64_t seed, recalx_calibrator** out, char** report_json);

/* Per-level recalibration: bins over the perturbation level, one temperature
 * per bin, fit on perturbed validation predictions. */
recalx_status recalx_fit_recalx(const recalx_model* m, const recalx_dataset* val,
                                const recalx_strategy* strategy, int bins, int reps_per_point,
                                uint64_t seed, recalx_calibrator** out, char** report_json);

recalx_status recalx_calibrator_from_json(const char* text, recalx_calibrator** out);
recalx_status recalx_calibrator_to_json(const recalx_calibrator* c, char** out);
recalx_status recalx_calibrator_temperature(const recalx_calibrator* c, double level,
                                            double* out_temperature);
void recalx_calibrator_free(recalx_calibrator* c);

/* ---- verification metrics ----------------------------------------------- */

/* estimator_json: {"kind":"exact-groupby"} or
 * {"kind":"kernel","bandwidth":0.05,"leave_one_out":true}; NULL = exact. */
recalx_status recalx_profile(const recalx_model* m, const recalx_calibrator* calib,
                             const recalx_dataset* data, const recalx_strategy* strategy,
                             const double* levels, size_t n_levels, int reps, uint64_t seed,
                             const char* estimator_json, char** out_json, char** out_csv);

/* Exact decomposition of predictive power over a finite joint. */
recalx_status recalx_decomposition_exact(const recalx_model* m, const recalx_calibrator* calib,
                                         const recalx_joint* joint, uint64_t kept_mask, int dim,
                                         const recalx_strategy* strategy, char** out_json);

recalx_status recalx_decomposition_estimated(const recalx_model* m,
                                             const recalx_calibrator* calib,
                                             const recalx_dataset* data, uint64_t kept_mask,
                                             int dim, const recalx_strategy* strategy,
                                             const char* estimator_json, uint64_t seed,
                                             char** out_json);

/* ---- explanations -------------------------------------------------------- */

/* method: shapley | kernelshap | lime | ablation. target_class -1 explains
 * the model's own prediction (the class actually used is written to
 * out_target when non-NULL). params_json keys (optional): n_samples,
 * lime_kernel_width, lime_ridge. out_values must hold dim doubles. */
recalx_status recalx_explain_one(const recalx_model* m, const recalx_calibrator* calib,
                                 const double* x, int dim, int target_class, const char* method,
                                 const recalx_strategy* strategy, const char* params_json,
                                 uint64_t seed, double* out_values, double* out_base_value,
                                 int* out_target);

/* Mean-|phi| ranking over the first n_explain rows. out_ranking (optional)
 * must hold dim ints. */
recalx_status recalx_global_importance(const recalx_model* m, const recalx_calibrator* calib,
                                       const recalx_dataset* data, const char* method,
                                       const recalx_strategy* strategy, size_t n_explain,
                                       const char* params_json, uint64_t seed, char** out_json,
                                       int* out_ranking);

/* ---- evaluation ----------------------------------------------------------- */

recalx_status recalx_roar(const recalx_dataset* full, const int* ranking, int dim,
                          const int* k_values, size_t n_k, const char* train_config_json,
                          const uint64_t* retrain_seeds, size_t n_seeds, uint64_t split_seed,
                          char** out_json, char** out_csv);

recalx_status recalx_sensitivity(const recalx_model* m, const recalx_calibrator* calib,
                                 const recalx_dataset* data, const char* method,
                                 const recalx_strategy* strategy, const char* params_json,
                                 double radius, int n_probes, size_t n_explain, uint64_t seed,
                                 char** out_json);

/* Explanation-drift bound experiment: exact worst-case calibration error of
 * `miscal` against the Bayes oracle over the joint, then per-trial squared
 * explanation drift versus the bound. */
recalx_status recalx_drift_bound(const recalx_joint* joint, const recalx_model* miscal,
                                 const recalx_strategy* strategy, double delta, int n_trials,
                                 uint64_t seed, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* RECALX_H */
