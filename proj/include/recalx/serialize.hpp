#pragma once

#include <string>
#include <vector>

#include "recalx/calibration.hpp"
#include "recalx/coalition.hpp"
#include "recalx/dataset.hpp"
#include "recalx/evaluation.hpp"
#include "recalx/explainers.hpp"
#include "recalx/metrics.hpp"
#include "recalx/model.hpp"
#include "recalx/perturbation.hpp"

namespace recalx {

// Shortest decimal form that parses back to the identical 64-bit real.
std::string format_double(double value);
double parse_double(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// JSON persistence. Dumps are deterministic: object keys sorted, reals in
// shortest round-trip form. Model weights are written as decimal strings.
std::string model_to_json(const MlpClassifier& m);
MlpClassifier model_from_json(const std::string& text);

std::string calibrator_to_json(const ReCalXCalibrator& c);
ReCalXCalibrator calibrator_from_json(const std::string& text);

std::string strategy_to_json(const PerturbationStrategy& s);
PerturbationStrategy strategy_from_json(const std::string& text);

std::string joint_to_json(const FiniteJoint& j);
FiniteJoint joint_from_json(const std::string& text);

std::string coalition_to_json(const Coalition& s);
Coalition coalition_from_json(const std::string& text);

std::string synthetic_spec_to_json(const SyntheticSpec& s);
SyntheticSpec synthetic_spec_from_json(const std::string& text);

void dataset_save_csv(const Dataset& ds, const std::string& path,
                      const std::string& label_column = "label");

// Report renderings shared by the C API and the command-line tool.
std::string fit_report_to_json(const FitReport& r);
std::string profile_to_json(const LevelProfile& p, const std::string& strategy_name,
                            const ConditionalEstimatorSpec& spec, std::uint64_t seed);
std::string profile_to_csv(const LevelProfile& p);
std::string attributions_to_csv(const std::vector<AttributionVector>& rows,
                                const std::vector<std::size_t>& sample_ids);
std::string global_importance_to_json(const GlobalImportance& g);
std::string roar_to_csv(const RoarCurve& c);
std::string roar_to_json(const RoarCurve& c);
std::string sensitivity_to_json(const SensitivitySummary& s);
std::string decomposition_to_json(const DecompositionReport& r);
std::string drift_to_json(const DriftBoundReport& r);

}  // namespace recalx
