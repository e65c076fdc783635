#include "recalx/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "recalx/error.hpp"

namespace recalx {
namespace {

using nlohmann::json;

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string(what) + ": " + e.what());
    }
}

// Wraps nlohmann's type/key exceptions so callers see a recalx parse error
// naming the document kind instead of a bare library message.
template <typename Fn>
auto translating(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const Error&) {
        throw;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string(what) + ": " + e.what());
    }
}

void require_version(const json& j, const char* what) {
    if (!j.is_object()) fail(ErrorCode::parse, std::string(what) + ": expected a JSON object");
    if (j.value("version", -1) != 1)
        fail(ErrorCode::parse, std::string(what) + ": unsupported or missing version");
}

std::vector<std::string> doubles_to_strings(const std::vector<double>& xs) {
    std::vector<std::string> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(format_double(x));
    return out;
}

std::vector<double> strings_to_doubles(const json& arr, const char* what) {
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_string()) fail(ErrorCode::parse, std::string(what) + ": expected decimal strings");
        out.push_back(parse_double(v.get<std::string>()));
    }
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    require(res.ec == std::errc{}, ErrorCode::numeric, "format_double: conversion failed");
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto res = std::from_chars(begin, end, value);
    require(res.ec == std::errc{} && res.ptr == end, ErrorCode::parse,
            "not a decimal number: '" + text + "'");
    return value;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io, "cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    require(!in.bad(), ErrorCode::io, "read failed: " + path);
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::io, "cannot open " + path + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    require(out.good(), ErrorCode::io, "write failed: " + path);
}

std::string model_to_json(const MlpClassifier& m) {
    m.validate();
    json j;
    j["version"] = 1;
    j["kind"] = "mlp";
    j["activation"] = "relu";
    j["dims"] = m.dims;
    json ws = json::array();
    for (const auto& layer : m.weights) ws.push_back(doubles_to_strings(layer));
    json bs = json::array();
    for (const auto& layer : m.biases) bs.push_back(doubles_to_strings(layer));
    j["weights"] = std::move(ws);
    j["biases"] = std::move(bs);
    return j.dump(2) + "\n";
}

MlpClassifier model_from_json(const std::string& text) {
    return translating("model", [&] {
        json j = parse_json(text, "model");
        require_version(j, "model");
        require(j.value("kind", "") == "mlp", ErrorCode::parse, "model: kind must be 'mlp'");
        require(j.value("activation", "") == "relu", ErrorCode::parse,
                "model: activation must be 'relu'");
        MlpClassifier m;
        m.dims = j.at("dims").get<std::vector<int>>();
        for (const auto& layer : j.at("weights")) m.weights.push_back(strings_to_doubles(layer, "model"));
        for (const auto& layer : j.at("biases")) m.biases.push_back(strings_to_doubles(layer, "model"));
        m.validate();
        return m;
    });
}

std::string calibrator_to_json(const ReCalXCalibrator& c) {
    c.validate();
    json j;
    j["version"] = 1;
    j["B"] = c.bins;
    j["edges"] = c.edges;
    j["temperatures"] = c.temperatures;
    j["strategy"] = c.strategy_name;
    j["seed"] = c.seed;
    return j.dump(2) + "\n";
}

ReCalXCalibrator calibrator_from_json(const std::string& text) {
    return translating("calibrator", [&] {
        json j = parse_json(text, "calibrator");
        require_version(j, "calibrator");
        ReCalXCalibrator c;
        c.bins = j.at("B").get<int>();
        c.edges = j.at("edges").get<std::vector<double>>();
        c.temperatures = j.at("temperatures").get<std::vector<double>>();
        c.strategy_name = j.at("strategy").get<std::string>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.validate();
        return c;
    });
}

std::string strategy_to_json(const PerturbationStrategy& s) {
    s.validate();
    json j;
    j["kind"] = s.name;
    switch (s.kind) {
        case PerturbationStrategy::Kind::zero_baseline:
            break;
        case PerturbationStrategy::Kind::fixed_baseline:
            j["b"] = s.baseline;
            break;
        case PerturbationStrategy::Kind::mean_replacement:
            j["mu"] = s.baseline;
            break;
        case PerturbationStrategy::Kind::gaussian_noise:
            j["sigma"] = s.sigma;
            break;
    }
    return j.dump(2) + "\n";
}

PerturbationStrategy strategy_from_json(const std::string& text) {
    return translating("strategy", [&] {
        json j = parse_json(text, "strategy");
        require(j.is_object(), ErrorCode::parse, "strategy: expected a JSON object");
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "zero-baseline") return PerturbationStrategy::zero();
        if (kind == "fixed-baseline")
            return PerturbationStrategy::fixed(j.at("b").get<std::vector<double>>());
        if (kind == "mean-replacement")
            return PerturbationStrategy::mean(j.at("mu").get<std::vector<double>>());
        if (kind == "gaussian-noise")
            return PerturbationStrategy::noise(j.at("sigma").get<double>());
        fail(ErrorCode::parse, "strategy: unknown kind '" + kind + "'");
    });
}

std::string joint_to_json(const FiniteJoint& j) {
    j.validate();
    json out;
    out["version"] = 1;
    out["n_classes"] = j.n_classes;
    out["xs"] = j.xs;
    out["ys"] = j.ys;
    out["probs"] = j.probs;
    return out.dump(2) + "\n";
}

FiniteJoint joint_from_json(const std::string& text) {
    return translating("joint", [&] {
        json j = parse_json(text, "joint");
        require_version(j, "joint");
        FiniteJoint out;
        out.n_classes = j.at("n_classes").get<int>();
        out.xs = j.at("xs").get<std::vector<std::vector<double>>>();
        out.ys = j.at("ys").get<std::vector<int>>();
        out.probs = j.at("probs").get<std::vector<double>>();
        out.validate();
        return out;
    });
}

std::string coalition_to_json(const Coalition& s) {
    s.validate();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(s.kept));
    json j;
    j["d"] = s.d;
    j["kept"] = std::string(buf);
    return j.dump() + "\n";
}

Coalition coalition_from_json(const std::string& text) {
    return translating("coalition", [&] {
        json j = parse_json(text, "coalition");
        require(j.is_object(), ErrorCode::parse, "coalition: expected a JSON object");
        const int d = j.at("d").get<int>();
        const std::string kept = j.at("kept").get<std::string>();
        require(kept.size() > 2 && kept[0] == '0' && kept[1] == 'x', ErrorCode::parse,
                "coalition: kept mask must be 0x-prefixed hex");
        std::uint64_t mask = 0;
        auto res = std::from_chars(kept.data() + 2, kept.data() + kept.size(), mask, 16);
        require(res.ec == std::errc{} && res.ptr == kept.data() + kept.size(), ErrorCode::parse,
                "coalition: bad hex mask '" + kept + "'");
        Coalition s{mask, d};
        s.validate();
        return s;
    });
}

std::string synthetic_spec_to_json(const SyntheticSpec& s) {
    s.validate();
    json j;
    j["version"] = 1;
    switch (s.kind) {
        case SyntheticSpec::Kind::finite:
            j["kind"] = "finite";
            j["joint"] = json::parse(joint_to_json(s.joint));
            break;
        case SyntheticSpec::Kind::planted:
            j["kind"] = "planted";
            j["w"] = s.w;
            break;
        case SyntheticSpec::Kind::moons:
            j["kind"] = "moons";
            j["noise"] = s.noise;
            break;
    }
    return j.dump(2) + "\n";
}

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
    return translating("genspec", [&] {
        json j = parse_json(text, "genspec");
        require_version(j, "genspec");
        SyntheticSpec s;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "finite") {
            s.kind = SyntheticSpec::Kind::finite;
            s.joint = joint_from_json(j.at("joint").dump());
        } else if (kind == "planted") {
            s.kind = SyntheticSpec::Kind::planted;
            s.w = j.at("w").get<std::vector<double>>();
        } else if (kind == "moons") {
            s.kind = SyntheticSpec::Kind::moons;
            s.noise = j.value("noise", 0.1);
        } else {
            fail(ErrorCode::parse, "genspec: unknown kind '" + kind + "'");
        }
        s.validate();
        return s;
    });
}

void dataset_save_csv(const Dataset& ds, const std::string& path, const std::string& label_column) {
    ds.require_nonempty();
    std::string out;
    for (const auto& name : ds.feature_names) {
        out += name;
        out += ',';
    }
    out += label_column;
    out += '\n';
    const int d = ds.dim();
    for (std::size_t i = 0; i < ds.n(); ++i) {
        auto row = ds.row(i);
        for (int c = 0; c < d; ++c) {
            out += format_double(row[static_cast<std::size_t>(c)]);
            out += ',';
        }
        out += std::to_string(ds.labels[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

std::string fit_report_to_json(const FitReport& r) {
    json bins = json::array();
    for (const auto& b : r.bins) {
        json jb;
        jb["bin"] = b.bin;
        jb["samples"] = b.samples;
        jb["coalition_sizes"] = b.coalition_sizes;
        jb["temperature"] = b.temperature;
        jb["ce_before"] = b.ce_before;
        jb["ce_after"] = b.ce_after;
        jb["inherited"] = b.inherited;
        jb["boundary_warning"] = b.boundary_warning;
        jb["flat_objective"] = b.flat_objective;
        jb["trace"] = b.trace;
        bins.push_back(std::move(jb));
    }
    json j;
    j["version"] = 1;
    j["bins"] = std::move(bins);
    j["strategy"] = r.strategy_name;
    j["validation_size"] = r.validation_size;
    j["reps_per_point"] = r.reps_per_point;
    j["seed"] = r.seed;
    j["size_rule"] = r.size_rule;
    return j.dump(2) + "\n";
}

std::string profile_to_json(const LevelProfile& p, const std::string& strategy_name,
                            const ConditionalEstimatorSpec& spec, std::uint64_t seed) {
    json est;
    est["kind"] =
        spec.kind == ConditionalEstimatorSpec::Kind::exact_groupby ? "exact-groupby" : "kernel";
    if (spec.kind == ConditionalEstimatorSpec::Kind::kernel) {
        est["bandwidth"] = spec.bandwidth;
        est["leave_one_out"] = spec.leave_one_out;
    }
    json j;
    j["version"] = 1;
    j["strategy"] = strategy_name;
    j["levels"] = p.levels;
    j["ce_per_level"] = p.ce_per_level;
    j["ce_avg"] = p.ce_avg;
    j["ce_max"] = p.ce_max;
    j["estimator"] = std::move(est);
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

std::string profile_to_csv(const LevelProfile& p) {
    std::string out = "level,ce\n";
    for (std::size_t i = 0; i < p.levels.size(); ++i) {
        out += format_double(p.levels[i]);
        out += ',';
        out += format_double(p.ce_per_level[i]);
        out += '\n';
    }
    return out;
}

std::string attributions_to_csv(const std::vector<AttributionVector>& rows,
                                const std::vector<std::size_t>& sample_ids) {
    require(rows.size() == sample_ids.size(), ErrorCode::invalid_argument,
            "attributions_to_csv: ids/rows length mismatch");
    require(!rows.empty(), ErrorCode::invalid_argument, "attributions_to_csv: no rows");
    const std::size_t d = rows.front().values.size();
    std::string out = "sample_id,target_class,method";
    for (std::size_t i = 0; i < d; ++i) out += ",feature_" + std::to_string(i);
    out += ",base_value\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& a = rows[r];
        require(a.values.size() == d, ErrorCode::invalid_argument,
                "attributions_to_csv: ragged attribution rows");
        out += std::to_string(sample_ids[r]);
        out += ',';
        out += std::to_string(a.target_class);
        out += ',';
        out += a.method;
        for (double v : a.values) {
            out += ',';
            out += format_double(v);
        }
        out += ',';
        out += format_double(a.base_value);
        out += '\n';
    }
    return out;
}

std::string global_importance_to_json(const GlobalImportance& g) {
    json j;
    j["version"] = 1;
    j["method"] = g.method;
    j["mean_abs"] = g.mean_abs;
    j["ranking"] = g.ranking;
    j["n_explained"] = g.n_explained;
    return j.dump(2) + "\n";
}

std::string roar_to_csv(const RoarCurve& c) {
    std::string out = "k,mean_loss,std_loss";
    for (std::uint64_t s : c.seeds) out += ",loss_seed_" + std::to_string(s);
    out += '\n';
    for (std::size_t i = 0; i < c.k_values.size(); ++i) {
        out += std::to_string(c.k_values[i]);
        out += ',';
        out += format_double(c.mean_loss[i]);
        out += ',';
        out += format_double(c.std_loss[i]);
        for (double v : c.seed_loss[i]) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::string roar_to_json(const RoarCurve& c) {
    json j;
    j["version"] = 1;
    j["k_values"] = c.k_values;
    j["mean_loss"] = c.mean_loss;
    j["std_loss"] = c.std_loss;
    j["seed_loss"] = c.seed_loss;
    j["seeds"] = c.seeds;
    return j.dump(2) + "\n";
}

std::string sensitivity_to_json(const SensitivitySummary& s) {
    json per = json::array();
    for (const auto& r : s.per_sample) {
        json jr;
        jr["s_avg"] = r.s_avg;
        jr["s_max"] = r.s_max;
        per.push_back(std::move(jr));
    }
    json j;
    j["version"] = 1;
    j["method"] = s.method;
    j["mean_s_avg"] = s.mean_s_avg;
    j["mean_s_max"] = s.mean_s_max;
    j["radius"] = s.radius;
    j["n_probes"] = s.n_probes;
    j["norm"] = "L2";
    j["per_sample"] = std::move(per);
    return j.dump(2) + "\n";
}

std::string decomposition_to_json(const DecompositionReport& r) {
    json j;
    j["version"] = 1;
    j["predictive_power"] = r.predictive_power;
    j["baseline_bias"] = r.baseline_bias;
    j["mutual_info"] = r.mutual_info;
    j["calib_error"] = r.calib_error;
    j["residual"] = r.residual;
    return j.dump(2) + "\n";
}

std::string drift_to_json(const DriftBoundReport& r) {
    json j;
    j["version"] = 1;
    j["delta"] = r.delta;
    j["ce_max"] = r.ce_max;
    j["bound"] = r.bound;
    j["violation_rate"] = r.violation_rate;
    j["mean_lhs"] = r.mean_lhs;
    j["vacuous"] = r.vacuous;
    j["n_trials"] = r.lhs_values.size();
    j["lhs"] = r.lhs_values;
    return j.dump(2) + "\n";
}

}  // namespace recalx
