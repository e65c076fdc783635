// Command-line front end. Everything numerical happens behind the C API in
// librecalx; this file only parses flags, moves bytes, and assembles report
// files. Every run writes <out>/run.json echoing the fully resolved
// configuration, and any run can be repeated with --config <run.json>.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "recalx.h"

namespace {

using nlohmann::json;

// Exit 1: the request itself is malformed (beyond what flag parsing catches).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Exit 2: the request was well-formed but the run failed.
struct RunError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] void fail_usage(const std::string& msg) { throw UsageError(msg); }
[[noreturn]] void fail_run(const std::string& msg) { throw RunError(msg); }

void check(recalx_status st, const std::string& what) {
    if (st != RECALX_OK) fail_run(what + ": " + recalx_last_error());
}

// ---- small value helpers ---------------------------------------------------

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    if (s.empty()) return {};
    std::vector<double> out;
    for (const auto& cell : split_commas(s)) {
        double v = 0.0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
            fail_usage(what + ": '" + cell + "' is not a number");
        out.push_back(v);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    for (double v : parse_double_list(s, what)) {
        int i = static_cast<int>(v);
        if (static_cast<double>(i) != v) fail_usage(what + ": expected integers");
        out.push_back(i);
    }
    return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& s, const std::string& what) {
    if (s.empty()) return {};
    std::vector<uint64_t> out;
    for (const auto& cell : split_commas(s)) {
        uint64_t v = 0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
            fail_usage(what + ": '" + cell + "' is not an unsigned integer");
        out.push_back(v);
    }
    return out;
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) fail_run("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail_run("read failed: '" + path + "'");
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.good()) fail_run("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out.good()) fail_run("write failed: '" + path + "'");
}

json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail_run(what + ": " + e.what());
    }
}

// ---- RAII over the C handles --------------------------------------------------

template <class T, void (*FreeFn)(T*)>
class Handle {
public:
    Handle() = default;
    ~Handle() { reset(); }
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    Handle(Handle&& o) noexcept : p_(std::exchange(o.p_, nullptr)) {}
    Handle& operator=(Handle&& o) noexcept {
        if (this != &o) {
            reset();
            p_ = std::exchange(o.p_, nullptr);
        }
        return *this;
    }
    T** slot() {
        reset();
        return &p_;
    }
    T* get() const { return p_; }
    explicit operator bool() const { return p_ != nullptr; }

private:
    void reset() {
        if (p_ != nullptr) FreeFn(p_);
        p_ = nullptr;
    }
    T* p_ = nullptr;
};

using DatasetH = Handle<recalx_dataset, recalx_dataset_free>;
using JointH = Handle<recalx_joint, recalx_joint_free>;
using StrategyH = Handle<recalx_strategy, recalx_strategy_free>;
using ModelH = Handle<recalx_model, recalx_model_free>;
using CalibH = Handle<recalx_calibrator, recalx_calibrator_free>;

class CStr {
public:
    CStr() = default;
    ~CStr() { recalx_string_free(p_); }
    CStr(const CStr&) = delete;
    CStr& operator=(const CStr&) = delete;
    char** slot() { return &p_; }
    std::string str() const { return p_ == nullptr ? std::string() : std::string(p_); }

private:
    char* p_ = nullptr;
};

// ---- config resolution: defaults < --config file < explicit flags -------------

class ConfigBinder {
public:
    template <class T>
    CLI::Option* opt(CLI::App& app, const std::string& flag, T& var, const std::string& desc) {
        auto* o = app.add_option(flag, var, desc)->capture_default_str();
        note(o, var);
        return o;
    }

    CLI::Option* flag(CLI::App& app, const std::string& name, bool& var,
                      const std::string& desc) {
        auto* o = app.add_flag(name, var, desc);
        note(o, var);
        return o;
    }

    void apply(const json& cfg) {
        for (auto& f : appliers_) f(cfg);
    }

    json echo() const {
        json out = json::object();
        for (auto& f : echoers_) f(out);
        return out;
    }

private:
    template <class T>
    void note(CLI::Option* o, T& var) {
        const std::string key = o->get_lnames().front();
        appliers_.push_back([o, key, &var](const json& cfg) {
            if (o->count() == 0 && cfg.contains(key)) {
                try {
                    var = cfg.at(key).get<T>();
                } catch (const json::exception& e) {
                    fail_usage("config key '" + key + "': " + e.what());
                }
            }
        });
        echoers_.push_back([key, &var](json& out) { out[key] = var; });
    }

    std::vector<std::function<void(const json&)>> appliers_;
    std::vector<std::function<void(json&)>> echoers_;
};

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    json j = parse_json_text(read_file(path), "config file '" + path + "'");
    if (j.is_object() && j.contains("config")) j = j.at("config");  // accept a prior run.json
    if (!j.is_object()) fail_usage("config file '" + path + "' must hold a JSON object");
    return j;
}

// ---- run directory plumbing ----------------------------------------------------

class RunContext {
public:
    RunContext(std::string command, std::string out_dir, uint64_t seed, json config)
        : command_(std::move(command)),
          out_dir_(std::move(out_dir)),
          seed_(seed),
          config_(std::move(config)) {
        if (out_dir_.empty()) fail_usage("--out is required");
        std::error_code ec;
        std::filesystem::create_directories(out_dir_, ec);
        if (ec) fail_run("cannot create '" + out_dir_ + "': " + ec.message());
        json hashed = config_;
        hashed.erase("out");
        hashed.erase("workers");
        char buf[20];
        std::snprintf(buf, sizeof(buf), "0x%016llx",
                      static_cast<unsigned long long>(fnv1a64(hashed.dump())));
        config_hash_ = buf;
    }

    std::string path(const std::string& name) const { return out_dir_ + "/" + name; }
    uint64_t seed() const { return seed_; }
    const std::string& config_hash() const { return config_hash_; }

    void write_json_artifact(const std::string& name, json j) {
        j["config_hash"] = config_hash_;
        if (!j.contains("seed")) j["seed"] = seed_;
        write_file(path(name), j.dump(2) + "\n");
    }

    void write_json_artifact_text(const std::string& name, const std::string& text) {
        write_json_artifact(name, parse_json_text(text, name));
    }

    void write_csv_artifact(const std::string& name, const std::string& body) {
        write_file(path(name), "# recalx version=1 seed=" + std::to_string(seed_) +
                                   " config_hash=" + config_hash_ + "\n" + body);
    }

    // The final step of every command.
    void finish() const {
        json run;
        run["version"] = recalx_version();
        run["command"] = command_;
        run["config_hash"] = config_hash_;
        run["config"] = config_;
        write_file(path("run.json"), run.dump(2) + "\n");
    }

private:
    std::string command_;
    std::string out_dir_;
    uint64_t seed_ = 0;
    json config_;
    std::string config_hash_;
};

// ---- shared option groups --------------------------------------------------------

struct CommonOpts {
    std::string out;
    std::string config_path;
    uint64_t seed = 0;
    int workers = 1;
    bool emit_plotdata = false;
    ConfigBinder binder;
};

void add_common(CLI::App& sub, CommonOpts& c, bool plotdata = false) {
    c.binder.opt(sub, "--out", c.out, "output directory (required)");
    sub.add_option("--config", c.config_path,
                   "JSON config file; flags win over its keys (a run.json works too)");
    c.binder.opt(sub, "--seed", c.seed, "global seed; sub-seeds are derived per component");
    c.binder.opt(sub, "--workers", c.workers, "worker threads")->envname("RECALX_WORKERS");
    if (plotdata)
        c.binder.flag(sub, "--emit-plotdata", c.emit_plotdata,
                      "also write tidy long-format plotdata.csv");
}

RunContext start(const std::string& command, CommonOpts& c) {
    c.binder.apply(load_config_file(c.config_path));
    if (c.workers < 1) fail_usage("--workers must be >= 1");
    check(recalx_set_workers(c.workers), "set workers");
    return RunContext(command, c.out, c.seed, c.binder.echo());
}

struct DataOpts {
    std::string data;
    int n_classes = 2;
    std::string split = "0.8,0.1,0.1";
    uint64_t split_seed = 0;
    std::string part = "test";
};

void add_data_opts(CLI::App& sub, ConfigBinder& b, DataOpts& d, const std::string& default_part,
                   bool with_part = true) {
    d.part = default_part;
    b.opt(sub, "--data", d.data, "dataset CSV (required)");
    b.opt(sub, "--n-classes", d.n_classes, "number of classes in the dataset");
    b.opt(sub, "--split", d.split, "train,val,test fractions");
    b.opt(sub, "--split-seed", d.split_seed, "seed for the dataset split");
    if (with_part)
        b.opt(sub, "--part", d.part, "which split part to use")
            ->check(CLI::IsMember({"train", "val", "test", "all"}));
}

struct LoadedData {
    DatasetH full, train, val, test;

    const recalx_dataset* part(const std::string& name) const {
        if (name == "all") return full.get();
        if (name == "train") return train.get();
        if (name == "val") return val.get();
        if (name == "test") return test.get();
        fail_usage("unknown part '" + name + "'");
    }

    // Per-column statistics (mean replacement) always come from the training
    // part when a split exists, so downstream stages share one baseline.
    const recalx_dataset* stats_source() const {
        return train ? train.get() : full.get();
    }
};

LoadedData load_data(const DataOpts& d, bool do_split = true) {
    if (d.data.empty()) fail_usage("--data is required");
    LoadedData out;
    check(recalx_dataset_load_csv(d.data.c_str(), "label", d.n_classes, out.full.slot(), nullptr),
          "load '" + d.data + "'");
    if (do_split && d.part != "all") {
        auto fr = parse_double_list(d.split, "--split");
        if (fr.size() != 3) fail_usage("--split needs exactly three fractions");
        check(recalx_dataset_split(out.full.get(), fr[0], fr[1], fr[2], d.split_seed,
                                   out.train.slot(), out.val.slot(), out.test.slot()),
              "split '" + d.data + "'");
    }
    return out;
}

struct StrategyOpts {
    std::string strategy;  // empty = command-specific default
    double sigma = 0.5;
    std::string baseline;
    std::string strategy_file;
};

void add_strategy_opts(CLI::App& sub, ConfigBinder& b, StrategyOpts& s) {
    b.opt(sub, "--strategy", s.strategy, "perturbation strategy")
        ->check(CLI::IsMember({"zero", "mean", "noise", "fixed"}));
    b.opt(sub, "--sigma", s.sigma, "gaussian-noise stddev (strategy=noise)");
    b.opt(sub, "--baseline", s.baseline, "replacement values b0,b1,... (strategy=fixed)");
    b.opt(sub, "--strategy-file", s.strategy_file, "strategy JSON file; wins over --strategy");
}

StrategyH make_strategy(const StrategyOpts& s, const std::string& kind,
                        const recalx_dataset* mean_source) {
    StrategyH out;
    if (!s.strategy_file.empty()) {
        const std::string text = read_file(s.strategy_file);
        check(recalx_strategy_from_json(text.c_str(), out.slot()),
              "strategy '" + s.strategy_file + "'");
        return out;
    }
    json j;
    if (kind == "zero") {
        j["kind"] = "zero-baseline";
    } else if (kind == "mean") {
        if (mean_source == nullptr)
            fail_usage("strategy 'mean' needs a dataset here; pass --strategy-file instead");
        check(recalx_strategy_mean_from_dataset(mean_source, out.slot()), "mean strategy");
        return out;
    } else if (kind == "noise") {
        j["kind"] = "gaussian-noise";
        j["sigma"] = s.sigma;
    } else if (kind == "fixed") {
        auto b = parse_double_list(s.baseline, "--baseline");
        if (b.empty()) fail_usage("strategy 'fixed' needs --baseline values");
        j["kind"] = "fixed-baseline";
        j["b"] = b;
    } else {
        fail_usage("unknown strategy '" + kind + "' (valid: zero, mean, noise, fixed)");
    }
    const std::string text = j.dump();
    check(recalx_strategy_from_json(text.c_str(), out.slot()), "strategy");
    return out;
}

std::string strategy_json_of(const recalx_strategy* s) {
    CStr text;
    check(recalx_strategy_to_json(s, text.slot()), "strategy to json");
    return text.str();
}

ModelH load_model(const std::string& path) {
    if (path.empty()) fail_usage("--model is required");
    ModelH m;
    const std::string text = read_file(path);
    check(recalx_model_from_json(text.c_str(), m.slot()), "model '" + path + "'");
    return m;
}

CalibH load_calibrator(const std::string& path) {
    CalibH c;
    if (!path.empty()) {
        const std::string text = read_file(path);
        check(recalx_calibrator_from_json(text.c_str(), c.slot()), "calibrator '" + path + "'");
    }
    return c;
}

uint64_t full_mask(int d) { return d >= 64 ? ~0ULL : ((1ULL << d) - 1); }

// Mean cross-entropy and accuracy of unperturbed predictions, for report files.
std::pair<double, double> ce_and_accuracy(const recalx_model* m, const recalx_dataset* ds) {
    const int d = recalx_dataset_dim(ds);
    const int k = recalx_model_classes(m);
    const size_t n = recalx_dataset_rows(ds);
    std::vector<double> x(static_cast<size_t>(d)), p(static_cast<size_t>(k));
    double ce = 0.0;
    size_t hits = 0;
    for (size_t i = 0; i < n; ++i) {
        int label = 0;
        check(recalx_dataset_row(ds, i, x.data(), &label), "dataset row");
        check(recalx_model_predict(m, nullptr, x.data(), d, full_mask(d), nullptr, 0, p.data()),
              "predict");
        ce -= std::log(std::max(p[static_cast<size_t>(label)], 1e-12));
        const size_t top = static_cast<size_t>(
            std::max_element(p.begin(), p.end()) - p.begin());
        hits += (static_cast<int>(top) == label) ? 1 : 0;
    }
    const double dn = static_cast<double>(n);
    return {ce / dn, static_cast<double>(hits) / dn};
}

// Built-in finite fixture: d=3 binary features, two classes,
// P(x) uniform over the cube and P(y=1|x) = 0.1 + 0.35 x0 + 0.25 x1 + 0.15 x2.
std::string default_joint_json() {
    json xs = json::array();
    json ys = json::array();
    json probs = json::array();
    for (int mask = 0; mask < 8; ++mask) {
        const double x0 = (mask & 1) ? 1.0 : 0.0;
        const double x1 = (mask & 2) ? 1.0 : 0.0;
        const double x2 = (mask & 4) ? 1.0 : 0.0;
        const double p1 = 0.1 + 0.35 * x0 + 0.25 * x1 + 0.15 * x2;
        for (int y = 0; y < 2; ++y) {
            xs.push_back(json::array({x0, x1, x2}));
            ys.push_back(y);
            probs.push_back((y == 1 ? p1 : 1.0 - p1) / 8.0);
        }
    }
    json j;
    j["version"] = 1;
    j["n_classes"] = 2;
    j["xs"] = xs;
    j["ys"] = ys;
    j["probs"] = probs;
    return j.dump();
}

// ---- subcommands ---------------------------------------------------------------

struct GenDataParams {
    CommonOpts common;
    std::string kind = "finite";
    size_t n = 1000;
    std::string joint_path;
    std::string w = "3,1,0";
    double noise = 0.1;
};

void run_gen_data(GenDataParams& p) {
    RunContext ctx = start("gen-data", p.common);

    json genspec;
    genspec["version"] = 1;
    genspec["kind"] = p.kind;
    if (p.kind == "finite") {
        const std::string text =
            p.joint_path.empty() ? default_joint_json() : read_file(p.joint_path);
        JointH given;
        check(recalx_joint_from_json(text.c_str(), given.slot()), "joint spec");
        CStr canon;
        check(recalx_joint_to_json(given.get(), canon.slot()), "joint spec");
        genspec["joint"] = parse_json_text(canon.str(), "joint spec");
    } else if (p.kind == "planted") {
        genspec["w"] = parse_double_list(p.w, "--w");
    } else {
        genspec["noise"] = p.noise;
    }

    const std::string spec_text = genspec.dump();
    DatasetH ds;
    JointH joint;
    check(recalx_dataset_generate(spec_text.c_str(), p.n, ctx.seed(), ds.slot(), joint.slot()),
          "generate");

    // data.csv, assembled here so the provenance line can go on top.
    const int d = recalx_dataset_dim(ds.get());
    std::string body;
    for (int c = 0; c < d; ++c) {
        body += recalx_dataset_feature_name(ds.get(), c);
        body += ',';
    }
    body += "label\n";
    std::vector<double> x(static_cast<size_t>(d));
    for (size_t i = 0; i < recalx_dataset_rows(ds.get()); ++i) {
        int label = 0;
        check(recalx_dataset_row(ds.get(), i, x.data(), &label), "dataset row");
        for (int c = 0; c < d; ++c) {
            body += fmt_double(x[static_cast<size_t>(c)]);
            body += ',';
        }
        body += std::to_string(label);
        body += '\n';
    }
    ctx.write_csv_artifact("data.csv", body);
    ctx.write_json_artifact("genspec.json", genspec);
    if (joint) {
        CStr jt;
        check(recalx_joint_to_json(joint.get(), jt.slot()), "joint to json");
        ctx.write_json_artifact_text("joint.json", jt.str());
    }
    ctx.finish();
    std::cout << "gen-data: wrote " << recalx_dataset_rows(ds.get()) << " rows\n";
}

struct TrainParams {
    CommonOpts common;
    DataOpts data;
    std::string hidden = "16";
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
};

void run_train(TrainParams& p) {
    RunContext ctx = start("train", p.common);
    LoadedData data = load_data(p.data);
    const recalx_dataset* train_part = data.part(p.data.part);

    json cfg;
    cfg["hidden_sizes"] = parse_int_list(p.hidden, "--hidden");
    cfg["epochs"] = p.epochs;
    cfg["batch_size"] = p.batch_size;
    cfg["learning_rate"] = p.learning_rate;
    cfg["momentum"] = p.momentum;
    cfg["weight_decay"] = p.weight_decay;
    cfg["seed"] = ctx.seed();

    ModelH m;
    const std::string cfg_text = cfg.dump();
    check(recalx_model_train_mlp(train_part, cfg_text.c_str(), m.slot()), "train");

    CStr mj;
    check(recalx_model_to_json(m.get(), mj.slot()), "model to json");
    ctx.write_json_artifact_text("model.json", mj.str());

    json metrics;
    metrics["version"] = 1;
    auto [train_ce, train_acc] = ce_and_accuracy(m.get(), train_part);
    metrics["train_ce"] = train_ce;
    metrics["train_accuracy"] = train_acc;
    for (const char* part : {"val", "test"}) {
        if (p.data.part == "all") break;
        const recalx_dataset* ds = data.part(part);
        if (recalx_dataset_rows(ds) == 0) continue;
        auto [ce, acc] = ce_and_accuracy(m.get(), ds);
        metrics[std::string(part) + "_ce"] = ce;
        metrics[std::string(part) + "_accuracy"] = acc;
    }
    ctx.write_json_artifact("train_metrics.json", metrics);
    ctx.finish();
    std::cout << "train: model.json written (train ce " << train_ce << ")\n";
}

struct CalibrateParams {
    CommonOpts common;
    DataOpts data;
    StrategyOpts strategy;
    std::string model;
    std::string method = "recalx";
    int bins = 10;
    int reps = 5;
};

void run_calibrate(CalibrateParams& p) {
    RunContext ctx = start("calibrate", p.common);
    ModelH m = load_model(p.model);
    LoadedData data = load_data(p.data);
    const recalx_dataset* val = data.part(p.data.part);

    CalibH calib;
    CStr report;
    const bool unperturbed =
        p.method == "ts" && p.strategy.strategy.empty() && p.strategy.strategy_file.empty();
    if (unperturbed) {
        check(recalx_fit_temperature(m.get(), val, ctx.seed(), calib.slot(), report.slot()),
              "fit temperature");
    } else {
        const std::string kind = p.strategy.strategy.empty() ? "zero" : p.strategy.strategy;
        StrategyH st = make_strategy(p.strategy, kind, data.stats_source());
        // "ts" on perturbed data is the one-bin special case.
        const int bins = p.method == "ts" ? 1 : p.bins;
        check(recalx_fit_recalx(m.get(), val, st.get(), bins, p.reps, ctx.seed(), calib.slot(),
                                report.slot()),
              "fit recalx");
        ctx.write_json_artifact_text("strategy.json", strategy_json_of(st.get()));
    }

    CStr cj;
    check(recalx_calibrator_to_json(calib.get(), cj.slot()), "calibrator to json");
    ctx.write_json_artifact_text("calibrator.json", cj.str());
    ctx.write_json_artifact_text("fit_report.json", report.str());
    ctx.finish();
    std::cout << "calibrate: calibrator.json written (" << (unperturbed ? "ts" : p.method)
              << ")\n";
}

struct MeasureParams {
    CommonOpts common;
    DataOpts data;
    StrategyOpts strategy;
    std::string model;
    std::string oracle;  // joint JSON path; mutually exclusive with --model
    std::string calibrator;
    std::string levels = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
    int reps = 5;
    std::string estimator = "exact";
    double bandwidth = 0.05;
    bool no_loo = false;
};

void run_measure(MeasureParams& p) {
    RunContext ctx = start("measure", p.common);
    if (p.model.empty() == p.oracle.empty())
        fail_usage("pass exactly one of --model or --oracle");
    LoadedData data = load_data(p.data);
    const recalx_dataset* part = data.part(p.data.part);

    const std::string kind = p.strategy.strategy.empty() ? "zero" : p.strategy.strategy;
    StrategyH st = make_strategy(p.strategy, kind, data.stats_source());

    ModelH m;
    JointH joint;
    if (!p.oracle.empty()) {
        const std::string text = read_file(p.oracle);
        check(recalx_joint_from_json(text.c_str(), joint.slot()), "joint '" + p.oracle + "'");
        check(recalx_model_oracle(joint.get(), st.get(), m.slot()), "oracle");
    } else {
        m = load_model(p.model);
    }
    CalibH calib = load_calibrator(p.calibrator);

    auto levels = parse_double_list(p.levels, "--levels");
    if (levels.empty()) fail_usage("--levels must name at least one level");

    json est;
    est["kind"] = p.estimator == "exact" ? "exact-groupby" : "kernel";
    if (p.estimator == "kernel") {
        est["bandwidth"] = p.bandwidth;
        est["leave_one_out"] = !p.no_loo;
    }

    CStr pj, pc;
    const std::string est_text = est.dump();
    check(recalx_profile(m.get(), calib.get(), part, st.get(), levels.data(), levels.size(),
                         p.reps, ctx.seed(), est_text.c_str(), pj.slot(), pc.slot()),
          "profile");

    ctx.write_json_artifact_text("profile.json", pj.str());
    ctx.write_csv_artifact("profile.csv", pc.str());
    if (p.common.emit_plotdata) {
        json parsed = parse_json_text(pj.str(), "profile");
        std::string tidy = "level,metric,value\n";
        const auto& ls = parsed.at("levels");
        const auto& ce = parsed.at("ce_per_level");
        for (size_t i = 0; i < ls.size(); ++i) {
            tidy += fmt_double(ls[i].get<double>());
            tidy += ",ce_kl,";
            tidy += fmt_double(ce[i].get<double>());
            tidy += '\n';
        }
        ctx.write_csv_artifact("plotdata.csv", tidy);
    }
    ctx.finish();
    json parsed = parse_json_text(pj.str(), "profile");
    std::cout << "measure: ce_avg " << parsed.at("ce_avg").get<double>() << ", ce_max "
              << parsed.at("ce_max").get<double>() << "\n";
}

struct ExplainParams {
    CommonOpts common;
    DataOpts data;
    StrategyOpts strategy;
    std::string model;
    std::string calibrator;
    std::string method = "shapley";
    size_t n = 10;
    size_t n_samples = 256;
    double kernel_width = 0.0;
    double ridge = 1e-3;
    int target = -1;
};

std::string explain_params_json(size_t n_samples, double kernel_width, double ridge) {
    json j;
    j["n_samples"] = n_samples;
    j["lime_kernel_width"] = kernel_width;
    j["lime_ridge"] = ridge;
    return j.dump();
}

void run_explain(ExplainParams& p) {
    RunContext ctx = start("explain", p.common);
    ModelH m = load_model(p.model);
    CalibH calib = load_calibrator(p.calibrator);
    LoadedData data = load_data(p.data);
    const recalx_dataset* part = data.part(p.data.part);

    const std::string kind = p.strategy.strategy.empty() ? "zero" : p.strategy.strategy;
    StrategyH st = make_strategy(p.strategy, kind, data.stats_source());
    const std::string params = explain_params_json(p.n_samples, p.kernel_width, p.ridge);

    const int d = recalx_dataset_dim(part);
    const size_t n = std::min(p.n, recalx_dataset_rows(part));
    if (n == 0) fail_usage("no rows to explain in part '" + p.data.part + "'");

    CStr gj;
    std::vector<int> ranking(static_cast<size_t>(d));
    check(recalx_global_importance(m.get(), calib.get(), part, p.method.c_str(), st.get(), n,
                                   params.c_str(), ctx.seed(), gj.slot(), ranking.data()),
          "global importance");

    std::string body = "sample_id,target_class,method";
    for (int c = 0; c < d; ++c) body += ",feature_" + std::to_string(c);
    body += ",base_value\n";
    std::vector<double> x(static_cast<size_t>(d)), phi(static_cast<size_t>(d));
    for (size_t i = 0; i < n; ++i) {
        check(recalx_dataset_row(part, i, x.data(), nullptr), "dataset row");
        const uint64_t row_seed =
            recalx_derive_seed(ctx.seed(), ("explain-row-" + std::to_string(i)).c_str());
        double base = 0.0;
        int target = 0;
        check(recalx_explain_one(m.get(), calib.get(), x.data(), d, p.target, p.method.c_str(),
                                 st.get(), params.c_str(), row_seed, phi.data(), &base, &target),
              "explain row " + std::to_string(i));
        body += std::to_string(i);
        body += ',';
        body += std::to_string(target);
        body += ',';
        body += p.method;
        for (double v : phi) {
            body += ',';
            body += fmt_double(v);
        }
        body += ',';
        body += fmt_double(base);
        body += '\n';
    }
    ctx.write_csv_artifact("attributions.csv", body);
    ctx.write_json_artifact_text("global.json", gj.str());
    ctx.write_json_artifact_text("strategy.json", strategy_json_of(st.get()));
    ctx.finish();
    std::cout << "explain: " << n << " rows, method " << p.method << "\n";
}

struct RoarParams {
    CommonOpts common;
    DataOpts data;
    std::string ranking;
    std::string ranking_file;
    std::string k = "0,1,2";
    std::string retrain_seeds = "1,2,3";
    std::string hidden = "16";
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
};

void run_roar(RoarParams& p) {
    RunContext ctx = start("eval-roar", p.common);
    LoadedData data = load_data(p.data, /*do_split=*/false);
    const int d = recalx_dataset_dim(data.full.get());

    std::vector<int> ranking;
    if (!p.ranking_file.empty()) {
        json g = parse_json_text(read_file(p.ranking_file), "ranking file");
        ranking = g.at("ranking").get<std::vector<int>>();
    } else if (!p.ranking.empty()) {
        ranking = parse_int_list(p.ranking, "--ranking");
    } else {
        fail_usage("pass --ranking or --ranking-file");
    }
    if (static_cast<int>(ranking.size()) != d)
        fail_usage("ranking must list all " + std::to_string(d) + " features");

    auto ks = parse_int_list(p.k, "--k");
    auto seeds = parse_u64_list(p.retrain_seeds, "--retrain-seeds");
    if (ks.empty() || seeds.empty()) fail_usage("--k and --retrain-seeds must be non-empty");

    json cfg;
    cfg["hidden_sizes"] = parse_int_list(p.hidden, "--hidden");
    cfg["epochs"] = p.epochs;
    cfg["batch_size"] = p.batch_size;
    cfg["learning_rate"] = p.learning_rate;
    cfg["momentum"] = p.momentum;
    cfg["weight_decay"] = p.weight_decay;

    CStr rj, rc;
    const std::string cfg_text = cfg.dump();
    check(recalx_roar(data.full.get(), ranking.data(), d, ks.data(), ks.size(), cfg_text.c_str(),
                      seeds.data(), seeds.size(), p.data.split_seed, rj.slot(), rc.slot()),
          "roar");

    ctx.write_json_artifact_text("roar.json", rj.str());
    ctx.write_csv_artifact("roar.csv", rc.str());
    if (p.common.emit_plotdata) {
        json parsed = parse_json_text(rj.str(), "roar");
        std::string tidy = "k,seed,loss\n";
        const auto& kv = parsed.at("k_values");
        const auto& sl = parsed.at("seed_loss");
        const auto& sv = parsed.at("seeds");
        for (size_t i = 0; i < kv.size(); ++i) {
            for (size_t sj = 0; sj < sv.size(); ++sj) {
                tidy += std::to_string(kv[i].get<int>());
                tidy += ',';
                tidy += std::to_string(sv[sj].get<uint64_t>());
                tidy += ',';
                tidy += fmt_double(sl[i][sj].get<double>());
                tidy += '\n';
            }
        }
        ctx.write_csv_artifact("plotdata.csv", tidy);
    }
    ctx.finish();
    std::cout << "eval-roar: " << ks.size() << " k values, " << seeds.size() << " seeds\n";
}

struct SensitivityParams {
    CommonOpts common;
    DataOpts data;
    StrategyOpts strategy;
    std::string model;
    std::string calibrator;
    std::string method = "shapley";
    double radius = 0.05;
    int probes = 10;
    size_t n = 50;
    size_t n_samples = 256;
    double kernel_width = 0.0;
    double ridge = 1e-3;
};

void run_sensitivity(SensitivityParams& p) {
    RunContext ctx = start("eval-sensitivity", p.common);
    ModelH m = load_model(p.model);
    CalibH calib = load_calibrator(p.calibrator);
    LoadedData data = load_data(p.data);
    const recalx_dataset* part = data.part(p.data.part);

    const std::string kind = p.strategy.strategy.empty() ? "zero" : p.strategy.strategy;
    StrategyH st = make_strategy(p.strategy, kind, data.stats_source());
    const std::string params = explain_params_json(p.n_samples, p.kernel_width, p.ridge);

    CStr sj;
    check(recalx_sensitivity(m.get(), calib.get(), part, p.method.c_str(), st.get(),
                             params.c_str(), p.radius, p.probes, p.n, ctx.seed(), sj.slot()),
          "sensitivity");
    ctx.write_json_artifact_text("sensitivity.json", sj.str());
    ctx.finish();
    json parsed = parse_json_text(sj.str(), "sensitivity");
    std::cout << "eval-sensitivity: mean s_avg " << parsed.at("mean_s_avg").get<double>()
              << ", mean s_max " << parsed.at("mean_s_max").get<double>() << "\n";
}

struct DecompositionParams {
    CommonOpts common;
    StrategyOpts strategy;
    std::string joint_path;
    std::string calibrator;
    double scale = 1.0;
};

void run_decomposition(DecompositionParams& p) {
    RunContext ctx = start("verify-decomposition", p.common);
    if (p.joint_path.empty()) fail_usage("--joint is required");
    const std::string text = read_file(p.joint_path);
    JointH joint;
    check(recalx_joint_from_json(text.c_str(), joint.slot()), "joint '" + p.joint_path + "'");
    const json jparsed = parse_json_text(text, "joint");
    const int d = static_cast<int>(jparsed.at("xs").at(0).size());

    const std::string kind = p.strategy.strategy.empty() ? "zero" : p.strategy.strategy;
    StrategyH st = make_strategy(p.strategy, kind, nullptr);

    ModelH oracle;
    check(recalx_model_oracle(joint.get(), st.get(), oracle.slot()), "oracle");
    ModelH scaled;
    const recalx_model* model = oracle.get();
    if (p.scale != 1.0) {
        check(recalx_model_scale_logits(oracle.get(), p.scale, scaled.slot()), "scaled model");
        model = scaled.get();
    }
    CalibH calib = load_calibrator(p.calibrator);

    json rows = json::array();
    double max_residual = 0.0;
    for (uint64_t mask = 0; mask < (1ULL << d); ++mask) {
        CStr dj;
        check(recalx_decomposition_exact(model, calib.get(), joint.get(), mask, d, st.get(),
                                         dj.slot()),
              "decomposition");
        json row = parse_json_text(dj.str(), "decomposition");
        char buf[20];
        std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(mask));
        row["kept"] = buf;
        row.erase("version");
        max_residual = std::max(max_residual, std::abs(row.at("residual").get<double>()));
        rows.push_back(std::move(row));
    }

    json out;
    out["version"] = 1;
    out["strategy"] = parse_json_text(strategy_json_of(st.get()), "strategy").at("kind");
    out["scale"] = p.scale;
    out["per_coalition"] = std::move(rows);
    out["max_abs_residual"] = max_residual;
    ctx.write_json_artifact("decomposition.json", out);
    ctx.finish();
    std::cout << "verify-decomposition: max |residual| " << max_residual << " over "
              << (1ULL << d) << " coalitions\n";
}

struct BoundParams {
    CommonOpts common;
    StrategyOpts strategy;
    std::string joint_path;
    double delta = 0.1;
    int trials = 200;
    std::string scales = "1,2,4,8";
};

void run_bound(BoundParams& p) {
    RunContext ctx = start("verify-bound", p.common);
    if (p.joint_path.empty()) fail_usage("--joint is required");
    const std::string text = read_file(p.joint_path);
    JointH joint;
    check(recalx_joint_from_json(text.c_str(), joint.slot()), "joint '" + p.joint_path + "'");

    const std::string kind = p.strategy.strategy.empty() ? "zero" : p.strategy.strategy;
    StrategyH st = make_strategy(p.strategy, kind, nullptr);

    auto scales = parse_double_list(p.scales, "--scales");
    if (scales.empty()) fail_usage("--scales must be non-empty");

    ModelH oracle;
    check(recalx_model_oracle(joint.get(), st.get(), oracle.slot()), "oracle");

    json per_scale = json::array();
    std::vector<double> mean_lhs;
    std::string tidy = "scale,trial,lhs\n";
    for (double scale : scales) {
        ModelH scaled;
        const recalx_model* model = oracle.get();
        if (scale != 1.0) {
            check(recalx_model_scale_logits(oracle.get(), scale, scaled.slot()), "scaled model");
            model = scaled.get();
        }
        CStr dj;
        // One shared seed: every scale sees the same trial points, so the
        // scale comparison is paired.
        check(recalx_drift_bound(joint.get(), model, st.get(), p.delta, p.trials, ctx.seed(),
                                 dj.slot()),
              "drift bound");
        json row = parse_json_text(dj.str(), "drift bound");
        mean_lhs.push_back(row.at("mean_lhs").get<double>());
        const auto& lhs = row.at("lhs");
        for (size_t t = 0; t < lhs.size(); ++t) {
            tidy += fmt_double(scale);
            tidy += ',';
            tidy += std::to_string(t);
            tidy += ',';
            tidy += fmt_double(lhs[t].get<double>());
            tidy += '\n';
        }
        row["scale"] = scale;
        row.erase("version");
        row.erase("lhs");
        per_scale.push_back(std::move(row));
    }

    bool non_decreasing = true;
    for (size_t i = 1; i < mean_lhs.size(); ++i)
        if (mean_lhs[i] + 1e-12 < mean_lhs[i - 1]) non_decreasing = false;

    // Pearson correlation between scale and mean drift, across scales.
    double correlation = 0.0;
    if (scales.size() >= 2) {
        const double n = static_cast<double>(scales.size());
        double mx = 0.0, my = 0.0;
        for (size_t i = 0; i < scales.size(); ++i) {
            mx += scales[i];
            my += mean_lhs[i];
        }
        mx /= n;
        my /= n;
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (size_t i = 0; i < scales.size(); ++i) {
            sxy += (scales[i] - mx) * (mean_lhs[i] - my);
            sxx += (scales[i] - mx) * (scales[i] - mx);
            syy += (mean_lhs[i] - my) * (mean_lhs[i] - my);
        }
        correlation = (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
    }

    json out;
    out["version"] = 1;
    out["delta"] = p.delta;
    out["trials"] = p.trials;
    out["strategy"] = parse_json_text(strategy_json_of(st.get()), "strategy").at("kind");
    out["scales"] = scales;
    out["per_scale"] = std::move(per_scale);
    out["mean_lhs"] = mean_lhs;
    out["mean_lhs_non_decreasing"] = non_decreasing;
    out["correlation_scale_mean_lhs"] = correlation;
    ctx.write_json_artifact("bound.json", out);
    if (p.common.emit_plotdata) ctx.write_csv_artifact("plotdata.csv", tidy);
    ctx.finish();
    std::cout << "verify-bound: mean lhs";
    for (double v : mean_lhs) std::cout << ' ' << v;
    std::cout << (non_decreasing ? " (non-decreasing)" : " (NOT non-decreasing)") << "\n";
}

// ---- wiring -----------------------------------------------------------------------

void register_commands(CLI::App& app) {
    {
        auto p = std::make_shared<GenDataParams>();
        auto* sub = app.add_subcommand("gen-data", "generate a synthetic dataset");
        add_common(*sub, p->common);
        p->common.binder.opt(*sub, "--kind", p->kind, "generator kind")
            ->check(CLI::IsMember({"finite", "planted", "moons"}));
        p->common.binder.opt(*sub, "--n", p->n, "number of rows");
        p->common.binder.opt(*sub, "--joint", p->joint_path,
                             "joint JSON for kind=finite (default: built-in fixture)");
        p->common.binder.opt(*sub, "--w", p->w, "class-logit weights for kind=planted");
        p->common.binder.opt(*sub, "--noise", p->noise, "coordinate noise for kind=moons");
        sub->callback([p] { run_gen_data(*p); });
    }
    {
        auto p = std::make_shared<TrainParams>();
        auto* sub = app.add_subcommand("train", "train an MLP classifier");
        add_common(*sub, p->common);
        add_data_opts(*sub, p->common.binder, p->data, "train");
        p->common.binder.opt(*sub, "--hidden", p->hidden, "hidden layer sizes, comma-separated");
        p->common.binder.opt(*sub, "--epochs", p->epochs, "training epochs");
        p->common.binder.opt(*sub, "--batch-size", p->batch_size, "minibatch size");
        p->common.binder.opt(*sub, "--learning-rate", p->learning_rate, "SGD step size");
        p->common.binder.opt(*sub, "--momentum", p->momentum, "SGD momentum");
        p->common.binder.opt(*sub, "--weight-decay", p->weight_decay, "L2 penalty on weights");
        sub->callback([p] { run_train(*p); });
    }
    {
        auto p = std::make_shared<CalibrateParams>();
        auto* sub = app.add_subcommand("calibrate", "fit a temperature calibrator");
        add_common(*sub, p->common);
        add_data_opts(*sub, p->common.binder, p->data, "val");
        add_strategy_opts(*sub, p->common.binder, p->strategy);
        p->common.binder.opt(*sub, "--model", p->model, "model JSON (required)");
        p->common.binder.opt(*sub, "--method", p->method, "calibration method")
            ->check(CLI::IsMember({"ts", "recalx"}));
        p->common.binder.opt(*sub, "--bins", p->bins, "perturbation-level bins (method=recalx)");
        p->common.binder.opt(*sub, "--reps", p->reps, "perturbed draws per validation point");
        sub->callback([p] { run_calibrate(*p); });
    }
    {
        auto p = std::make_shared<MeasureParams>();
        auto* sub =
            app.add_subcommand("measure", "per-level calibration-error profile");
        add_common(*sub, p->common, /*plotdata=*/true);
        add_data_opts(*sub, p->common.binder, p->data, "test");
        add_strategy_opts(*sub, p->common.binder, p->strategy);
        p->common.binder.opt(*sub, "--model", p->model, "model JSON");
        p->common.binder.opt(*sub, "--oracle", p->oracle,
                             "joint JSON; profile its Bayes oracle instead of a model");
        p->common.binder.opt(*sub, "--calibrator", p->calibrator, "calibrator JSON (optional)");
        p->common.binder.opt(*sub, "--levels", p->levels, "perturbation levels, comma-separated");
        p->common.binder.opt(*sub, "--reps", p->reps, "perturbed draws per point per level");
        p->common.binder.opt(*sub, "--estimator", p->estimator, "conditional estimator")
            ->check(CLI::IsMember({"exact", "kernel"}));
        p->common.binder.opt(*sub, "--bandwidth", p->bandwidth, "kernel bandwidth");
        p->common.binder.flag(*sub, "--no-loo", p->no_loo,
                              "kernel estimator includes each point itself");
        sub->callback([p] { run_measure(*p); });
    }
    {
        auto p = std::make_shared<ExplainParams>();
        auto* sub = app.add_subcommand("explain", "per-sample feature attributions");
        add_common(*sub, p->common);
        add_data_opts(*sub, p->common.binder, p->data, "test");
        add_strategy_opts(*sub, p->common.binder, p->strategy);
        p->common.binder.opt(*sub, "--model", p->model, "model JSON (required)");
        p->common.binder.opt(*sub, "--calibrator", p->calibrator, "calibrator JSON (optional)");
        p->common.binder.opt(*sub, "--method", p->method, "attribution method")
            ->check(CLI::IsMember({"shapley", "kernelshap", "lime", "ablation"}));
        p->common.binder.opt(*sub, "--n", p->n, "rows to explain");
        p->common.binder.opt(*sub, "--n-samples", p->n_samples,
                             "coalition draws (kernelshap/lime)");
        p->common.binder.opt(*sub, "--kernel-width", p->kernel_width,
                             "lime proximity width (<= 0: default)");
        p->common.binder.opt(*sub, "--ridge", p->ridge, "lime ridge penalty");
        p->common.binder.opt(*sub, "--target", p->target,
                             "class to explain (-1: the model's own prediction)");
        sub->callback([p] { run_explain(*p); });
    }
    {
        auto p = std::make_shared<RoarParams>();
        auto* sub = app.add_subcommand("eval-roar", "remove-and-retrain fidelity curve");
        add_common(*sub, p->common, /*plotdata=*/true);
        add_data_opts(*sub, p->common.binder, p->data, "all", /*with_part=*/false);
        p->common.binder.opt(*sub, "--ranking", p->ranking,
                             "feature ranking, most important first");
        p->common.binder.opt(*sub, "--ranking-file", p->ranking_file,
                             "JSON file with a \"ranking\" array (e.g. explain's global.json)");
        p->common.binder.opt(*sub, "--k", p->k, "how many top features to remove, per point");
        p->common.binder.opt(*sub, "--retrain-seeds", p->retrain_seeds,
                             "one retrain per seed, comma-separated");
        p->common.binder.opt(*sub, "--hidden", p->hidden, "hidden layer sizes");
        p->common.binder.opt(*sub, "--epochs", p->epochs, "training epochs");
        p->common.binder.opt(*sub, "--batch-size", p->batch_size, "minibatch size");
        p->common.binder.opt(*sub, "--learning-rate", p->learning_rate, "SGD step size");
        p->common.binder.opt(*sub, "--momentum", p->momentum, "SGD momentum");
        p->common.binder.opt(*sub, "--weight-decay", p->weight_decay, "L2 penalty");
        sub->callback([p] { run_roar(*p); });
    }
    {
        auto p = std::make_shared<SensitivityParams>();
        auto* sub = app.add_subcommand("eval-sensitivity",
                                       "attribution robustness to input perturbations");
        add_common(*sub, p->common);
        add_data_opts(*sub, p->common.binder, p->data, "test");
        add_strategy_opts(*sub, p->common.binder, p->strategy);
        p->common.binder.opt(*sub, "--model", p->model, "model JSON (required)");
        p->common.binder.opt(*sub, "--calibrator", p->calibrator, "calibrator JSON (optional)");
        p->common.binder.opt(*sub, "--method", p->method, "attribution method")
            ->check(CLI::IsMember({"shapley", "kernelshap", "lime", "ablation"}));
        p->common.binder.opt(*sub, "--radius", p->radius, "probe radius (L-infinity)");
        p->common.binder.opt(*sub, "--probes", p->probes, "probes per sample");
        p->common.binder.opt(*sub, "--n", p->n, "samples to probe");
        p->common.binder.opt(*sub, "--n-samples", p->n_samples, "coalition draws");
        p->common.binder.opt(*sub, "--kernel-width", p->kernel_width, "lime proximity width");
        p->common.binder.opt(*sub, "--ridge", p->ridge, "lime ridge penalty");
        sub->callback([p] { run_sensitivity(*p); });
    }
    {
        auto p = std::make_shared<DecompositionParams>();
        auto* sub = app.add_subcommand(
            "verify-decomposition",
            "exact predictive-power decomposition over every coalition");
        add_common(*sub, p->common);
        add_strategy_opts(*sub, p->common.binder, p->strategy);
        p->common.binder.opt(*sub, "--joint", p->joint_path, "joint JSON (required)");
        p->common.binder.opt(*sub, "--calibrator", p->calibrator, "calibrator JSON (optional)");
        p->common.binder.opt(*sub, "--scale", p->scale,
                             "logit scale of the checked model (1 = the oracle itself)");
        sub->callback([p] { run_decomposition(*p); });
    }
    {
        auto p = std::make_shared<BoundParams>();
        auto* sub = app.add_subcommand("verify-bound",
                                       "explanation-drift bound across miscalibration scales");
        add_common(*sub, p->common, /*plotdata=*/true);
        add_strategy_opts(*sub, p->common.binder, p->strategy);
        p->common.binder.opt(*sub, "--joint", p->joint_path, "joint JSON (required)");
        p->common.binder.opt(*sub, "--delta", p->delta, "bound confidence parameter");
        p->common.binder.opt(*sub, "--trials", p->trials, "sampled inputs per scale");
        p->common.binder.opt(*sub, "--scales", p->scales, "logit scales, comma-separated");
        sub->callback([p] { run_bound(*p); });
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"perturbation explanations with perturbation-aware recalibration"};
    app.require_subcommand(1);
    register_commands(app);
    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
