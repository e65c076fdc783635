#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "recalx/error.hpp"
#include "recalx/serialize.hpp"

using recalx::Error;

namespace {

// Unique scratch path under the test process's temp dir, removed on scope exit.
struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& name) {
        path = std::filesystem::temp_directory_path() /
               ("recalx_test_" + std::to_string(::getpid()) + "_" + name);
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
};

recalx::MlpClassifier tiny_mlp() {
    recalx::MlpClassifier m;
    m.dims = {2, 3, 2};
    m.weights = {{0.1, -0.2, 1.0 / 3.0, 0.5, -1e-7, 2.25}, {7.0, 0.125, -0.875, 1e300, 0.0, -0.25}};
    m.biases = {{0.0, -0.5, 1e-12}, {0.75, -2.0}};
    m.validate();
    return m;
}

}  // namespace

TEST_CASE("format_double round-trips awkward reals exactly") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, 1e300, -0.0, 0.0, 123456789.123456789,
                     2.2250738585072014e-308}) {
        const std::string s = recalx::format_double(x);
        CHECK(recalx::parse_double(s) == x);
    }
    CHECK(recalx::format_double(0.5) == "0.5");
    CHECK(recalx::format_double(-3.0) == "-3");
}

TEST_CASE("parse_double rejects trailing junk and non-numbers") {
    CHECK_THROWS_AS(recalx::parse_double("1.5x"), Error);
    CHECK_THROWS_AS(recalx::parse_double(""), Error);
    CHECK_THROWS_AS(recalx::parse_double("abc"), Error);
}

TEST_CASE("model json round trip preserves weights bit for bit") {
    const recalx::MlpClassifier m = tiny_mlp();
    const std::string text = recalx::model_to_json(m);
    const recalx::MlpClassifier back = recalx::model_from_json(text);
    CHECK(back.dims == m.dims);
    CHECK(back.weights == m.weights);  // exact, not approximate
    CHECK(back.biases == m.biases);
    // A second dump of the reloaded model is byte-identical.
    CHECK(recalx::model_to_json(back) == text);
}

TEST_CASE("model json rejects foreign versions and kinds") {
    const recalx::MlpClassifier m = tiny_mlp();
    std::string text = recalx::model_to_json(m);

    SUBCASE("bad version") {
        auto pos = text.find("\"version\": 1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 12, "\"version\": 9");
        CHECK_THROWS_AS(recalx::model_from_json(text), Error);
    }
    SUBCASE("bad kind") {
        auto pos = text.find("\"mlp\"");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 5, "\"rnn\"");
        CHECK_THROWS_AS(recalx::model_from_json(text), Error);
    }
    SUBCASE("not json at all") { CHECK_THROWS_AS(recalx::model_from_json("{nope"), Error); }
    SUBCASE("numeric weights instead of strings") {
        CHECK_THROWS_AS(recalx::model_from_json(
                            R"({"version":1,"kind":"mlp","activation":"relu",
                                "dims":[1,2],"weights":[[0.5,1.0]],"biases":[["0","0"]]})"),
                        Error);
    }
}

TEST_CASE("calibrator json round trip") {
    recalx::ReCalXCalibrator c;
    c.bins = 3;
    c.edges = recalx::ReCalXCalibrator::uniform_edges(3);
    c.temperatures = {1.0, 2.5, 1.0 / 3.0};
    c.strategy_name = "zero-baseline";
    c.validation_size = 17;
    c.bin_counts = {5, 6, 6};
    c.seed = 42;
    c.validate();

    const std::string text = recalx::calibrator_to_json(c);
    const recalx::ReCalXCalibrator back = recalx::calibrator_from_json(text);
    CHECK(back.bins == 3);
    CHECK(back.edges == c.edges);
    CHECK(back.temperatures == c.temperatures);
    CHECK(back.strategy_name == "zero-baseline");
    CHECK(back.seed == 42);
    CHECK(recalx::calibrator_to_json(back) == text);
}

TEST_CASE("strategy json round trips every kind") {
    using PS = recalx::PerturbationStrategy;
    for (const PS& s : {PS::zero(), PS::fixed({1.5, -2.0}), PS::mean({0.25, 0.75, 0.5}),
                        PS::noise(0.3)}) {
        const std::string text = recalx::strategy_to_json(s);
        const PS back = recalx::strategy_from_json(text);
        CHECK(back.kind == s.kind);
        CHECK(back.baseline == s.baseline);
        CHECK(back.sigma == s.sigma);
        CHECK(back.name == s.name);
    }
    CHECK_THROWS_AS(recalx::strategy_from_json(R"({"kind":"teleport"})"), Error);
}

TEST_CASE("joint json round trip preserves probabilities exactly") {
    const recalx::FiniteJoint j = recalx::test::fixture_joint();
    const std::string text = recalx::joint_to_json(j);
    const recalx::FiniteJoint back = recalx::joint_from_json(text);
    CHECK(back.n_classes == j.n_classes);
    CHECK(back.xs == j.xs);
    CHECK(back.ys == j.ys);
    CHECK(back.probs == j.probs);
    CHECK_NOTHROW(back.validate());
}

TEST_CASE("coalition json uses a hex mask and round trips") {
    const recalx::Coalition s = recalx::Coalition::of({0, 2, 5}, 6);
    const std::string text = recalx::coalition_to_json(s);
    CHECK(text.find("0x25") != std::string::npos);  // bits 0,2,5 = 0x25
    const recalx::Coalition back = recalx::coalition_from_json(text);
    CHECK(back == s);
    CHECK_THROWS_AS(recalx::coalition_from_json(R"({"d":3,"kept":"0x8"})"), Error);
}

TEST_CASE("synthetic spec json round trips each generator kind") {
    using recalx::SyntheticSpec;
    SUBCASE("finite") {
        SyntheticSpec s;
        s.kind = SyntheticSpec::Kind::finite;
        s.joint = recalx::test::fixture_joint();
        const SyntheticSpec back = recalx::synthetic_spec_from_json(recalx::synthetic_spec_to_json(s));
        CHECK(back.kind == SyntheticSpec::Kind::finite);
        CHECK(back.joint.probs == s.joint.probs);
    }
    SUBCASE("planted") {
        SyntheticSpec s;
        s.kind = SyntheticSpec::Kind::planted;
        s.w = {3.0, 1.0, 0.0};
        const SyntheticSpec back = recalx::synthetic_spec_from_json(recalx::synthetic_spec_to_json(s));
        CHECK(back.kind == SyntheticSpec::Kind::planted);
        CHECK(back.w == s.w);
    }
    SUBCASE("moons") {
        SyntheticSpec s;
        s.kind = SyntheticSpec::Kind::moons;
        s.noise = 0.2;
        const SyntheticSpec back = recalx::synthetic_spec_from_json(recalx::synthetic_spec_to_json(s));
        CHECK(back.kind == SyntheticSpec::Kind::moons);
        CHECK(back.noise == 0.2);
    }
}

TEST_CASE("dataset csv save and load round trip") {
    const recalx::Dataset ds = recalx::test::make_blobs(40, 3, 7);
    TempFile f("roundtrip.csv");
    recalx::dataset_save_csv(ds, f.path.string());
    const recalx::CsvLoadResult r =
        recalx::load_csv_dataset(f.path.string(), "label", ds.n_classes);
    CHECK(r.rows_dropped == 0);
    CHECK(r.dataset.n() == ds.n());
    CHECK(r.dataset.feature_names == ds.feature_names);
    CHECK(r.dataset.labels == ds.labels);
    CHECK(r.dataset.features == ds.features);  // shortest round-trip formatting is lossless
}

TEST_CASE("write_text_file and read_text_file round trip") {
    TempFile f("text.txt");
    const std::string body = "line one\nline two\n";
    recalx::write_text_file(f.path.string(), body);
    CHECK(recalx::read_text_file(f.path.string()) == body);
    CHECK_THROWS_AS(recalx::read_text_file((f.path.parent_path() / "missing_xyz.txt").string()),
                    Error);
}
