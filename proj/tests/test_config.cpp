#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bvlab/config.hpp"
#include "bvlab/error.hpp"

using namespace bvlab;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(BVLAB_SOURCE_DIR) / "configs";

std::string config_message(const Json& doc) {
    try {
        (void)parse_run_config(doc);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        return e.what();
    }
    FAIL("expected a ConfigError for " << doc.dump());
    return "";
}

Json appendix_doc() { return Json{{"potential", {{"kind", "appendix"}}}}; }

}  // namespace

TEST_CASE("the embedded schema is the published file") {
    std::ifstream in(kConfigs / "run_config.schema.json");
    REQUIRE(in.good());
    CHECK(Json::parse(in) == run_config_schema());
}

TEST_CASE("every shipped config validates and parses") {
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
        const std::string name = entry.path().filename().string();
        if (entry.path().extension() != ".json" || name == "run_config.schema.json") continue;
        ++count;
        std::ifstream in(entry.path());
        const Json doc = Json::parse(in);
        CHECK_MESSAGE(schema_errors(doc, run_config_schema()).empty(), name);
        CHECK_NOTHROW_MESSAGE((void)load_run_config(entry.path().string()), name);
    }
    CHECK(count >= 5);
}

TEST_CASE("appendix defaults") {
    const RunConfig rc = parse_run_config(appendix_doc());
    CHECK(rc.potential_kind == "appendix");
    CHECK(rc.eta == 0.05);
    CHECK(rc.A->matrix()(0, 0) == 1.0);
    CHECK(rc.B->matrix()(0, 0) == 0.25);
    CHECK(rc.t0 == 0.0);
    CHECK(rc.t1 == 1.5);
    CHECK(rc.seed == 0);
    CHECK(rc.u0[0] == doctest::Approx(-std::sqrt(1.0 / 3.0)));
    CHECK(rc.v0[0] == 1.0);
    CHECK(rc.epsilons.empty());
    CHECK_THROWS_AS((void)rc.sweep(), Error);
}

TEST_CASE("matrix shorthands") {
    Json doc = appendix_doc();
    doc["A"] = "identity";
    doc["B"] = "scalar:0.5";
    RunConfig rc = parse_run_config(doc);
    CHECK(rc.A->matrix()(0, 0) == 1.0);
    CHECK(rc.B->matrix()(0, 0) == 0.5);
    doc["B"] = "scalar:2.5e-1";
    CHECK(parse_run_config(doc).B->matrix()(0, 0) == 0.25);
    doc["B"] = Json::array({Json::array({3.0})});
    CHECK(parse_run_config(doc).B->matrix()(0, 0) == 3.0);
    doc["B"] = "scalar:-1";
    CHECK(config_message(doc).find("B") != std::string::npos);
    doc["B"] = "scalar:abc";
    CHECK(config_message(doc).find("/B") != std::string::npos);
    doc["B"] = 0.0;
    (void)config_message(doc);
}

TEST_CASE("matrices must be square, symmetric and positive definite") {
    Json doc{{"potential", {{"kind", "quadratic"}, {"load", Json::array({Json::array({0.0, 1.0}), Json::array({0.0})})}}}};
    doc["A"] = Json::array({Json::array({1.0, 2.0}), Json::array({2.0, 1.0})});
    CHECK(config_message(doc).find("A") != std::string::npos);
    doc["A"] = Json::array({Json::array({1.0, 0.5}), Json::array({0.0, 1.0})});
    (void)config_message(doc);
    doc["A"] = Json::array({Json::array({1.0, 0.0})});
    (void)config_message(doc);
    doc["A"] = Json::array({Json::array({2.0, 0.5}), Json::array({0.5, 1.0})});
    CHECK(parse_run_config(doc).A->dim() == 2);
}

TEST_CASE("quadratic load forms") {
    Json doc{{"potential", {{"kind", "quadratic"}, {"load", "t"}}}};
    RunConfig rc = parse_run_config(doc);
    CHECK(rc.energy().dim() == 1);
    CHECK(rc.energy().eval(0.7, Vector{0.2}) == doctest::Approx(0.5 * 0.25));
    doc["potential"]["load"] = Json::array({1.0, 0.0, 2.0});
    rc = parse_run_config(doc);
    CHECK(rc.energy().dim() == 1);
    CHECK(rc.energy().grad(0.5, Vector{0.0})[0] == doctest::Approx(-1.5));
    doc["potential"]["load"] = Json::array({Json::array({0.0, 1.0}), Json::array({3.0})});
    rc = parse_run_config(doc);
    CHECK(rc.energy().dim() == 2);
    doc["potential"]["load"] = "s";
    (void)config_message(doc);
}

TEST_CASE("schema violations are reported with their pointers") {
    Json doc = appendix_doc();
    doc["colour"] = "blue";
    CHECK(config_message(doc).find("colour") != std::string::npos);
    CHECK(config_message(Json{{"A", 1.0}}).find("potential") != std::string::npos);
    doc = appendix_doc();
    doc["epsilons"] = Json::array({0.1, -0.05, 0.025});
    CHECK(config_message(doc).find("/epsilons/1") != std::string::npos);
    doc = appendix_doc();
    doc["potential"]["kind"] = "cubic";
    (void)config_message(doc);
    doc = appendix_doc();
    doc["span"] = {{"t0", 1.0}, {"t1", 0.5}};
    (void)config_message(doc);
    doc = appendix_doc();
    doc["initial"] = {{"u0", Json::array({1.0, 2.0})}};
    CHECK(config_message(doc).find("u0") != std::string::npos);
    (void)config_message(Json::array({1, 2}));
}

TEST_CASE("custom spline data errors surface as config errors") {
    Json doc{{"potential",
              {{"kind", "custom-spline"},
               {"knots", Json::array({0.0, 1.0, 2.0})},
               {"values", Json::array({0.0, 1.0})},
               {"first", Json::array({0.0, 0.0, 0.0})},
               {"second", Json::array({1.0, 1.0, 1.0})}}}};
    doc["initial"] = {{"u0", Json::array({0.0})}};
    (void)config_message(doc);
    doc["potential"]["values"] = Json::array({0.0, 1.0, 4.0});
    CHECK_NOTHROW((void)parse_run_config(doc));
}

TEST_CASE("validator subset on small schemas") {
    const Json schema = Json::parse(R"({
        "type": "object", "additionalProperties": false, "required": ["n"],
        "properties": {
            "n": {"type": "integer", "minimum": 1, "maximum": 3},
            "s": {"type": "string", "minLength": 2, "pattern": "^a"},
            "e": {"enum": ["x", "y"]},
            "l": {"type": "array", "minItems": 2, "items": {"type": "number", "exclusiveMinimum": 0}},
            "o": {"oneOf": [{"type": "number"}, {"type": "string"}]}
        }})");
    CHECK(schema_errors(Json::parse(R"({"n": 2, "s": "ab", "e": "x", "l": [1, 2], "o": 3})"), schema).empty());
    CHECK(schema_errors(Json::parse(R"({"n": 2.5})"), schema).size() == 1);
    CHECK(schema_errors(Json::parse(R"({"n": 4})"), schema).size() == 1);
    CHECK(schema_errors(Json::parse(R"({"n": 1, "s": "b"})"), schema).size() == 2);
    CHECK(schema_errors(Json::parse(R"({"n": 1, "e": "z"})"), schema).size() == 1);
    CHECK(schema_errors(Json::parse(R"({"n": 1, "l": [0]})"), schema).size() == 2);
    CHECK(schema_errors(Json::parse(R"({"n": 1, "o": true})"), schema).size() == 1);
    CHECK(schema_errors(Json::parse(R"({"n": 1, "q": 0})"), schema).size() == 1);
    CHECK(schema_errors(Json::parse(R"({})"), schema).size() == 1);
}
