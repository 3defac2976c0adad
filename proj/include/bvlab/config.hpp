#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bvlab/cost.hpp"
#include "bvlab/critical.hpp"
#include "bvlab/flow.hpp"
#include "bvlab/limit.hpp"
#include "bvlab/potential.hpp"

namespace bvlab {

using Json = nlohmann::json;

// The published run-config schema (configs/run_config.schema.json).
[[nodiscard]] const Json& run_config_schema();

// Validates an instance against the subset of JSON Schema the config schema
// uses: type, const, enum, properties, required, additionalProperties,
// items, minItems, minLength, minimum, maximum, exclusiveMinimum, oneOf and
// local $ref. Returns one message per violation, each prefixed by its JSON
// pointer; empty means valid.
[[nodiscard]] std::vector<std::string> schema_errors(const Json& instance, const Json& schema);

struct RunConfig {
    std::string potential_kind;  // appendix, quadratic or custom-spline
    std::optional<Potential> potential;
    double eta = 0.05;  // appendix only
    std::optional<SpdMatrix> A;
    std::optional<SpdMatrix> B;
    std::optional<double> epsilon;
    std::vector<double> epsilons;
    bool first_order = false;
    Vector u0;
    Vector u0_slope;
    Vector v0;
    double t0 = 0.0;
    double t1 = 1.5;
    StepControl ctrl;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    CriticalOptions critical;
    CostOptions cost;
    LimitThresholds limit;
    CertifyOptions certify;

    [[nodiscard]] const Potential& energy() const { return *potential; }
    // The sweep over `epsilons`; throws ConfigError when it is not a valid sweep.
    [[nodiscard]] SweepConfig sweep() const;
};

// Throws Error(ConfigError) listing every schema violation, or the first
// semantic one (dimensions, SPD matrices, span).
[[nodiscard]] RunConfig parse_run_config(const Json& doc);
[[nodiscard]] RunConfig load_run_config(const std::string& path);

}  // namespace bvlab
