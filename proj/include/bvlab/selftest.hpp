#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bvlab/assumptions.hpp"

namespace bvlab {

struct SelftestOptions {
    std::vector<std::string> groups;          // subset of selftest_groups(); empty runs all
    std::optional<std::string> inject_fault;  // "gradient": every potential reports a perturbed gradient
    std::uint64_t seed = 0;
};

struct SelftestReport {
    std::vector<CheckResult> checks;  // names are "<group>.<check>"

    [[nodiscard]] bool passed() const;
    [[nodiscard]] std::vector<std::string> failed() const;
    // Fixed-width pass/fail table, one row per check.
    [[nodiscard]] std::string table() const;
};

// algebra, derivatives, gradient, axioms
[[nodiscard]] const std::vector<std::string>& selftest_groups();

// Throws ConfigError for an unknown group or fault name.
[[nodiscard]] SelftestReport run_selftest(const SelftestOptions& opts = {});

// Max relative error of cost_gradient against central differences of
// cost_functional, max |g - fd| / max(1, max |g|), over `paths` seeded
// random paths through the box of the potential.
[[nodiscard]] double cost_gradient_error(const Potential& p, double t, const SpdMatrix& A, const SpdMatrix& B,
                                         std::size_t paths, std::uint64_t seed);

}  // namespace bvlab
