#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bvlab/potential.hpp"

namespace bvlab {

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;      // measured quantity
    double tolerance = 0.0;  // bound it is compared against
    std::string detail;
};

struct DerivativeConsistency {
    double grad_error = 0.0;     // max |grad - FD(eval)| / (1 + |grad|)
    double hess_error = 0.0;     // max |hess - FD(grad)| / (1 + |hess|)
    double dt_error = 0.0;       // max |dt - FD_t(eval)| / (1 + |dt|)
    double dt_grad_error = 0.0;  // max |dt_grad - FD_t(grad)| / (1 + |dt_grad|)
    double hess_asymmetry = 0.0;
};

struct PowerControlFit {
    double c1 = 0.0;
    double c2 = 0.0;
    double max_violation = 0.0;  // max of |dt F| - (c1 F + c2) over samples
    double c2_feasible = 0.0;    // c2 raised until no sample violates
};

struct AppendixConditions {
    bool smoothness = false;  // C^3 joins at all knots and F1 = -x^3 on x <= 0
    bool h1 = false;
    bool h2 = false;
    bool h3 = false;
    bool h4 = false;
    bool h5 = false;
    bool tail = false;
    std::vector<double> roots;
    std::string detail;

    [[nodiscard]] bool all() const { return smoothness && h1 && h2 && h3 && h4 && h5 && tail; }
};

struct AssumptionReport {
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    DerivativeConsistency derivatives;
    PowerControlFit power;
    double critical_min_gap = 0.0;
    double coercivity_margin = 0.0;
    std::optional<AppendixConditions> appendix;
    std::vector<CheckResult> checks;

    [[nodiscard]] bool all_passed() const;
    [[nodiscard]] const CheckResult* find(const std::string& name) const;
};

inline constexpr double kGradTol = 1e-6;
inline constexpr double kHessTol = 1e-5;
inline constexpr double kDtTol = 1e-6;

[[nodiscard]] DerivativeConsistency check_derivatives(const Potential& p, std::size_t samples, std::uint64_t seed);

[[nodiscard]] AppendixConditions check_appendix_conditions(const ScalarProfile& f1, double eta);

// Sampled proxies for the standing assumptions. When `appendix` is given,
// the root-layout conditions of the appendix profile are checked as well.
[[nodiscard]] AssumptionReport verify_assumptions(const Potential& p, std::size_t samples, std::uint64_t seed,
                                                  const AppendixSpec* appendix = nullptr);

}  // namespace bvlab
