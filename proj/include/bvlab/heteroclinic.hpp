#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bvlab/algebra.hpp"
#include "bvlab/error.hpp"
#include "bvlab/potential.hpp"

namespace bvlab {

// Spectrum of the phase-space linearization [[0, I], [-A^{-1}H, -A^{-1}B]].
// Eigenvalues off the real axis always have negative real part when A and B
// are SPD, so the unstable part is real and is found from the symmetric
// pencil lambda^2 A + lambda B + H.
struct EquilibriumSpectrum {
    Vector hess_eigs;                     // eigenvalues of H, ascending
    Vector unstable_rates;                // positive real eigenvalues
    std::vector<Vector> unstable_dirs;    // position part of each unstable eigenvector, unit length
    std::vector<Vector> neutral_dirs;     // Hessian eigenvectors behind near-zero eigenvalues
    std::size_t stable_count = 0;         // eigenvalues with Re < 0 (counted with multiplicity)
    bool degenerate = false;              // some |Re lambda| <= degenerate_tol
    double residual = 0.0;                // gradient norm at the point
};

[[nodiscard]] EquilibriumSpectrum linearize_equilibrium(const Potential& p, double t, const Vector& point,
                                                        const SpdMatrix& A, const SpdMatrix& B,
                                                        double degenerate_tol = 1e-8, double tol_crit = 1e-9);

// Same for the gradient flow damping * v' = -grad F: rates are the positive
// eigenvalues of -damping^{-1} H.
[[nodiscard]] EquilibriumSpectrum linearize_first_order(const Potential& p, double t, const Vector& point,
                                                        const SpdMatrix& damping, double degenerate_tol = 1e-8,
                                                        double tol_crit = 1e-9);

// Both signs of every unstable direction, then of every neutral one.
[[nodiscard]] std::vector<Vector> candidate_directions(const EquilibriumSpectrum& sp);

struct ShotControl {
    double endpoint_tol = 1e-5;
    double settle_tol = 1e-7;
    int settle_count = 5;
    double horizon = 1e4;
    double sample_spacing = 0.05;
    double rtol = 1e-11;
    double atol = 1e-13;
    double h_max = 0.5;
    double box_inflation = 0.5;
    double tol_crit = 1e-9;
    bool check_robustness = true;  // repeat with delta0/10 and keep the finer shot
};

struct Heteroclinic {
    double t = 0.0;
    bool first_order = false;
    Vector from_point;
    Vector to_point;
    double delta = 0.0;  // start offset of the reported shot
    std::vector<double> s;
    std::vector<Vector> v;
    std::vector<Vector> dv;
    double residual = 0.0;         // max ODE defect over interior samples, relative to 1 + |grad F|
    double start_error = 0.0;      // max(|v - from|, |v'|) at the left end
    double end_error = 0.0;        // same at the right end against to_point
    double cost_along = 0.0;       // integral of the dissipation rate |v'|_B^2
    double energy_drop = 0.0;      // F(from) - F(to)
    double max_energy_increase = 0.0;
    bool robust = false;
    double robustness_shift = 0.0;  // |to(delta0) - to(delta0/10)|
};

[[nodiscard]] Heteroclinic shoot_heteroclinic(const Potential& p, double t, const Vector& from_point,
                                              const Vector& direction, double delta0, const SpdMatrix& A,
                                              const SpdMatrix& B, const ShotControl& ctrl = {});

[[nodiscard]] Heteroclinic shoot_first_order(const Potential& p, double t, const Vector& from_point,
                                             const Vector& direction, double delta0, const SpdMatrix& damping,
                                             const ShotControl& ctrl = {});

// A link released at rest from a non-critical state (the initial-datum jump).
[[nodiscard]] Heteroclinic release_from_rest(const Potential& p, double t, const Vector& start, const SpdMatrix& A,
                                             const SpdMatrix& B, bool first_order, const ShotControl& ctrl = {});

struct ChainOptions {
    bool first_order = false;     // use B as the damping of the gradient flow
    bool initial_datum = false;   // u_minus need not be critical
    double delta0 = 1e-4;
    double degenerate_tol = 1e-8;
    double match_tol = 1e-3;      // a link "reaches" u_plus when its end is this close
    std::size_t max_links = 0;    // 0: number of critical points in the box
    ShotControl shot;
};

struct JumpChain {
    double t = 0.0;
    Vector u_minus;
    Vector u_plus;
    std::vector<Heteroclinic> links;
    double total_cost_along = 0.0;
    double energy_drop = 0.0;
    [[nodiscard]] std::size_t m() const noexcept { return links.size(); }
};

class ChainStuckError : public Error {
public:
    ChainStuckError(std::string what, JumpChain partial)
        : Error(ErrorCode::ChainStuck, std::move(what)), partial_(std::move(partial)) {}
    [[nodiscard]] const JumpChain& partial() const noexcept { return partial_; }

private:
    JumpChain partial_;
};

[[nodiscard]] JumpChain build_jump_chain(const Potential& p, double t, const Vector& u_minus, const Vector& u_plus,
                                         const SpdMatrix& A, const SpdMatrix& B, const ChainOptions& opts = {});

[[nodiscard]] std::string heteroclinic_csv(const Heteroclinic& link);

}  // namespace bvlab
