#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bvlab/algebra.hpp"
#include "bvlab/cost.hpp"
#include "bvlab/flow.hpp"
#include "bvlab/heteroclinic.hpp"
#include "bvlab/potential.hpp"

namespace bvlab {

// One sweep of the singularly perturbed problem. Initial data follow
// u0(eps) = u0 + eps * u0_slope and v0(eps) = v0, so u0 stays bounded and
// eps * v0 -> 0. First-order sweeps use B as the damping and ignore A and v0.
struct SweepConfig {
    SweepConfig(Potential potential, SpdMatrix A, SpdMatrix B);

    Potential potential;
    SpdMatrix A;
    SpdMatrix B;
    std::vector<double> epsilons;  // strictly decreasing
    double t0 = 0.0;
    double t1 = 1.5;
    Vector u0;
    Vector u0_slope;  // empty means zero
    Vector v0;        // empty means zero
    bool first_order = false;
    StepControl ctrl;

    [[nodiscard]] Vector initial_state(double epsilon) const;
    [[nodiscard]] Vector initial_velocity() const;
    // Throws ConfigError: fewer than three epsilons, a consecutive ratio
    // outside [1.5, 4], bad span or mismatched dimensions.
    void validate() const;
};

// The appendix sweep: eta = 0.05, A = 1, B = 1/4, u0 = -(1+eps) sqrt(1/3),
// v0 = 1, eps in {0.1, 0.05, 0.025, 0.0125} on [0, 1.5].
[[nodiscard]] SweepConfig appendix_sweep(bool first_order);

// F = 1/2 |u - t|^2 in one dimension, A = B = 1, eps in {0.04, 0.02, 0.01},
// started on the load at rest.
[[nodiscard]] SweepConfig quadratic_sweep();

// Integrates every member on the shared checkpoint grid and checks each
// energy ledger. Integrator errors are rethrown with the offending epsilon.
[[nodiscard]] std::vector<Trajectory> run_epsilon_sweep(const SweepConfig& cfg);

struct LimitThresholds {
    double agree_cap = 5e-2;         // smallest-pair agreement on the attached branch
    double attach_radius = 0.25;     // a state "sits on a branch" within this distance of a critical point
    std::optional<double> jump_threshold;  // default: 0.25 * min_gap of the critical set at the jump
    double atom_fraction = 0.05;     // cell mass needed, as a share of the total dissipation
    std::size_t window_cells = 5;    // dissipation window beyond the transition and its relaxation
    double relax_fraction = 1e-3;    // relaxed once the energy above the branch is this share of the drop
    std::size_t settle_cells = 20;   // attached cells needed to end a transition
    double max_disagreement = 0.2;   // NoConvergence above this share of the grid
    double stab_tol = 5e-2;
    double polish_tol = 1e-9;
};

struct JumpRecord {
    double t_star = 0.0;
    double bracket_lo = 0.0;  // last time on the incoming branch
    double bracket_hi = 0.0;  // first time on the outgoing branch
    bool fold = false;        // t_star located where the incoming branch ceases to exist
    Vector u_minus;
    Vector u_plus;
    bool u_minus_critical = false;
    bool u_plus_critical = false;
    double energy_drop = 0.0;  // F(t*, u-) - F(t*, u+)
    double relax_time = 0.0;   // the smallest-eps member has shed its excess energy here
    bool relaxed = false;      // false: it was still ringing at the end of the run
    double mu_atom = 0.0;      // smallest-eps dissipation from the bracket start to the relaxation, plus the window
    std::optional<double> cost_value;
    std::optional<JumpChain> chain;
    double atom_residual = 0.0;   // |energy_drop - mu_atom|
    std::optional<double> cost_residual;   // |energy_drop - cost_value|
    std::optional<double> chain_residual;  // |total_cost_along - cost_value|
    bool certified = false;
    std::vector<std::string> failures;
};

struct ConvergenceRow {
    double eps_coarse = 0.0;
    double eps_fine = 0.0;
    std::vector<double> sup_by_region;  // sup |u_fine - u_coarse| per region of LimitReport::regions
};

struct Region {
    double lo = 0.0;
    double hi = 0.0;
    bool transition = false;  // a jump bracket rather than a continuity region
};

struct LimitReport {
    bool first_order = false;
    std::vector<double> epsilons;
    std::vector<double> times;
    std::vector<Vector> u;               // limit estimate
    std::vector<Vector> u_smallest;      // the smallest-eps trajectory itself
    std::vector<double> grad_residual;   // |grad F(t, u(t))|
    std::vector<double> pair_gap;        // |u_eps_min - u_eps_2nd| (the Richardson error estimate)
    std::vector<bool> on_branch;         // u(t) is a polished critical point
    std::vector<bool> agree;
    std::vector<bool> in_layer;          // inside a transition layer of the two smallest members
    double disagreement_fraction = 0.0;  // share of grid times outside layers where the pair disagrees
    std::vector<JumpRecord> jumps;
    std::vector<double> f;               // F(t,u) - int_0^t dF/dr(r,u) dr
    std::vector<double> interval_balance;  // f(t_{i+1}) - f(t_i) + mu((t_i, t_{i+1}])
    std::vector<Region> regions;
    std::vector<ConvergenceRow> convergence;
    std::vector<double> stability_by_eps;  // max gradient residual of each member outside [bracket_lo, relax_time]
    double stab_tol = 5e-2;
    bool stability_decreasing = false;
    bool stable_at_smallest = false;
    double total_dissipation = 0.0;
    double jump_threshold = 0.0;

    [[nodiscard]] std::vector<double> mu_atoms() const;
    [[nodiscard]] bool all_certified() const;
};

// The limit of the sweep without certification. Throws NoConvergence when
// the two smallest members disagree on more than max_disagreement of the
// grid outside transition layers, TooFewPoints with fewer than three members.
[[nodiscard]] LimitReport estimate_limit(const std::vector<Trajectory>& trajs, const Potential& p,
                                         const LimitThresholds& thresholds = {});

struct CertifyOptions {
    CostOptions cost;
    ChainOptions chain;              // first_order and initial_datum are set per jump
    double identity_rel_tol = 1e-2;  // cost and chain identities, relative to the drop
    double balance_tol = 5e-2;       // atom identity, times (1 + max |F|)
    bool with_cost = true;           // needs inertia; skipped for first-order sweeps
};

// Adds cost, chain and identity residuals to each jump. Failures are
// recorded on the jump and never thrown.
[[nodiscard]] LimitReport certify_jumps(LimitReport report, const Potential& p, const SpdMatrix& A,
                                        const SpdMatrix& B, const CertifyOptions& opts = {});

struct BalanceReport {
    double max_residual = 0.0;       // over all grid pairs s < t and the jump instants
    double max_jump_residual = 0.0;  // |F(t,u-) - F(t,u+) - mu({t})| at the jumps
    double scale = 1.0;              // 1 + max |F(t, u(t))|
    double tol = 5e-2;
    double max_f_increase = 0.0;     // inside continuity regions
    bool atoms_positive = true;
    bool f_monotone = true;
    double residual_worst_s = 0.0;
    double residual_worst_t = 0.0;
    std::vector<std::string> violations;
    [[nodiscard]] bool passed() const { return violations.empty(); }
};

// tol is relative to scale.
[[nodiscard]] BalanceReport verify_energy_balance(const LimitReport& report, const Potential& p,
                                                  double tol = 5e-2);

[[nodiscard]] std::string limit_csv(const LimitReport& report);

}  // namespace bvlab
