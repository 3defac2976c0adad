#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bvlab/algebra.hpp"
#include "bvlab/potential.hpp"

namespace bvlab {

struct StepControl {
    double rtol = 1e-10;
    double atol = 1e-12;
    double step_cap = 0.5;  // internal step <= step_cap * epsilon
    double min_step = 1e-14;
    double checkpoints_per_unit = 2000.0;
    std::size_t max_steps = 50'000'000;
};

inline constexpr double kTolEnergy = 1e-6;

struct LedgerRecord {
    double t = 0.0;
    double kinetic = 0.0;      // eps^2/2 |u'|_A^2 (zero for first-order runs)
    double potential = 0.0;    // F(t, u)
    double dissipation = 0.0;  // accumulated eps * int |u'|_B^2 from the start
    double power = 0.0;        // accumulated int dF/dt(tau, u) from the start
    double g = 0.0;            // F + kinetic - power
    double residual = 0.0;     // energy identity defect between the start and t
};

struct Trajectory {
    bool first_order = false;
    double epsilon = 0.0;
    std::size_t dim = 0;
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> velocities;  // empty for first-order runs
    std::vector<LedgerRecord> ledger;
    std::optional<SpdMatrix> mass;       // A (second order)
    std::optional<SpdMatrix> viscosity;  // B, or the damping of a first-order run
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
};

// Shared uniform checkpoint grid; the last point is t1 exactly.
[[nodiscard]] std::vector<double> checkpoint_grid(double t0, double t1, double per_unit);

[[nodiscard]] Trajectory integrate_second_order(const Potential& p, const SpdMatrix& A, const SpdMatrix& B,
                                                double epsilon, const Vector& u0, const Vector& v0, double t0,
                                                double t1, const StepControl& ctrl = {});

[[nodiscard]] Trajectory integrate_gradient_flow(const Potential& p, double epsilon, const Vector& u0, double t0,
                                                 double t1, const StepControl& ctrl = {},
                                                 const std::optional<SpdMatrix>& damping = std::nullopt);

struct LedgerCheck {
    double max_pair_residual = 0.0;  // max over checkpoint pairs s < t
    double scale = 1.0;              // 1 + max |F|
    double max_g_increase = 0.0;     // max over t2 > t1 of g(t2) - g(t1)
    bool passed = false;
};

[[nodiscard]] LedgerCheck check_ledger(const Trajectory& traj, double tol_energy = kTolEnergy);

struct DiagnosticsReport {
    double sup_u = 0.0;
    double sup_eps_velocity = 0.0;
    double sup_eps2_acceleration = 0.0;
    double eps_int_velocity_sq = 0.0;
    double inv2eps_int_residual_sq = 0.0;  // (1/2eps) int |grad F + eps^2 A u''|^2
    double eps_abs_int_acc_grad = 0.0;     // eps |int <u'', grad F>|
    double inv2eps_int_grad_sq = 0.0;
    double eps3_int_acceleration_sq = 0.0;

    [[nodiscard]] std::vector<double> values() const;
    [[nodiscard]] static std::vector<std::string> names();
};

[[nodiscard]] DiagnosticsReport apriori_diagnostics(const Trajectory& traj, const Potential& p, const SpdMatrix& A,
                                                    const SpdMatrix& B);

struct DissipationMeasure {
    std::vector<double> edges;
    std::vector<double> mass;
    double total = 0.0;
};

// Bins the accumulated dissipation of the ledger, so the bins sum to the
// ledger total exactly.
[[nodiscard]] DissipationMeasure dissipation_measure(const Trajectory& traj, std::size_t bins);

// Accumulated dissipation at an arbitrary time, linear between checkpoints.
[[nodiscard]] double dissipation_at(const Trajectory& traj, double t);

[[nodiscard]] std::string trajectory_csv(const Trajectory& traj);

}  // namespace bvlab
