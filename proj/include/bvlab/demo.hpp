#pragma once

#include <string>
#include <vector>

#include "bvlab/assumptions.hpp"
#include "bvlab/config.hpp"
#include "bvlab/heteroclinic.hpp"
#include "bvlab/limit.hpp"

namespace bvlab {

// The two-dynamics appendix demonstration: eta = 0.05, A = 1, B = 1/4.
struct DemoResult {
    Heteroclinic second_order_link;  // from 0 at t = 1 under the damped inertial flow
    Heteroclinic first_order_link;   // from 0 at t = 1 under the gradient flow
    LimitReport second_order;
    LimitReport first_order;
    BalanceReport second_order_balance;
    BalanceReport first_order_balance;
    double cost_0_9 = 0.0;      // c_1(0, 9)
    double drop_0_9 = 0.0;      // F_1(0) - F_1(9)
    std::vector<double> tracking_sup;  // sup over [0.1, 0.9] of |u_eps - phi| per second-order member
    double second_order_u_1_4 = 0.0;   // smallest-eps value at t = 1.4
    double first_order_u_1_4 = 0.0;
    std::vector<CheckResult> checks;
    Json summary;
    std::string text;

    [[nodiscard]] bool passed() const;
};

[[nodiscard]] DemoResult run_appendix_demo(const CostOptions& cost = {});

// sup over [lo, hi] of |u(t) - phi(t)| on the checkpoints of a 1-D trajectory.
[[nodiscard]] double tracking_error(const Trajectory& traj, double lo, double hi);

// Checkpoint value nearest to t.
[[nodiscard]] Vector value_at(const Trajectory& traj, double t);

}  // namespace bvlab
