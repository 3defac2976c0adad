#include "bvlab/demo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bvlab/error.hpp"
#include "bvlab/report.hpp"

namespace bvlab {

namespace {

constexpr double kJumpTime = 1.0;

// The admissible shot from `from` with the largest energy drop.
Heteroclinic best_link(const Potential& p, const Vector& from, const SpdMatrix& A, const SpdMatrix& B, bool first_order) {
    const EquilibriumSpectrum sp = first_order ? linearize_first_order(p, kJumpTime, from, B)
                                               : linearize_equilibrium(p, kJumpTime, from, A, B);
    std::optional<Heteroclinic> best;
    std::string last_error = "no candidate direction";
    for (const Vector& d : candidate_directions(sp)) {
        try {
            Heteroclinic h = first_order ? shoot_first_order(p, kJumpTime, from, d, 1e-4, B)
                                         : shoot_heteroclinic(p, kJumpTime, from, d, 1e-4, A, B);
            if (!best || h.energy_drop > best->energy_drop) best = std::move(h);
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    if (!best) throw Error(ErrorCode::NoConvergence, "no heteroclinic from the jump point: " + last_error);
    return *best;
}

const JumpRecord* jump_near(const LimitReport& r, double t) {
    const JumpRecord* best = nullptr;
    for (const JumpRecord& j : r.jumps)
        if (!best || std::abs(j.t_star - t) < std::abs(best->t_star - t)) best = &j;
    return best;
}

CheckResult within(std::string name, double value, double target, double tol, std::string detail = "") {
    const double err = std::abs(value - target);
    return {std::move(name), err <= tol, err, tol, std::move(detail)};
}

CheckResult jump_check(const std::string& name, const LimitReport& r, double target) {
    const JumpRecord* j = jump_near(r, kJumpTime);
    CheckResult c{name, false, std::numeric_limits<double>::infinity(), 1e-3, "no jump found"};
    if (!j) return c;
    c.value = std::max(std::abs(j->t_star - kJumpTime), std::abs(j->u_plus[0] - target));
    c.passed = j->certified && c.value <= c.tolerance;
    c.detail = j->certified ? "certified" : "not certified";
    for (const std::string& f : j->failures) c.detail += "; " + f;
    return c;
}

Json limit_summary(const LimitReport& r, const BalanceReport& b, const std::vector<double>& tracking, double u14) {
    Json jumps = Json::array();
    for (const JumpRecord& j : r.jumps) jumps.push_back(to_json(j));
    Json eps = Json::array();
    for (double e : r.epsilons) eps.push_back(e);
    return {{"epsilons", eps},
            {"jumps", jumps},
            {"balance", to_json(b)},
            {"stability_by_eps", r.stability_by_eps},
            {"stability_decreasing", r.stability_decreasing},
            {"tracking_sup_0.1_0.9", tracking},
            {"u_at_1.4", u14},
            {"total_dissipation", r.total_dissipation}};
}

__attribute__((format(printf, 2, 3))) void line_to(std::ostringstream& o, const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    o << buf << '\n';
}

std::string format_text(const DemoResult& d) {
    std::ostringstream o;
    char buf[64];
    line_to(o, "Appendix example: eta = 0.05, A = 1, B = 1/4, jump at t = 1");
    line_to(o, "first_order_jump_target = %.9f", d.first_order_link.to_point[0]);
    line_to(o, "second_order_jump_target = %.9f", d.second_order_link.to_point[0]);
    line_to(o, "The first-order limit jumps from 0 to 1; the second-order limit jumps from 0 to 9.");
    line_to(o, "c_1(0,9) = %.6f, F_1(0) - F_1(9) = %.6f, relative error %.3e", d.cost_0_9, d.drop_0_9,
         std::abs(d.cost_0_9 - d.drop_0_9) / std::abs(d.drop_0_9));
    auto dyn = [&](const char* name, const LimitReport& r, const BalanceReport& b) {
        line_to(o, "%s sweep:", name);
        for (const JumpRecord& j : r.jumps) {
            line_to(o, "  jump t* = %.6f, u- = %.6f, u+ = %.6f, drop = %.6f, mu atom = %.6f (residual %.3e)", j.t_star,
                 j.u_minus[0], j.u_plus[0], j.energy_drop, j.mu_atom, j.atom_residual);
            if (j.cost_value) line_to(o, "    cost = %.6f (residual %.3e)", *j.cost_value, *j.cost_residual);
            if (j.chain) line_to(o, "    chain: %zu link(s), cost along %.6f", j.chain->m(), j.chain->total_cost_along);
            line_to(o, "    %s", j.certified ? "certified" : "NOT certified");
            for (const std::string& f : j.failures) line_to(o, "    failure: %s", f.c_str());
        }
        line_to(o, "  energy balance: max residual %.3e, bound %.3e, %s", b.max_residual, b.tol * b.scale,
             b.passed() ? "ok" : "FAILED");
        std::string stab;
        for (double s : r.stability_by_eps) {
            std::snprintf(buf, sizeof buf, " %.3g", s);
            stab += buf;
        }
        line_to(o, "  stability residual by eps:%s", stab.c_str());
    };
    dyn("second-order", d.second_order, d.second_order_balance);
    dyn("first-order", d.first_order, d.first_order_balance);
    line_to(o, "checks:");
    for (const CheckResult& c : d.checks)
        line_to(o, "  %-4s %-40s %.4e (tol %.4e) %s", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value, c.tolerance,
             c.detail.c_str());
    line_to(o, "%s", d.passed() ? "demo passed" : "demo FAILED");
    return o.str();
}

}  // namespace

double tracking_error(const Trajectory& traj, double lo, double hi) {
    double sup = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        if (t < lo || t > hi) continue;
        sup = std::max(sup, std::abs(traj.states[i][0] - minimizer_curve_appendix(t)));
    }
    return sup;
}

Vector value_at(const Trajectory& traj, double t) {
    if (traj.times.empty()) throw Error(ErrorCode::OutOfRange, "empty trajectory");
    const auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t);
    std::size_t k = static_cast<std::size_t>(it - traj.times.begin());
    if (k == traj.times.size() || (k > 0 && t - traj.times[k - 1] < traj.times[k] - t)) --k;
    return traj.states[k];
}

bool DemoResult::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

DemoResult run_appendix_demo(const CostOptions& cost) {
    DemoResult d;
    const AppendixPotential ap = make_appendix(0.05);
    const Potential& p = ap.potential;
    const SpdMatrix A = SpdMatrix::scalar(1, 1.0), B = SpdMatrix::scalar(1, 0.25);

    d.second_order_link = best_link(p, {0.0}, A, B, false);
    d.first_order_link = best_link(p, {0.0}, A, B, true);

    CertifyOptions cert;
    cert.cost = cost;
    const SweepConfig s2 = appendix_sweep(false);
    const std::vector<Trajectory> t2 = run_epsilon_sweep(s2);
    d.second_order = certify_jumps(estimate_limit(t2, p), p, A, B, cert);
    d.second_order_balance = verify_energy_balance(d.second_order, p, cert.balance_tol);

    const SweepConfig s1 = appendix_sweep(true);
    const std::vector<Trajectory> t1 = run_epsilon_sweep(s1);
    CertifyOptions cert1 = cert;
    cert1.with_cost = false;
    d.first_order = certify_jumps(estimate_limit(t1, p), p, A, B, cert1);
    d.first_order_balance = verify_energy_balance(d.first_order, p, cert1.balance_tol);

    d.drop_0_9 = p.eval(kJumpTime, Vector{0.0}) - p.eval(kJumpTime, Vector{9.0});
    const JumpRecord* j2 = jump_near(d.second_order, kJumpTime);
    const bool reuse = j2 && j2->cost_value && std::abs(j2->t_star - kJumpTime) <= 1e-12 &&
                       std::abs(j2->u_minus[0]) <= 1e-9 && std::abs(j2->u_plus[0] - 9.0) <= 1e-9;
    d.cost_0_9 = reuse ? *j2->cost_value : minimize_cost(p, kJumpTime, {0.0}, {9.0}, A, B, cost).value;

    for (const Trajectory& tr : t2) d.tracking_sup.push_back(tracking_error(tr, 0.1, 0.9));
    d.second_order_u_1_4 = value_at(t2.back(), 1.4)[0];
    d.first_order_u_1_4 = value_at(t1.back(), 1.4)[0];
    bool decreasing = true;
    for (std::size_t i = 1; i < d.tracking_sup.size(); ++i) decreasing = decreasing && d.tracking_sup[i] < d.tracking_sup[i - 1];

    d.checks.push_back(within("heteroclinic.second-order-endpoint", d.second_order_link.to_point[0], 9.0, 1e-3));
    d.checks.push_back(within("heteroclinic.first-order-endpoint", d.first_order_link.to_point[0], 1.0, 1e-3));
    d.checks.push_back(jump_check("limit.second-order-jump", d.second_order, 9.0));
    d.checks.push_back(jump_check("limit.first-order-jump", d.first_order, 1.0));
    d.checks.push_back({"limit.second-order-balance", d.second_order_balance.passed(),
                        d.second_order_balance.max_residual,
                        d.second_order_balance.tol * d.second_order_balance.scale, ""});
    d.checks.push_back({"limit.first-order-balance", d.first_order_balance.passed(), d.first_order_balance.max_residual,
                        d.first_order_balance.tol * d.first_order_balance.scale, ""});
    d.checks.push_back(within("cost.c1(0,9)-vs-drop", d.cost_0_9 / d.drop_0_9, 1.0, 1e-2, "relative"));
    d.checks.push_back({"tracking.sup-at-smallest-eps", d.tracking_sup.back() <= 0.05 && decreasing,
                        d.tracking_sup.back(), 0.05, decreasing ? "decreasing in eps" : "not decreasing in eps"});
    d.checks.push_back(within("post-jump.second-order-u(1.4)", d.second_order_u_1_4, 9.0, 0.1));
    d.checks.push_back(within("post-jump.first-order-u(1.4)", d.first_order_u_1_4, 1.0, 0.05));

    Json checks = Json::array();
    for (const CheckResult& c : d.checks) checks.push_back(to_json(c));
    d.summary = {{"problem", {{"eta", 0.05}, {"A", 1.0}, {"B", 0.25}, {"jump_time", kJumpTime}}},
                 {"first_order_jump_target", d.first_order_link.to_point[0]},
                 {"second_order_jump_target", d.second_order_link.to_point[0]},
                 {"heteroclinic", {{"first_order", to_json(d.first_order_link)},
                                   {"second_order", to_json(d.second_order_link)}}},
                 {"c1_0_9", d.cost_0_9},
                 {"energy_drop_0_9", d.drop_0_9},
                 {"c1_0_9_rel_error", std::abs(d.cost_0_9 - d.drop_0_9) / std::abs(d.drop_0_9)},
                 {"second_order", limit_summary(d.second_order, d.second_order_balance, d.tracking_sup,
                                                d.second_order_u_1_4)},
                 {"first_order", limit_summary(d.first_order, d.first_order_balance, {}, d.first_order_u_1_4)},
                 {"checks", checks},
                 {"passed", d.passed()}};
    d.text = format_text(d);
    return d;
}

}  // namespace bvlab
