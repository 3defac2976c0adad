#include "bvlab/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bvlab/error.hpp"

namespace bvlab {

namespace {

// JSON has no infinities or NaN; they become null.
Json num(double x) { return std::isfinite(x) ? Json(x) : Json(); }

Json vec(const Vector& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

template <class T>
Json opt(const std::optional<T>& v) {
    return v ? num(*v) : Json();
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    std::error_code ec;
    if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
    if (ec) throw Error(ErrorCode::OutOfRange, "cannot create directory for " + path + ": " + ec.message());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::OutOfRange, "cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw Error(ErrorCode::OutOfRange, "write failed for " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error(ErrorCode::OutOfRange, "cannot move " + tmp.string() + " to " + path + ": " + ec.message());
    }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json to_json(const LedgerCheck& c) {
    return {{"max_pair_residual", num(c.max_pair_residual)},
            {"scale", num(c.scale)},
            {"max_g_increase", num(c.max_g_increase)},
            {"passed", c.passed}};
}

Json to_json(const DiagnosticsReport& d) {
    Json j = Json::object();
    const auto names = DiagnosticsReport::names();
    const auto values = d.values();
    for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = num(values[i]);
    return j;
}

Json to_json(const CriticalSearch& s) {
    Json pts = Json::array();
    for (const CriticalPoint& c : s.points)
        pts.push_back({{"location", vec(c.location)},
                       {"residual", num(c.residual)},
                       {"hess_eigs", vec(c.hess_eigs)},
                       {"kind", to_string(c.kind)}});
    return {{"points", pts}, {"min_gap", num(min_gap(s.points))}, {"seeds", s.seeds}, {"diverged", s.diverged}};
}

Json to_json(const CostResult& r) {
    return {{"value", num(r.value)},
            {"discrete_value", num(r.discrete_value)},
            {"fine_value", num(r.fine_value)},
            {"N_used", num(r.N_used)},
            {"nodes", r.path.m},
            {"restarts_used", r.restarts_used},
            {"converged", r.converged},
            {"gradient_norm", num(r.gradient_norm)},
            {"level_values", vec(r.level_values)},
            {"seed_label", r.seed_label}};
}

Json to_json(const Heteroclinic& h) {
    return {{"t", num(h.t)},
            {"first_order", h.first_order},
            {"from", vec(h.from_point)},
            {"to", vec(h.to_point)},
            {"delta", num(h.delta)},
            {"samples", h.s.size()},
            {"duration", h.s.empty() ? Json(0.0) : num(h.s.back() - h.s.front())},
            {"residual", num(h.residual)},
            {"start_error", num(h.start_error)},
            {"end_error", num(h.end_error)},
            {"cost_along", num(h.cost_along)},
            {"energy_drop", num(h.energy_drop)},
            {"max_energy_increase", num(h.max_energy_increase)},
            {"robust", h.robust},
            {"robustness_shift", num(h.robustness_shift)}};
}

Json to_json(const JumpChain& c) {
    Json links = Json::array();
    for (const Heteroclinic& h : c.links) links.push_back(to_json(h));
    return {{"t", num(c.t)},
            {"u_minus", vec(c.u_minus)},
            {"u_plus", vec(c.u_plus)},
            {"m", c.m()},
            {"links", links},
            {"total_cost_along", num(c.total_cost_along)},
            {"energy_drop", num(c.energy_drop)}};
}

Json to_json(const JumpRecord& j) {
    return {{"t_star", num(j.t_star)},
            {"bracket", {num(j.bracket_lo), num(j.bracket_hi)}},
            {"fold", j.fold},
            {"u_minus", vec(j.u_minus)},
            {"u_plus", vec(j.u_plus)},
            {"u_minus_critical", j.u_minus_critical},
            {"u_plus_critical", j.u_plus_critical},
            {"energy_drop", num(j.energy_drop)},
            {"relax_time", num(j.relax_time)},
            {"relaxed", j.relaxed},
            {"mu_atom", num(j.mu_atom)},
            {"cost_value", opt(j.cost_value)},
            {"chain", j.chain ? to_json(*j.chain) : Json()},
            {"atom_residual", num(j.atom_residual)},
            {"cost_residual", opt(j.cost_residual)},
            {"chain_residual", opt(j.chain_residual)},
            {"certified", j.certified},
            {"failures", j.failures}};
}

Json to_json(const LimitReport& r) {
    Json jumps = Json::array();
    for (const JumpRecord& j : r.jumps) jumps.push_back(to_json(j));
    Json u = Json::array(), us = Json::array();
    for (const Vector& v : r.u) u.push_back(vec(v));
    for (const Vector& v : r.u_smallest) us.push_back(vec(v));
    Json regions = Json::array();
    for (const Region& g : r.regions) regions.push_back({{"lo", num(g.lo)}, {"hi", num(g.hi)}, {"transition", g.transition}});
    Json conv = Json::array();
    for (const ConvergenceRow& c : r.convergence)
        conv.push_back({{"eps_coarse", num(c.eps_coarse)}, {"eps_fine", num(c.eps_fine)}, {"sup_by_region", vec(c.sup_by_region)}});
    return {{"first_order", r.first_order},
            {"epsilons", vec(r.epsilons)},
            {"times", vec(r.times)},
            {"u", u},
            {"u_smallest", us},
            {"grad_residual", vec(r.grad_residual)},
            {"pair_gap", vec(r.pair_gap)},
            {"on_branch", r.on_branch},
            {"agree", r.agree},
            {"in_layer", r.in_layer},
            {"disagreement_fraction", num(r.disagreement_fraction)},
            {"jumps", jumps},
            {"mu_atoms", vec(r.mu_atoms())},
            {"f", vec(r.f)},
            {"interval_balance", vec(r.interval_balance)},
            {"regions", regions},
            {"convergence", conv},
            {"stability_by_eps", vec(r.stability_by_eps)},
            {"stab_tol", num(r.stab_tol)},
            {"stability_decreasing", r.stability_decreasing},
            {"stable_at_smallest", r.stable_at_smallest},
            {"total_dissipation", num(r.total_dissipation)},
            {"jump_threshold", num(r.jump_threshold)},
            {"all_certified", r.all_certified()}};
}

Json to_json(const BalanceReport& b) {
    return {{"max_residual", num(b.max_residual)},
            {"max_jump_residual", num(b.max_jump_residual)},
            {"scale", num(b.scale)},
            {"tol", num(b.tol)},
            {"bound", num(b.tol * b.scale)},
            {"max_f_increase", num(b.max_f_increase)},
            {"atoms_positive", b.atoms_positive},
            {"f_monotone", b.f_monotone},
            {"residual_worst_s", num(b.residual_worst_s)},
            {"residual_worst_t", num(b.residual_worst_t)},
            {"violations", b.violations},
            {"passed", b.passed()}};
}

Json to_json(const AxiomReport& a) {
    Json pts = Json::array();
    for (const Vector& p : a.points) pts.push_back(vec(p));
    Json cost = Json::array();
    for (const auto& row : a.cost) cost.push_back(vec(row));
    return {{"points", pts},
            {"cost", cost},
            {"tol", num(a.tol)},
            {"max_symmetry_rel", num(a.max_symmetry_rel)},
            {"min_lower_bound_margin", num(a.min_lower_bound_margin)},
            {"max_triangle_excess", num(a.max_triangle_excess)},
            {"diagonal_zero", a.diagonal_zero},
            {"symmetric", a.symmetric},
            {"lower_bound", a.lower_bound},
            {"triangle", a.triangle},
            {"violations", a.violations},
            {"passed", a.passed()}};
}

Json to_json(const CheckResult& c) {
    return {{"name", c.name}, {"passed", c.passed}, {"value", num(c.value)}, {"tolerance", num(c.tolerance)}, {"detail", c.detail}};
}

Json trajectory_summary(const Trajectory& traj, const LedgerCheck& ledger) {
    return {{"first_order", traj.first_order},
            {"epsilon", num(traj.epsilon)},
            {"checkpoints", traj.times.size()},
            {"t0", traj.times.empty() ? Json() : num(traj.times.front())},
            {"t1", traj.times.empty() ? Json() : num(traj.times.back())},
            {"final_state", traj.states.empty() ? Json() : vec(traj.states.back())},
            {"total_dissipation", traj.ledger.empty() ? Json(0.0) : num(traj.ledger.back().dissipation)},
            {"accepted_steps", traj.accepted_steps},
            {"rejected_steps", traj.rejected_steps},
            {"ledger", to_json(ledger)}};
}

}  // namespace bvlab
