#include "bvlab/limit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bvlab/critical.hpp"

namespace bvlab {

SweepConfig::SweepConfig(Potential potential_, SpdMatrix A_, SpdMatrix B_)
    : potential(std::move(potential_)), A(std::move(A_)), B(std::move(B_)) {}

Vector SweepConfig::initial_state(double epsilon) const {
    if (u0_slope.empty()) return u0;
    return axpy(epsilon, u0_slope, u0);
}

Vector SweepConfig::initial_velocity() const { return v0.empty() ? Vector(u0.size(), 0.0) : v0; }

void SweepConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
    if (epsilons.size() < 3) fail("a sweep needs at least three epsilons");
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        if (!(epsilons[k] > 0.0) || !std::isfinite(epsilons[k])) fail("epsilons must be positive");
        if (k > 0) {
            const double ratio = epsilons[k - 1] / epsilons[k];
            if (ratio < 1.5 || ratio > 4.0) {
                std::ostringstream o;
                o << "epsilon ratio " << ratio << " outside [1.5, 4] between " << epsilons[k - 1] << " and "
                  << epsilons[k];
                fail(o.str());
            }
        }
    }
    if (!(t1 > t0)) fail("empty time span");
    if (t0 < potential.horizon_start() - 1e-12 || t1 > potential.horizon_end() + 1e-12)
        fail("time span leaves the potential's horizon");
    const std::size_t n = potential.dim();
    if (u0.size() != n) fail("u0 dimension");
    if (!u0_slope.empty() && u0_slope.size() != n) fail("u0_slope dimension");
    if (!v0.empty() && v0.size() != n) fail("v0 dimension");
    if (A.dim() != n || B.dim() != n) fail("matrix dimension");
}

SweepConfig appendix_sweep(bool first_order) {
    SweepConfig cfg(make_appendix(0.05).potential, SpdMatrix::identity(1), SpdMatrix::scalar(1, 0.25));
    cfg.epsilons = {0.1, 0.05, 0.025, 0.0125};
    cfg.t0 = 0.0;
    cfg.t1 = 1.5;
    const double r = std::sqrt(1.0 / 3.0);
    cfg.u0 = {-r};
    cfg.u0_slope = {-r};
    cfg.v0 = {1.0};
    cfg.first_order = first_order;
    return cfg;
}

SweepConfig quadratic_sweep() {
    SweepConfig cfg(make_quadratic(1, {Polynomial{{0.0, 1.0}}}), SpdMatrix::identity(1), SpdMatrix::identity(1));
    cfg.epsilons = {0.04, 0.02, 0.01};
    cfg.t0 = 0.0;
    cfg.t1 = 2.0;
    cfg.u0 = {0.0};
    cfg.v0 = {0.0};
    return cfg;
}

std::vector<Trajectory> run_epsilon_sweep(const SweepConfig& cfg) {
    cfg.validate();
    std::vector<Trajectory> out;
    for (double eps : cfg.epsilons) {
        std::ostringstream tag;
        tag << "eps=" << eps << ": ";
        try {
            Trajectory tr = cfg.first_order
                                ? integrate_gradient_flow(cfg.potential, eps, cfg.initial_state(eps), cfg.t0, cfg.t1,
                                                          cfg.ctrl, cfg.B)
                                : integrate_second_order(cfg.potential, cfg.A, cfg.B, eps, cfg.initial_state(eps),
                                                         cfg.initial_velocity(), cfg.t0, cfg.t1, cfg.ctrl);
            const LedgerCheck lc = check_ledger(tr);
            if (!lc.passed) {
                std::ostringstream o;
                o << tag.str() << "energy ledger failed (pair residual " << lc.max_pair_residual << ", g increase "
                  << lc.max_g_increase << ")";
                throw Error(ErrorCode::LedgerViolation, o.str());
            }
            out.push_back(std::move(tr));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::LedgerViolation) throw;
            throw Error(e.code(), tag.str() + e.what());
        }
    }
    return out;
}

std::vector<double> LimitReport::mu_atoms() const {
    std::vector<double> out;
    for (const JumpRecord& j : jumps) out.push_back(j.mu_atom);
    return out;
}

bool LimitReport::all_certified() const {
    return std::all_of(jumps.begin(), jumps.end(), [](const JumpRecord& j) { return j.certified; });
}

namespace {

struct Attached {
    bool ok = false;
    Vector x;
};

Attached attach(const Potential& p, double t, const Vector& state, const LimitThresholds& th) {
    const PolishResult r = polish(p, t, state, th.polish_tol, 100);
    Attached a;
    a.ok = r.converged && distance(r.x, state) <= th.attach_radius;
    a.x = r.x;
    return a;
}

// A stretch of grid indices where a trajectory is off every branch, or a
// single cell across which its branch changes abruptly. `before` is the last
// attached index (-1 if none), `after` the first attached one (n if none).
// A stretch ends only once the trajectory stays attached for `settle` cells,
// so a fast oscillation grazing a critical point does not split it.
struct Transition {
    long before;
    long after;
};

std::vector<Transition> transitions(const std::vector<Attached>& att, double switch_move, long settle) {
    std::vector<Transition> out;
    const long n = static_cast<long>(att.size());
    auto ok = [&](long i) { return att[static_cast<std::size_t>(i)].ok; };
    long i = 0;
    while (i < n) {
        if (!ok(i)) {
            const long start = i;
            for (;;) {
                while (i < n && !ok(i)) ++i;
                long run = 0;
                while (i + run < n && ok(i + run) && run < settle) ++run;
                if (i + run >= n || run >= settle) break;
                i += run;
            }
            out.push_back({start - 1, i});
            continue;
        }
        if (i + 1 < n && ok(i + 1) &&
            distance(att[static_cast<std::size_t>(i)].x, att[static_cast<std::size_t>(i + 1)].x) > switch_move)
            out.push_back({i, i + 1});
        ++i;
    }
    return out;
}

double lambda_min(const Potential& p, double t, const Vector& x) { return eig_sym(p.hess(t, x)).values.front(); }

// Newton on grad F = 0, lambda_min(H) = 0 in (t, x): the point where a branch
// of critical points folds.
bool refine_fold(const Potential& p, double& t, Vector& x, double tol) {
    const std::size_t n = x.size();
    double tt = t;
    Vector xx = x;
    const double scale = std::max(1.0, p.hess(t, x).max_abs());
    // Newton converges quadratically here, so run it down to rounding
    for (int it = 0; it < 60; ++it) {
        const Vector g = p.grad(tt, xx);
        const double lam = lambda_min(p, tt, xx);
        Matrix J(n + 1, n + 1, 0.0);
        const Matrix H = p.hess(tt, xx);
        const Vector gt = p.dt_grad(tt, xx);
        for (std::size_t r = 0; r < n; ++r) {
            J(r, 0) = gt[r];
            for (std::size_t c = 0; c < n; ++c) J(r, c + 1) = H(r, c);
        }
        const double tau = 1e-6;
        J(n, 0) = (lambda_min(p, tt + tau, xx) - lambda_min(p, tt - tau, xx)) / (2.0 * tau);
        for (std::size_t c = 0; c < n; ++c) {
            Vector xp = xx, xm = xx;
            xp[c] += tau;
            xm[c] -= tau;
            J(n, c + 1) = (lambda_min(p, tt, xp) - lambda_min(p, tt, xm)) / (2.0 * tau);
        }
        Vector rhs(n + 1);
        for (std::size_t r = 0; r < n; ++r) rhs[r] = -g[r];
        rhs[n] = -lam;
        Vector step;
        try {
            step = solve_dense(J, rhs);
        } catch (const Error&) {
            return false;
        }
        tt += step[0];
        for (std::size_t c = 0; c < n; ++c) xx[c] += step[c + 1];
        if (!std::isfinite(tt) || norm2(xx) > 1e12) return false;
        if (norm2(step) <= 1e-15 * (1.0 + std::abs(tt) + norm2(xx))) break;
    }
    if (norm2(p.grad(tt, xx)) > tol || std::abs(lambda_min(p, tt, xx)) > 1e-8 * scale) return false;
    if (std::abs(tt - t) > 1e-3 || distance(xx, x) > 1e-2) return false;
    t = tt;
    x = std::move(xx);
    return true;
}

struct Continuation {
    std::vector<Vector> values;  // one per reached target
    double last_t = 0.0;
    Vector last_x;
    bool lost = false;
    double lost_t = 0.0;  // first time found off the branch
};

// Follows the critical branch through (t_from, x_from) over `targets`,
// stopping at the first time the polish fails or jumps away.
Continuation follow_branch(const Potential& p, double t_from, const Vector& x_from,
                           const std::vector<double>& targets, double max_move, double tol) {
    Continuation c;
    c.last_t = t_from;
    c.last_x = x_from;
    for (double t : targets) {
        const PolishResult r = polish(p, t, c.last_x, tol, 100);
        if (!r.converged || distance(r.x, c.last_x) > max_move) {
            c.lost = true;
            c.lost_t = t;
            return c;
        }
        c.last_t = t;
        c.last_x = r.x;
        c.values.push_back(r.x);
    }
    return c;
}

// Narrows [good, bad] where the branch last existed, by bisection.
void bisect_loss(const Potential& p, double& t_good, Vector& x_good, double t_bad, double max_move, double tol) {
    for (int it = 0; it < 200 && std::abs(t_bad - t_good) > 1e-12 * (1.0 + std::abs(t_good)); ++it) {
        const double mid = 0.5 * (t_good + t_bad);
        const PolishResult r = polish(p, mid, x_good, tol, 100);
        if (r.converged && distance(r.x, x_good) <= max_move) {
            t_good = mid;
            x_good = r.x;
        } else {
            t_bad = mid;
        }
    }
}

double value_of_jump_threshold(const Potential& p, double t, const LimitThresholds& th, double modulus) {
    if (th.jump_threshold) return *th.jump_threshold;
    try {
        const CriticalSearch found = find_critical_points(p, t);
        if (found.points.size() >= 2) return 0.25 * min_gap(found.points);
    } catch (const Error&) {
    }
    return 10.0 * modulus;
}

}  // namespace

LimitReport estimate_limit(const std::vector<Trajectory>& trajs, const Potential& p, const LimitThresholds& th) {
    if (trajs.size() < 3) throw Error(ErrorCode::TooFewPoints, "a limit needs at least three trajectories");
    // order members by decreasing epsilon
    std::vector<const Trajectory*> members;
    for (const Trajectory& tr : trajs) members.push_back(&tr);
    std::stable_sort(members.begin(), members.end(),
                     [](const Trajectory* a, const Trajectory* b) { return a->epsilon > b->epsilon; });
    const Trajectory& fine = *members.back();
    const Trajectory& next = *members[members.size() - 2];
    const std::size_t n = fine.times.size();
    for (const Trajectory* tr : members) {
        if (tr->times.size() != n) throw Error(ErrorCode::DimensionMismatch, "sweep members use different grids");
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(tr->times[i] - fine.times[i]) > 1e-12 * (1.0 + std::abs(fine.times[i])))
                throw Error(ErrorCode::DimensionMismatch, "sweep members use different grids");
        if (tr->first_order != fine.first_order) throw Error(ErrorCode::ConfigError, "mixed dynamics in a sweep");
    }
    if (n < 2) throw Error(ErrorCode::TooFewPoints, "grid too short");

    LimitReport rep;
    rep.first_order = fine.first_order;
    rep.stab_tol = th.stab_tol;
    for (const Trajectory* tr : members) rep.epsilons.push_back(tr->epsilon);
    rep.times = fine.times;
    rep.u_smallest = fine.states;
    rep.total_dissipation = fine.ledger.empty() ? 0.0 : fine.ledger.back().dissipation;
    const double h = (rep.times.back() - rep.times.front()) / static_cast<double>(n - 1);

    std::vector<Attached> att_fine(n), att_next(n);
    for (std::size_t i = 0; i < n; ++i) {
        att_fine[i] = attach(p, rep.times[i], fine.states[i], th);
        att_next[i] = attach(p, rep.times[i], next.states[i], th);
    }

    // modulus of continuity over attached cells, the fallback jump scale
    double modulus = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (att_fine[i].ok && att_fine[i + 1].ok) {
            const double d = distance(att_fine[i].x, att_fine[i + 1].x);
            if (d <= th.attach_radius) modulus = std::max(modulus, d);
        }

    const auto settle = static_cast<long>(th.settle_cells);
    const std::vector<Transition> tr_fine = transitions(att_fine, th.attach_radius, settle);
    const std::vector<Transition> tr_next = transitions(att_next, th.attach_radius, settle);
    const double max_move = 0.1 * th.attach_radius;
    const double w = static_cast<double>(th.window_cells) * h;

    rep.u.resize(n);
    rep.on_branch.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        rep.u[i] = att_fine[i].ok ? att_fine[i].x : fine.states[i];
        rep.on_branch[i] = att_fine[i].ok;
    }

    rep.jump_threshold = std::numeric_limits<double>::infinity();
    std::vector<Transition> jump_spans;
    std::vector<Transition> relax_spans;  // bracket start to relaxation
    for (const Transition& tr : tr_fine) {
        JumpRecord jr;
        const double t_lo = tr.before >= 0 ? rep.times[static_cast<std::size_t>(tr.before)] : rep.times.front();
        const double t_hi = tr.after < static_cast<long>(n) ? rep.times[static_cast<std::size_t>(tr.after)]
                                                            : rep.times.back();
        jr.bracket_lo = t_lo;
        jr.bracket_hi = t_hi;
        std::vector<double> inner;
        for (long i = std::max(tr.before + 1, 0L); i < std::min(tr.after, static_cast<long>(n)); ++i)
            inner.push_back(rep.times[static_cast<std::size_t>(i)]);

        // incoming branch and the jump time
        Continuation pre;
        if (tr.before >= 0) {
            std::vector<double> targets = inner;
            if (tr.after < static_cast<long>(n)) targets.push_back(t_hi);
            pre = follow_branch(p, t_lo, att_fine[static_cast<std::size_t>(tr.before)].x, targets, max_move,
                                th.polish_tol);
            if (pre.lost) {
                double tg = pre.last_t;
                Vector xg = pre.last_x;
                bisect_loss(p, tg, xg, pre.lost_t, max_move, th.polish_tol);
                jr.fold = refine_fold(p, tg, xg, th.polish_tol);
                jr.t_star = tg;
                jr.u_minus = xg;
            } else {
                // the branch persists: the trajectory left it anyway, take the dissipation peak
                double best = -1.0;
                jr.t_star = t_lo;
                for (long i = std::max(tr.before, 0L); i + 1 <= std::min(tr.after, static_cast<long>(n) - 1); ++i) {
                    const double m = fine.ledger[static_cast<std::size_t>(i + 1)].dissipation -
                                     fine.ledger[static_cast<std::size_t>(i)].dissipation;
                    if (m > best) {
                        best = m;
                        jr.t_star = rep.times[static_cast<std::size_t>(i)];
                    }
                }
                jr.u_minus = polish(p, jr.t_star, pre.last_x, th.polish_tol, 100).x;
            }
        } else {
            // off every branch from the start: the initial datum itself jumps
            jr.t_star = rep.times.front();
            jr.u_minus = fine.states.front();
        }

        // outgoing branch, followed back to the jump time
        Continuation post;
        std::vector<double> back_targets;
        if (tr.after < static_cast<long>(n)) {
            for (auto it = inner.rbegin(); it != inner.rend() && *it >= jr.t_star; ++it) back_targets.push_back(*it);
            back_targets.push_back(jr.t_star);
            post = follow_branch(p, t_hi, att_fine[static_cast<std::size_t>(tr.after)].x, back_targets, max_move,
                                 th.polish_tol);
            jr.u_plus = post.last_x;
            if (post.lost) {
                const PolishResult r = polish(p, jr.t_star, post.last_x, th.polish_tol, 100);
                jr.u_plus = r.x;
            }
        } else {
            jr.u_plus = polish(p, jr.t_star, fine.states.back(), th.polish_tol, 100).x;
        }

        const double jthr = value_of_jump_threshold(p, jr.t_star, th, modulus);
        jr.energy_drop = p.eval(jr.t_star, jr.u_minus) - p.eval(jr.t_star, jr.u_plus);
        // the atom lasts until the energy in excess of the outgoing branch has relaxed
        const double excess_cap = th.relax_fraction * std::max(std::abs(jr.energy_drop), 1.0);
        auto k = static_cast<std::size_t>(std::clamp(tr.after, 0L, static_cast<long>(n)));
        for (; k < n; ++k) {
            if (!att_fine[k].ok) continue;
            const double excess = fine.ledger[k].kinetic + fine.ledger[k].potential - p.eval(rep.times[k], att_fine[k].x);
            if (excess <= excess_cap) break;
        }
        jr.relaxed = k < n;
        jr.relax_time = rep.times[std::min(k, n - 1)];
        const double lo = std::max(rep.times.front(), t_lo - w);
        const double hi = std::min(rep.times.back(), std::max(t_hi, jr.relax_time) + w);
        jr.mu_atom = dissipation_at(fine, hi) - dissipation_at(fine, lo);
        const bool big = distance(jr.u_plus, jr.u_minus) > jthr;
        const bool concentrated = jr.mu_atom >= th.atom_fraction * rep.total_dissipation && jr.mu_atom > 0.0;
        if (!big || !concentrated) continue;
        rep.jump_threshold = std::min(rep.jump_threshold, jthr);

        jr.atom_residual = std::abs(jr.energy_drop - jr.mu_atom);
        const double crit_tol = 1e-6 * (1.0 + std::abs(p.eval(jr.t_star, jr.u_plus)));
        jr.u_minus_critical = norm2(p.grad(jr.t_star, jr.u_minus)) <= crit_tol;
        jr.u_plus_critical = norm2(p.grad(jr.t_star, jr.u_plus)) <= crit_tol;

        // the limit inside the bracket: incoming branch before t*, outgoing after
        for (long i = std::max(tr.before + 1, 0L); i < std::min(tr.after, static_cast<long>(n)); ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double t = rep.times[k];
            const std::size_t pos = static_cast<std::size_t>(i - std::max(tr.before + 1, 0L));
            if (t < jr.t_star && pos < pre.values.size()) {
                rep.u[k] = pre.values[pos];
                rep.on_branch[k] = true;
            } else if (t >= jr.t_star) {
                // back_targets run from the bracket end towards t*
                const std::size_t from_end = static_cast<std::size_t>(std::min(tr.after, static_cast<long>(n)) - 1 - i);
                if (from_end < post.values.size() && from_end < back_targets.size() - 1) {
                    rep.u[k] = post.values[from_end];
                    rep.on_branch[k] = true;
                }
            }
        }
        relax_spans.push_back({tr.before, static_cast<long>(std::min(k, n - 1))});
        if (jr.t_star == rep.times.front()) {
            rep.u.front() = jr.u_minus;
        } else {
            // right-continuous at an interior t* that falls on the grid
            const auto it = std::lower_bound(rep.times.begin(), rep.times.end(), jr.t_star);
            if (it != rep.times.end() && *it == jr.t_star) {
                rep.u[static_cast<std::size_t>(it - rep.times.begin())] = jr.u_plus;
                rep.on_branch[static_cast<std::size_t>(it - rep.times.begin())] = true;
            }
        }
        jump_spans.push_back(tr);
        rep.jumps.push_back(std::move(jr));
    }
    if (!std::isfinite(rep.jump_threshold)) rep.jump_threshold = value_of_jump_threshold(p, rep.times.front(), th, modulus);

    // transition layers of the two smallest members that meet a jump
    rep.in_layer.assign(n, false);
    auto overlaps = [](const Transition& a, const Transition& b) { return a.before < b.after && b.before < a.after; };
    auto mark = [&](const Transition& t) {
        for (long i = std::max(t.before + 1, 0L); i < std::min(t.after, static_cast<long>(n)); ++i)
            rep.in_layer[static_cast<std::size_t>(i)] = true;
    };
    for (const Transition& js : jump_spans) {
        mark(js);
        for (const Transition& t : tr_next)
            if (overlaps(t, js)) mark(t);
    }

    rep.pair_gap.resize(n);
    rep.agree.resize(n);
    std::size_t outside = 0, disagree = 0;
    for (std::size_t i = 0; i < n; ++i) {
        rep.pair_gap[i] = distance(fine.states[i], next.states[i]);
        const bool ok = att_fine[i].ok && att_next[i].ok ? distance(att_fine[i].x, att_next[i].x) <= th.agree_cap
                                                         : rep.pair_gap[i] <= th.agree_cap;
        rep.agree[i] = ok;
        if (!rep.in_layer[i]) {
            ++outside;
            if (!ok) ++disagree;
        }
    }
    rep.disagreement_fraction = outside ? static_cast<double>(disagree) / static_cast<double>(outside) : 0.0;
    if (rep.disagreement_fraction > th.max_disagreement) {
        std::ostringstream o;
        o << "the two smallest epsilons disagree on " << 100.0 * rep.disagreement_fraction
          << "% of the grid outside jump layers";
        throw Error(ErrorCode::NoConvergence, o.str());
    }

    rep.grad_residual.resize(n);
    for (std::size_t i = 0; i < n; ++i) rep.grad_residual[i] = norm2(p.grad(rep.times[i], rep.u[i]));

    // f and the per-interval balance, splitting the jump cell at t*
    rep.f.resize(n);
    rep.interval_balance.assign(n - 1, 0.0);
    double power = 0.0;
    rep.f[0] = p.eval(rep.times[0], rep.u[0]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double ta = rep.times[i], tb = rep.times[i + 1];
        double atoms = 0.0;
        double integral = 0.5 * (tb - ta) * (p.dt(ta, rep.u[i]) + p.dt(tb, rep.u[i + 1]));
        for (const JumpRecord& j : rep.jumps) {
            const bool here = (j.t_star > ta && j.t_star <= tb) || (i == 0 && j.t_star == ta);
            if (!here) continue;
            atoms += j.mu_atom;
            if (j.t_star > ta && j.t_star < tb)
                integral = 0.5 * (j.t_star - ta) * (p.dt(ta, rep.u[i]) + p.dt(j.t_star, j.u_minus)) +
                           0.5 * (tb - j.t_star) * (p.dt(j.t_star, j.u_plus) + p.dt(tb, rep.u[i + 1]));
        }
        power += integral;
        rep.f[i + 1] = p.eval(tb, rep.u[i + 1]) - power;
        rep.interval_balance[i] = rep.f[i + 1] - rep.f[i] + atoms;
    }

    // regions: continuity stretches between jump brackets
    double cursor = rep.times.front();
    for (const JumpRecord& j : rep.jumps) {
        if (j.bracket_lo > cursor) rep.regions.push_back({cursor, j.bracket_lo, false});
        rep.regions.push_back({j.bracket_lo, j.bracket_hi, true});
        cursor = j.bracket_hi;
    }
    if (cursor < rep.times.back()) rep.regions.push_back({cursor, rep.times.back(), false});
    for (std::size_t k = 0; k + 1 < members.size(); ++k) {
        ConvergenceRow row;
        row.eps_coarse = members[k]->epsilon;
        row.eps_fine = members[k + 1]->epsilon;
        for (const Region& r : rep.regions) {
            double sup = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (rep.times[i] >= r.lo && rep.times[i] <= r.hi)
                    sup = std::max(sup, distance(members[k]->states[i], members[k + 1]->states[i]));
            row.sup_by_region.push_back(sup);
        }
        rep.convergence.push_back(std::move(row));
    }

    // stationarity of each member outside the jump brackets, each running until the ringing relaxed
    std::vector<bool> skip(n, false);
    for (const Transition& js : relax_spans)
        for (long i = std::max(js.before, 0L); i <= std::min(js.after, static_cast<long>(n) - 1); ++i)
            skip[static_cast<std::size_t>(i)] = true;
    for (const Trajectory* tr : members) {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!skip[i]) worst = std::max(worst, norm2(p.grad(rep.times[i], tr->states[i])));
        rep.stability_by_eps.push_back(worst);
    }
    rep.stability_decreasing = true;
    for (std::size_t k = 1; k < rep.stability_by_eps.size(); ++k)
        if (rep.stability_by_eps[k] > rep.stability_by_eps[k - 1] * (1.0 + 1e-9) + 1e-12)
            rep.stability_decreasing = false;
    rep.stable_at_smallest = rep.stability_by_eps.back() <= th.stab_tol;
    return rep;
}

LimitReport certify_jumps(LimitReport report, const Potential& p, const SpdMatrix& A, const SpdMatrix& B,
                          const CertifyOptions& opts) {
    double max_f = 0.0;
    for (std::size_t i = 0; i < report.times.size(); ++i)
        max_f = std::max(max_f, std::abs(p.eval(report.times[i], report.u[i])));
    for (JumpRecord& j : report.jumps) {
        j.failures.clear();
        const double drop = std::abs(j.energy_drop);
        const bool initial = j.t_star == report.times.front();
        if (!j.u_plus_critical) j.failures.push_back("u_plus is not critical");
        if (!j.u_minus_critical && !initial) j.failures.push_back("u_minus is not critical");
        if (!(j.mu_atom > 0.0)) j.failures.push_back("dissipation atom is not positive");
        if (j.atom_residual > opts.balance_tol * (1.0 + max_f)) j.failures.push_back("atom differs from the energy drop");

        ChainOptions copt = opts.chain;
        copt.first_order = report.first_order;
        copt.initial_datum = initial && !j.u_minus_critical;
        try {
            j.chain = build_jump_chain(p, j.t_star, j.u_minus, j.u_plus, A, B, copt);
        } catch (const ChainStuckError& e) {
            j.chain = e.partial();
            j.failures.push_back(std::string("chain: ") + e.what());
        } catch (const Error& e) {
            j.failures.push_back(std::string("chain: ") + e.what());
        }

        if (opts.with_cost && !report.first_order) {
            try {
                j.cost_value = minimize_cost(p, j.t_star, j.u_minus, j.u_plus, A, B, opts.cost).value;
            } catch (const CostNotConverged& e) {
                j.cost_value = e.best().value;
                j.failures.push_back(std::string("cost: ") + e.what());
            } catch (const Error& e) {
                j.failures.push_back(std::string("cost: ") + e.what());
            }
        }
        if (j.cost_value) {
            j.cost_residual = std::abs(j.energy_drop - *j.cost_value);
            if (*j.cost_residual > opts.identity_rel_tol * drop) j.failures.push_back("cost differs from the energy drop");
            if (j.chain && j.chain->m() > 0) {
                j.chain_residual = std::abs(j.chain->total_cost_along - *j.cost_value);
                if (*j.chain_residual > opts.identity_rel_tol * std::abs(*j.cost_value))
                    j.failures.push_back("chain cost differs from the optimal cost");
            }
        }
        j.certified = j.failures.empty();
    }
    return report;
}

BalanceReport verify_energy_balance(const LimitReport& report, const Potential& p, double tol) {
    BalanceReport br;
    br.tol = tol;
    const std::size_t n = report.times.size();
    double max_f = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_f = std::max(max_f, std::abs(p.eval(report.times[i], report.u[i])));
    br.scale = 1.0 + max_f;
    const double bound = tol * br.scale;

    for (const JumpRecord& j : report.jumps) {
        if (!(j.mu_atom > 0.0)) br.atoms_positive = false;
        br.max_jump_residual = std::max(br.max_jump_residual, j.atom_residual);
    }

    // residual(s, t) = phi(t) - phi(s) with phi = f + accumulated atoms
    if (n > 0) {
        double phi = report.f[0];
        double lo = phi, hi = phi;
        std::size_t ilo = 0, ihi = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) phi += report.interval_balance[i - 1];
            if (phi - lo > worst) {
                worst = phi - lo;
                br.residual_worst_s = report.times[ilo];
                br.residual_worst_t = report.times[i];
            }
            if (hi - phi > worst) {
                worst = hi - phi;
                br.residual_worst_s = report.times[ihi];
                br.residual_worst_t = report.times[i];
            }
            if (phi < lo) {
                lo = phi;
                ilo = i;
            }
            if (phi > hi) {
                hi = phi;
                ihi = i;
            }
        }
        br.max_residual = std::max(worst, br.max_jump_residual);
    }

    // f may only decrease inside a continuity region
    for (const Region& r : report.regions) {
        if (r.transition) continue;
        double running_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (report.times[i] < r.lo || report.times[i] > r.hi) continue;
            if (std::isfinite(running_min)) br.max_f_increase = std::max(br.max_f_increase, report.f[i] - running_min);
            running_min = std::min(running_min, report.f[i]);
        }
    }
    br.f_monotone = br.max_f_increase <= bound;

    std::ostringstream o;
    if (br.max_residual > bound) {
        o << "balance residual " << br.max_residual << " exceeds " << bound;
        br.violations.push_back(o.str());
    }
    if (!br.atoms_positive) br.violations.push_back("a dissipation atom is not positive");
    if (!br.f_monotone) br.violations.push_back("f increases inside a continuity region");
    return br;
}

std::string limit_csv(const LimitReport& report) {
    std::ostringstream o;
    o << std::setprecision(17);
    const std::size_t dim = report.u.empty() ? 0 : report.u.front().size();
    o << "t";
    for (std::size_t d = 0; d < dim; ++d) o << (dim == 1 ? ",u" : ",u" + std::to_string(d));
    o << ",grad_residual,f\n";
    for (std::size_t i = 0; i < report.times.size(); ++i) {
        o << report.times[i];
        for (double v : report.u[i]) o << ',' << v;
        o << ',' << report.grad_residual[i] << ',' << report.f[i] << '\n';
    }
    return o.str();
}

}  // namespace bvlab
