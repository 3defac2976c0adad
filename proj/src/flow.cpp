#include "bvlab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bvlab/error.hpp"
#include "bvlab/ode.hpp"

namespace bvlab {

namespace {

void check_dims(const Potential& p, std::size_t n, const char* what) {
    if (p.dim() != n) throw Error(ErrorCode::DimensionMismatch, what);
}

OdeOptions ode_options(const StepControl& ctrl, double epsilon) {
    OdeOptions o;
    o.rtol = ctrl.rtol;
    o.atol = ctrl.atol;
    o.h_max = ctrl.step_cap * epsilon;
    o.h_min = ctrl.min_step;
    o.max_steps = ctrl.max_steps;
    return o;
}

void raise_on_stop(const OdeStatus& st, double t1, const Box& safety) {
    switch (st.stop) {
        case OdeStop::Completed: return;
        case OdeStop::StoppedByCaller: {
            std::ostringstream m;
            m << "state left the safety box [" << safety.lower[0] << ", " << safety.upper[0] << "]";
            if (safety.dim() > 1) m << " x ...";
            m << " at t=" << st.t;
            throw Error(ErrorCode::BlowUp, m.str());
        }
        case OdeStop::StepUnderflow:
            throw Error(ErrorCode::StepUnderflow, "step size fell below the floor at t=" + std::to_string(st.t));
        case OdeStop::MaxSteps:
            throw Error(ErrorCode::StepUnderflow, "step budget exhausted at t=" + std::to_string(st.t) + " before " +
                                                      std::to_string(t1));
    }
}

bool finite_in(const Box& box, const Vector& y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y[i]) || y[i] < box.lower[i] || y[i] > box.upper[i]) return false;
    }
    return true;
}

void finish_ledger(Trajectory& tr) {
    if (tr.ledger.empty()) return;
    const double e0 = tr.ledger.front().kinetic + tr.ledger.front().potential;
    for (LedgerRecord& r : tr.ledger) {
        r.g = r.potential + r.kinetic - r.power;
        r.residual = r.kinetic + r.potential + r.dissipation - r.power - e0;
    }
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
    return s;
}

}  // namespace

std::vector<double> checkpoint_grid(double t0, double t1, double per_unit) {
    if (!(t1 >= t0)) throw Error(ErrorCode::OutOfRange, "span must satisfy t0 <= t1");
    if (!(per_unit > 0.0)) throw Error(ErrorCode::OutOfRange, "checkpoints per unit must be positive");
    std::vector<double> grid{t0};
    if (t1 == t0) return grid;
    const double steps = (t1 - t0) * per_unit;
    const auto k = static_cast<std::size_t>(std::llround(std::ceil(steps - 1e-9)));
    for (std::size_t i = 1; i < k; ++i) grid.push_back(t0 + static_cast<double>(i) / per_unit);
    grid.push_back(t1);
    return grid;
}

Trajectory integrate_second_order(const Potential& p, const SpdMatrix& A, const SpdMatrix& B, double epsilon,
                                  const Vector& u0, const Vector& v0, double t0, double t1, const StepControl& ctrl) {
    const std::size_t n = p.dim();
    if (!(epsilon > 0.0)) throw Error(ErrorCode::OutOfRange, "epsilon must be positive");
    if (u0.size() != n || v0.size() != n || A.dim() != n || B.dim() != n)
        throw Error(ErrorCode::DimensionMismatch, "second-order data do not match the potential dimension");
    check_dims(p, n, "potential");
    const Box safety = p.box().inflated(0.5);
    if (!finite_in(safety, u0, n)) throw Error(ErrorCode::BlowUp, "initial state outside the safety box at t=" + std::to_string(t0));

    const double eps = epsilon;
    const double eps2 = eps * eps;
    OdeRhs rhs = [&](double t, const Vector& y, Vector& dy) {
        const std::span<const double> u(y.data(), n);
        const std::span<const double> v(y.data() + n, n);
        const Vector g = p.grad(t, u);
        const Vector bv = B.apply(v);
        Vector force(n);
        for (std::size_t i = 0; i < n; ++i) force[i] = -bv[i] / eps - g[i] / eps2;
        const Vector acc = A.solve(force);
        for (std::size_t i = 0; i < n; ++i) {
            dy[i] = v[i];
            dy[n + i] = acc[i];
        }
        dy[2 * n] = eps * dot(v, bv);
        dy[2 * n + 1] = p.dt(t, u);
    };

    Vector y0(2 * n + 2, 0.0);
    std::copy(u0.begin(), u0.end(), y0.begin());
    std::copy(v0.begin(), v0.end(), y0.begin() + static_cast<std::ptrdiff_t>(n));

    Trajectory tr;
    tr.first_order = false;
    tr.epsilon = eps;
    tr.dim = n;
    tr.mass = A;
    tr.viscosity = B;
    const std::vector<double> grid = checkpoint_grid(t0, t1, ctrl.checkpoints_per_unit);
    tr.times.reserve(grid.size());

    OdeOutput out = [&](double t, const Vector& y, const Vector&) {
        Vector u(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
        Vector v(y.begin() + static_cast<std::ptrdiff_t>(n), y.begin() + static_cast<std::ptrdiff_t>(2 * n));
        LedgerRecord r;
        r.t = t;
        r.kinetic = 0.5 * eps2 * A.norm_sq(v);
        r.potential = p.eval(t, u);
        r.dissipation = y[2 * n];
        r.power = y[2 * n + 1];
        tr.times.push_back(t);
        tr.states.push_back(std::move(u));
        tr.velocities.push_back(std::move(v));
        tr.ledger.push_back(r);
        return true;
    };
    OdeStepHook hook = [&](double, const Vector& y) { return finite_in(safety, y, n); };

    const OdeStatus st = integrate_dopri5(rhs, t0, y0, t1, grid, ode_options(ctrl, eps), out, hook);
    raise_on_stop(st, t1, safety);
    tr.accepted_steps = st.accepted;
    tr.rejected_steps = st.rejected;
    finish_ledger(tr);
    return tr;
}

Trajectory integrate_gradient_flow(const Potential& p, double epsilon, const Vector& u0, double t0, double t1,
                                   const StepControl& ctrl, const std::optional<SpdMatrix>& damping) {
    const std::size_t n = p.dim();
    if (!(epsilon > 0.0)) throw Error(ErrorCode::OutOfRange, "epsilon must be positive");
    const SpdMatrix D = damping.value_or(SpdMatrix::identity(n));
    if (u0.size() != n || D.dim() != n) throw Error(ErrorCode::DimensionMismatch, "gradient-flow data do not match the potential dimension");
    const Box safety = p.box().inflated(0.5);
    if (!finite_in(safety, u0, n)) throw Error(ErrorCode::BlowUp, "initial state outside the safety box at t=" + std::to_string(t0));

    const double eps = epsilon;
    OdeRhs rhs = [&](double t, const Vector& y, Vector& dy) {
        const std::span<const double> u(y.data(), n);
        const Vector g = p.grad(t, u);
        Vector vel = D.solve(g);
        for (std::size_t i = 0; i < n; ++i) {
            vel[i] = -vel[i] / eps;
            dy[i] = vel[i];
        }
        dy[n] = eps * D.norm_sq(vel);
        dy[n + 1] = p.dt(t, u);
    };

    Vector y0(n + 2, 0.0);
    std::copy(u0.begin(), u0.end(), y0.begin());

    Trajectory tr;
    tr.first_order = true;
    tr.epsilon = eps;
    tr.dim = n;
    tr.viscosity = D;
    const std::vector<double> grid = checkpoint_grid(t0, t1, ctrl.checkpoints_per_unit);
    tr.times.reserve(grid.size());

    OdeOutput out = [&](double t, const Vector& y, const Vector&) {
        Vector u(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
        LedgerRecord r;
        r.t = t;
        r.potential = p.eval(t, u);
        r.dissipation = y[n];
        r.power = y[n + 1];
        tr.times.push_back(t);
        tr.states.push_back(std::move(u));
        tr.ledger.push_back(r);
        return true;
    };
    OdeStepHook hook = [&](double, const Vector& y) { return finite_in(safety, y, n); };

    const OdeStatus st = integrate_dopri5(rhs, t0, y0, t1, grid, ode_options(ctrl, eps), out, hook);
    raise_on_stop(st, t1, safety);
    tr.accepted_steps = st.accepted;
    tr.rejected_steps = st.rejected;
    finish_ledger(tr);
    return tr;
}

LedgerCheck check_ledger(const Trajectory& traj, double tol_energy) {
    LedgerCheck c;
    if (traj.ledger.empty()) return c;
    double rmin = INFINITY, rmax = -INFINITY, fmax = 0.0;
    double gmin_before = INFINITY;
    for (const LedgerRecord& r : traj.ledger) {
        rmin = std::min(rmin, r.residual);
        rmax = std::max(rmax, r.residual);
        fmax = std::max(fmax, std::abs(r.potential));
        if (std::isfinite(gmin_before)) c.max_g_increase = std::max(c.max_g_increase, r.g - gmin_before);
        gmin_before = std::min(gmin_before, r.g);
    }
    c.max_pair_residual = rmax - rmin;
    c.scale = 1.0 + fmax;
    c.passed = c.max_pair_residual <= tol_energy * c.scale && c.max_g_increase <= tol_energy;
    return c;
}

std::vector<double> DiagnosticsReport::values() const {
    return {sup_u,
            sup_eps_velocity,
            sup_eps2_acceleration,
            eps_int_velocity_sq,
            inv2eps_int_residual_sq,
            eps_abs_int_acc_grad,
            inv2eps_int_grad_sq,
            eps3_int_acceleration_sq};
}

std::vector<std::string> DiagnosticsReport::names() {
    return {"sup|u|",
            "sup eps|u'|",
            "sup eps^2|u''|",
            "eps int |u'|^2",
            "1/(2eps) int |gradF + eps^2 A u''|^2",
            "eps |int <u'', gradF>|",
            "1/(2eps) int |gradF|^2",
            "eps^3 int |u''|^2"};
}

DiagnosticsReport apriori_diagnostics(const Trajectory& traj, const Potential& p, const SpdMatrix& A,
                                      const SpdMatrix& B) {
    if (traj.first_order || traj.velocities.size() != traj.states.size())
        throw Error(ErrorCode::MissingVelocities, "a-priori diagnostics need a second-order trajectory");
    const double eps = traj.epsilon;
    const std::size_t m = traj.times.size();
    std::vector<double> vel_sq(m), res_sq(m), acc_grad(m), grad_sq(m), acc_sq(m);
    DiagnosticsReport d;
    for (std::size_t k = 0; k < m; ++k) {
        const double t = traj.times[k];
        const Vector& u = traj.states[k];
        const Vector& v = traj.velocities[k];
        const Vector g = p.grad(t, u);
        const Vector bv = B.apply(v);
        Vector force(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) force[i] = -bv[i] / eps - g[i] / (eps * eps);
        const Vector acc = A.solve(force);  // reconstructed from the equation, never differenced
        const Vector aacc = A.apply(acc);
        Vector resid(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) resid[i] = g[i] + eps * eps * aacc[i];

        d.sup_u = std::max(d.sup_u, norm2(u));
        d.sup_eps_velocity = std::max(d.sup_eps_velocity, eps * norm2(v));
        d.sup_eps2_acceleration = std::max(d.sup_eps2_acceleration, eps * eps * norm2(acc));
        vel_sq[k] = dot(v, v);
        res_sq[k] = dot(resid, resid);
        acc_grad[k] = dot(acc, g);
        grad_sq[k] = dot(g, g);
        acc_sq[k] = dot(acc, acc);
    }
    d.eps_int_velocity_sq = eps * trapezoid(traj.times, vel_sq);
    d.inv2eps_int_residual_sq = trapezoid(traj.times, res_sq) / (2.0 * eps);
    d.eps_abs_int_acc_grad = eps * std::abs(trapezoid(traj.times, acc_grad));
    d.inv2eps_int_grad_sq = trapezoid(traj.times, grad_sq) / (2.0 * eps);
    d.eps3_int_acceleration_sq = eps * eps * eps * trapezoid(traj.times, acc_sq);
    return d;
}

double dissipation_at(const Trajectory& traj, double t) {
    const auto& ts = traj.times;
    if (ts.empty()) return 0.0;
    if (t <= ts.front()) return traj.ledger.front().dissipation;
    if (t >= ts.back()) return traj.ledger.back().dissipation;
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - ts.begin());
    const double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    return (1.0 - w) * traj.ledger[i - 1].dissipation + w * traj.ledger[i].dissipation;
}

DissipationMeasure dissipation_measure(const Trajectory& traj, std::size_t bins) {
    if (bins == 0) throw Error(ErrorCode::OutOfRange, "at least one bin is required");
    DissipationMeasure mu;
    if (traj.times.empty()) return mu;
    const double t0 = traj.times.front();
    const double t1 = traj.times.back();
    mu.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) mu.edges[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(bins);
    mu.edges.back() = t1;
    mu.mass.resize(bins);
    double prev = dissipation_at(traj, t0);
    for (std::size_t k = 0; k < bins; ++k) {
        const double next = dissipation_at(traj, mu.edges[k + 1]);
        mu.mass[k] = std::max(0.0, next - prev);
        prev = next;
    }
    for (double m : mu.mass) mu.total += m;
    return mu;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "t";
    for (std::size_t i = 0; i < traj.dim; ++i) out += ",u_" + std::to_string(i + 1);
    if (!traj.first_order)
        for (std::size_t i = 0; i < traj.dim; ++i) out += ",v_" + std::to_string(i + 1);
    out += ",F,kinetic,dissipation,power,g,residual\n";
    char buf[64];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out += buf;
    };
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        put(traj.times[k]);
        for (double x : traj.states[k]) {
            out += ',';
            put(x);
        }
        if (!traj.first_order)
            for (double x : traj.velocities[k]) {
                out += ',';
                put(x);
            }
        const LedgerRecord& r = traj.ledger[k];
        for (double x : {r.potential, r.kinetic, r.dissipation, r.power, r.g, r.residual}) {
            out += ',';
            put(x);
        }
        out += '\n';
    }
    return out;
}

}  // namespace bvlab
