#include "bvlab/heteroclinic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bvlab/critical.hpp"
#include "bvlab/ode.hpp"

namespace bvlab {

namespace {

std::string fmt_vec(const Vector& x) {
    std::ostringstream o;
    o << '(';
    for (std::size_t i = 0; i < x.size(); ++i) o << (i ? ", " : "") << x[i];
    o << ')';
    return o.str();
}

// k-th eigenvalue of lambda^2 A + lambda B + H (A may be absent).
double pencil_eig(const Matrix& H, const Matrix* A, const Matrix& B, double lambda, std::size_t k, Vector* vec) {
    Matrix M = H + B * lambda;
    if (A) M = M + *A * (lambda * lambda);
    const SymmetricEigen e = eig_sym(M);
    if (vec) {
        vec->resize(M.rows());
        for (std::size_t i = 0; i < M.rows(); ++i) (*vec)[i] = e.vectors(i, k);
    }
    return e.values[k];
}

EquilibriumSpectrum linearize(const Potential& p, double t, const Vector& point, const Matrix* A, const SpdMatrix& B,
                              double degenerate_tol, double tol_crit) {
    const std::size_t n = p.dim();
    if (point.size() != n || B.dim() != n) throw Error(ErrorCode::DimensionMismatch, "linearization dimensions");
    EquilibriumSpectrum sp;
    sp.residual = norm2(p.grad(t, point));
    Matrix H = p.hess(t, point);
    // symmetrize away rounding so the Jacobi solver accepts it
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) H(i, j) = H(j, i) = 0.5 * (H(i, j) + H(j, i));
    const SymmetricEigen he = eig_sym(H);
    sp.hess_eigs = he.values;

    std::size_t zero = 0;
    for (std::size_t k = 0; k < n; ++k) {
        Vector d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = he.vectors(i, k);
        // small roots of the pencil behave like -mu / (d^T B d)
        if (std::abs(he.values[k]) / B.norm_sq(d) <= degenerate_tol) {
            sp.degenerate = true;
            sp.neutral_dirs.push_back(d);
            ++zero;
        }
    }
    if (sp.residual > tol_crit && !(sp.degenerate && sp.residual <= 1e3 * tol_crit))
        throw Error(ErrorCode::NotAnEquilibrium,
                    "gradient norm " + std::to_string(sp.residual) + " at " + fmt_vec(point) + " exceeds tol_crit");

    const Matrix& Bm = B.matrix();
    for (std::size_t k = 0; k < n; ++k) {
        if (he.values[k] >= 0.0) continue;
        bool neutral = false;
        for (const Vector& d : sp.neutral_dirs) {
            Vector e(n);
            for (std::size_t i = 0; i < n; ++i) e[i] = he.vectors(i, k);
            if (std::abs(dot(d, e)) > 0.999) neutral = true;
        }
        if (neutral) continue;
        // eigenvalues of the pencil increase strictly in lambda > 0: bisect on the k-th one
        double lo = 0.0, hi = 1.0;
        while (pencil_eig(H, A, Bm, hi, k, nullptr) <= 0.0) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (pencil_eig(H, A, Bm, mid, k, nullptr) > 0.0 ? hi : lo) = mid;
        }
        const double rate = 0.5 * (lo + hi);
        Vector dir;
        pencil_eig(H, A, Bm, rate, k, &dir);
        const double nd = norm2(dir);
        for (double& x : dir) x /= nd;
        sp.unstable_rates.push_back(rate);
        sp.unstable_dirs.push_back(std::move(dir));
    }
    const std::size_t total = A ? 2 * n : n;
    sp.stable_count = total - sp.unstable_rates.size() - zero;
    return sp;
}

struct ShotSetup {
    const Potential* p = nullptr;
    double t = 0.0;
    bool first_order = false;
    const SpdMatrix* A = nullptr;
    const SpdMatrix* B = nullptr;  // viscosity, or damping for first order
    Vector from;
    Vector x0;
    double arm_distance = 0.0;
    double delta = 0.0;
};

Heteroclinic run_shot(const ShotSetup& su, const ShotControl& ctrl) {
    const Potential& p = *su.p;
    const std::size_t n = p.dim();
    const double t = su.t;
    const Box safety = p.box().inflated(ctrl.box_inflation);
    const SpdMatrix& B = *su.B;

    OdeRhs rhs;
    Vector y0;
    if (su.first_order) {
        rhs = [&](double, const Vector& y, Vector& dy) {
            const std::span<const double> v(y.data(), n);
            const Vector vel = scaled(-1.0, B.solve(p.grad(t, v)));
            for (std::size_t i = 0; i < n; ++i) dy[i] = vel[i];
            dy[n] = B.norm_sq(vel);
        };
        y0.assign(n + 1, 0.0);
    } else {
        const SpdMatrix& A = *su.A;
        rhs = [&](double, const Vector& y, Vector& dy) {
            const std::span<const double> v(y.data(), n);
            const std::span<const double> w(y.data() + n, n);
            const Vector g = p.grad(t, v);
            const Vector bw = B.apply(w);
            Vector force(n);
            for (std::size_t i = 0; i < n; ++i) force[i] = -bw[i] - g[i];
            const Vector acc = A.solve(force);
            for (std::size_t i = 0; i < n; ++i) {
                dy[i] = w[i];
                dy[n + i] = acc[i];
            }
            dy[2 * n] = dot(w, bw);
        };
        y0.assign(2 * n + 1, 0.0);
    }
    std::copy(su.x0.begin(), su.x0.end(), y0.begin());

    Heteroclinic h;
    h.t = t;
    h.first_order = su.first_order;
    h.from_point = su.from;
    h.delta = su.delta;

    const auto samples = static_cast<std::size_t>(std::ceil(ctrl.horizon / ctrl.sample_spacing));
    std::vector<double> grid(samples + 1);
    for (std::size_t k = 0; k <= samples; ++k) grid[k] = std::min(ctrl.horizon, static_cast<double>(k) * ctrl.sample_spacing);

    bool settled = false;
    bool escaped = false;
    int streak = 0;
    double arm = su.arm_distance;
    double cost = 0.0;
    double e_min = std::numeric_limits<double>::infinity();

    OdeOutput out = [&](double s, const Vector& y, const Vector& dy) {
        Vector v(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
        Vector vel(n), acc(n);
        if (su.first_order) {
            for (std::size_t i = 0; i < n; ++i) vel[i] = dy[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                vel[i] = y[n + i];
                acc[i] = dy[n + i];
            }
        }
        if (!safety.contains(v)) {
            escaped = true;
            return false;
        }
        const Vector g = p.grad(t, v);
        const double gn = norm2(g);
        // defect from the interpolant's derivative, which is independent of the right-hand side between steps
        Vector defect = B.apply(vel);
        if (!su.first_order) defect = axpy(1.0, su.A->apply(acc), defect);
        defect = axpy(1.0, g, defect);
        if (!h.s.empty()) h.residual = std::max(h.residual, norm2(defect) / (1.0 + gn));
        // near a stiff sink the interpolant's derivative carries step noise; the flow relation does not
        if (su.first_order) vel = scaled(-1.0, B.solve(g));

        const double energy = p.eval(t, v) + (su.first_order ? 0.0 : 0.5 * su.A->norm_sq(vel));
        if (std::isfinite(e_min)) h.max_energy_increase = std::max(h.max_energy_increase, energy - e_min);
        e_min = std::min(e_min, energy);

        h.s.push_back(s);
        h.v.push_back(v);
        h.dv.push_back(vel);
        cost = y.back();

        if (distance(v, su.from) <= arm) return true;
        if (norm2(vel) <= ctrl.settle_tol && gn <= ctrl.settle_tol) {
            if (++streak < ctrl.settle_count) return true;
            streak = 0;
            const PolishResult pr = polish(p, t, v, ctrl.tol_crit, 100);
            const double end_err = std::max(distance(v, pr.x), norm2(vel));
            if (!pr.converged || end_err > ctrl.endpoint_tol) return true;
            if (distance(pr.x, su.from) <= ctrl.endpoint_tol) {
                // settled back onto the start in a flat region: push the arming radius out
                arm = 10.0 * distance(v, su.from);
                return true;
            }
            h.to_point = pr.x;
            h.end_error = end_err;
            settled = true;
            return false;
        }
        streak = 0;
        return true;
    };
    OdeStepHook hook = [&](double, const Vector& y) {
        for (double x : y)
            if (!std::isfinite(x)) return false;
        return true;
    };

    OdeOptions oo;
    oo.rtol = ctrl.rtol;
    oo.atol = ctrl.atol;
    oo.h_max = ctrl.h_max;
    const OdeStatus st = integrate_dopri5(rhs, 0.0, y0, ctrl.horizon, grid, oo, out, hook);
    if (escaped)
        throw Error(ErrorCode::Escaped, "shot from " + fmt_vec(su.from) + " left the box at s=" + std::to_string(h.s.back()));
    if (!settled) {
        if (st.stop == OdeStop::StoppedByCaller)
            throw Error(ErrorCode::BlowUp, "shot from " + fmt_vec(su.from) + " produced a non-finite state");
        throw Error(ErrorCode::NoSettle, "shot from " + fmt_vec(su.from) + " did not settle within horizon " +
                                             std::to_string(ctrl.horizon));
    }
    h.cost_along = cost;
    h.start_error = std::max(distance(h.v.front(), su.from), norm2(h.dv.front()));
    h.energy_drop = p.eval(t, su.from) - p.eval(t, h.to_point);
    return h;
}

Heteroclinic shoot(const Potential& p, double t, const Vector& from, const Vector& direction, double delta0,
                   const SpdMatrix* A, const SpdMatrix& B, const ShotControl& ctrl) {
    const std::size_t n = p.dim();
    if (from.size() != n || direction.size() != n) throw Error(ErrorCode::DimensionMismatch, "shot dimensions");
    if (!(delta0 > 0.0)) throw Error(ErrorCode::OutOfRange, "delta0 must be positive");
    const double dn = norm2(direction);
    if (!(dn > 0.0)) throw Error(ErrorCode::OutOfRange, "direction must be nonzero");
    const Vector d = scaled(1.0 / dn, direction);

    auto one = [&](double delta) {
        ShotSetup su;
        su.p = &p;
        su.t = t;
        su.first_order = A == nullptr;
        su.A = A;
        su.B = &B;
        su.from = from;
        su.x0 = from;
        su.x0 = axpy(delta, d, su.x0);
        su.arm_distance = 10.0 * delta;
        su.delta = delta;
        if (dot(p.grad(t, su.x0), d) >= 0.0)
            throw Error(ErrorCode::NotDescent, "direction " + fmt_vec(d) + " does not decrease F near " + fmt_vec(from));
        return run_shot(su, ctrl);
    };

    Heteroclinic coarse = one(delta0);
    if (!ctrl.check_robustness) return coarse;
    try {
        Heteroclinic fine = one(delta0 / 10.0);
        fine.robustness_shift = distance(coarse.to_point, fine.to_point);
        fine.robust = fine.robustness_shift < ctrl.endpoint_tol;
        return fine;
    } catch (const Error&) {
        coarse.robustness_shift = std::numeric_limits<double>::infinity();
        coarse.robust = false;
        return coarse;
    }
}

}  // namespace

std::vector<Vector> candidate_directions(const EquilibriumSpectrum& sp) {
    std::vector<Vector> dirs;
    auto both = [&](const Vector& d) {
        dirs.push_back(d);
        dirs.push_back(scaled(-1.0, d));
    };
    for (const Vector& d : sp.unstable_dirs) both(d);
    for (const Vector& d : sp.neutral_dirs) both(d);
    return dirs;
}

EquilibriumSpectrum linearize_equilibrium(const Potential& p, double t, const Vector& point, const SpdMatrix& A,
                                          const SpdMatrix& B, double degenerate_tol, double tol_crit) {
    if (A.dim() != p.dim()) throw Error(ErrorCode::DimensionMismatch, "mass matrix dimension");
    return linearize(p, t, point, &A.matrix(), B, degenerate_tol, tol_crit);
}

EquilibriumSpectrum linearize_first_order(const Potential& p, double t, const Vector& point, const SpdMatrix& damping,
                                          double degenerate_tol, double tol_crit) {
    return linearize(p, t, point, nullptr, damping, degenerate_tol, tol_crit);
}

Heteroclinic shoot_heteroclinic(const Potential& p, double t, const Vector& from_point, const Vector& direction,
                                double delta0, const SpdMatrix& A, const SpdMatrix& B, const ShotControl& ctrl) {
    if (A.dim() != p.dim() || B.dim() != p.dim()) throw Error(ErrorCode::DimensionMismatch, "shot matrices");
    return shoot(p, t, from_point, direction, delta0, &A, B, ctrl);
}

Heteroclinic shoot_first_order(const Potential& p, double t, const Vector& from_point, const Vector& direction,
                               double delta0, const SpdMatrix& damping, const ShotControl& ctrl) {
    if (damping.dim() != p.dim()) throw Error(ErrorCode::DimensionMismatch, "damping dimension");
    return shoot(p, t, from_point, direction, delta0, nullptr, damping, ctrl);
}

Heteroclinic release_from_rest(const Potential& p, double t, const Vector& start, const SpdMatrix& A,
                               const SpdMatrix& B, bool first_order, const ShotControl& ctrl) {
    if (start.size() != p.dim()) throw Error(ErrorCode::DimensionMismatch, "release state dimension");
    ShotSetup su;
    su.p = &p;
    su.t = t;
    su.first_order = first_order;
    su.A = first_order ? nullptr : &A;
    su.B = &B;
    su.from = start;
    su.x0 = start;
    return run_shot(su, ctrl);
}

JumpChain build_jump_chain(const Potential& p, double t, const Vector& u_minus, const Vector& u_plus,
                           const SpdMatrix& A, const SpdMatrix& B, const ChainOptions& opts) {
    JumpChain chain;
    chain.t = t;
    chain.u_minus = u_minus;
    chain.u_plus = u_plus;
    chain.energy_drop = p.eval(t, u_minus) - p.eval(t, u_plus);
    if (distance(u_minus, u_plus) <= opts.match_tol) return chain;

    if (norm2(p.grad(t, u_plus)) > 1e3 * opts.shot.tol_crit)
        throw ChainStuckError("u_plus " + fmt_vec(u_plus) + " is not critical", chain);

    std::size_t max_links = opts.max_links;
    if (max_links == 0) max_links = std::max<std::size_t>(1, find_critical_points(p, t).points.size());

    std::vector<Vector> visited{u_minus};
    Vector current = u_minus;
    auto finish = [&]() {
        for (const Heteroclinic& l : chain.links) chain.total_cost_along += l.cost_along;
        return chain;
    };

    if (opts.initial_datum && norm2(p.grad(t, u_minus)) > opts.shot.tol_crit) {
        Heteroclinic first = release_from_rest(p, t, u_minus, A, B, opts.first_order, opts.shot);
        current = first.to_point;
        visited.push_back(current);
        chain.links.push_back(std::move(first));
        if (distance(current, u_plus) <= opts.match_tol) return finish();
    }

    while (chain.links.size() < max_links) {
        const EquilibriumSpectrum sp =
            opts.first_order ? linearize_first_order(p, t, current, B, opts.degenerate_tol, opts.shot.tol_crit)
                             : linearize_equilibrium(p, t, current, A, B, opts.degenerate_tol, opts.shot.tol_crit);
        const double f_here = p.eval(t, current);
        std::optional<Heteroclinic> best;
        bool best_hits = false;
        for (const Vector& d : candidate_directions(sp)) {
            Heteroclinic link;
            try {
                link = opts.first_order ? shoot_first_order(p, t, current, d, opts.delta0, B, opts.shot)
                                        : shoot_heteroclinic(p, t, current, d, opts.delta0, A, B, opts.shot);
            } catch (const Error&) {
                continue;
            }
            if (!(p.eval(t, link.to_point) < f_here)) continue;
            bool seen = false;
            for (const Vector& v : visited) seen = seen || distance(v, link.to_point) <= opts.match_tol;
            if (seen) continue;
            const bool hits = distance(link.to_point, u_plus) <= opts.match_tol;
            const bool better = !best || (hits && !best_hits) ||
                                (hits == best_hits && link.energy_drop > best->energy_drop);
            if (better) {
                best = std::move(link);
                best_hits = hits;
            }
        }
        if (!best)
            throw ChainStuckError("no admissible link leaves " + fmt_vec(current) + " at t=" + std::to_string(t), finish());
        current = best->to_point;
        visited.push_back(current);
        chain.links.push_back(std::move(*best));
        if (best_hits) return finish();
    }
    throw ChainStuckError("chain exceeded " + std::to_string(max_links) + " links without reaching " + fmt_vec(u_plus),
                          finish());
}

std::string heteroclinic_csv(const Heteroclinic& link) {
    const std::size_t n = link.from_point.size();
    std::string out = "s";
    for (std::size_t i = 0; i < n; ++i) out += ",v_" + std::to_string(i + 1);
    for (std::size_t i = 0; i < n; ++i) out += ",dv_" + std::to_string(i + 1);
    out += '\n';
    char buf[64];
    for (std::size_t k = 0; k < link.s.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", link.s[k]);
        out += buf;
        for (double x : link.v[k]) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            out += buf;
        }
        for (double x : link.dv[k]) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace bvlab
