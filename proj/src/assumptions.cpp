#include "bvlab/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "bvlab/critical.hpp"
#include "bvlab/error.hpp"

namespace bvlab {

namespace {

constexpr double kStep = 1e-5;
constexpr std::size_t kProbeTimes = 16;

// Fourth-order central difference of a vector-valued function along one coordinate.
template <class F>
Vector fd4(F&& f, double h) {
    const Vector p1 = f(h);
    const Vector m1 = f(-h);
    const Vector p2 = f(2.0 * h);
    const Vector m2 = f(-2.0 * h);
    Vector d(p1.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h);
    return d;
}

double max_abs_diff(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Vector sample_point(const Box& box, std::mt19937_64& rng) {
    Vector x(box.dim());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::uniform_real_distribution<double> u(box.lower[i], box.upper[i]);
        x[i] = u(rng);
    }
    return x;
}

}  // namespace

bool AssumptionReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult* AssumptionReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

DerivativeConsistency check_derivatives(const Potential& p, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(p.horizon_start(), p.horizon_end());
    const std::size_t n = p.dim();
    DerivativeConsistency dc;
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = ut(rng);
        const Vector x = sample_point(p.box(), rng);
        const Vector g = p.grad(t, x);
        const Matrix h = p.hess(t, x);

        Vector fd_g(n);
        Matrix fd_h(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            auto shifted = [&](double d) {
                Vector y = x;
                y[i] += d;
                return y;
            };
            fd_g[i] = fd4([&](double d) { return Vector{p.eval(t, shifted(d))}; }, kStep)[0];
            const Vector col = fd4([&](double d) { return p.grad(t, shifted(d)); }, kStep);
            for (std::size_t r = 0; r < n; ++r) fd_h(r, i) = col[r];
        }
        dc.grad_error = std::max(dc.grad_error, max_abs_diff(g, fd_g) / (1.0 + norm_inf(g)));
        dc.hess_error = std::max(dc.hess_error, (h - fd_h).max_abs() / (1.0 + h.max_abs()));
        dc.hess_asymmetry = std::max(dc.hess_asymmetry, h.asymmetry());

        const double dt = p.dt(t, x);
        const double fd_dt = fd4([&](double d) { return Vector{p.eval(t + d, x)}; }, kStep)[0];
        dc.dt_error = std::max(dc.dt_error, std::abs(dt - fd_dt) / (1.0 + std::abs(dt)));
        const Vector dtg = p.dt_grad(t, x);
        const Vector fd_dtg = fd4([&](double d) { return p.grad(t + d, x); }, kStep);
        dc.dt_grad_error = std::max(dc.dt_grad_error, max_abs_diff(dtg, fd_dtg) / (1.0 + norm_inf(dtg)));
    }
    return dc;
}

AppendixConditions check_appendix_conditions(const ScalarProfile& f1, double eta) {
    AppendixConditions ac;
    std::ostringstream why;

    bool smooth = true;
    const auto& pieces = f1.pieces();
    for (std::size_t i = 1; i < pieces.size(); ++i) {
        const double x = pieces[i].start;
        const auto l = f1.jet_of_piece(i - 1, x);
        const auto r = f1.jet_of_piece(i, x);
        const double scale = 1.0 + std::max({std::abs(l.value), std::abs(l.d1), std::abs(l.d2), std::abs(l.d3)});
        const double jump = std::max({std::abs(l.value - r.value), std::abs(l.d1 - r.d1), std::abs(l.d2 - r.d2),
                                      std::abs(l.d3 - r.d3)});
        if (jump > 1e-8 * scale) {
            smooth = false;
            why << "C3 join broken at x=" << x << " (jump " << jump << "); ";
        }
    }
    for (int k = 0; k <= 200; ++k) {
        const double x = -2.0 * k / 200.0;
        if (std::abs(f1.value(x) + x * x * x) > 1e-12 * (1.0 + std::abs(x * x * x))) {
            smooth = false;
            why << "F1 differs from -x^3 at x=" << x << "; ";
            break;
        }
    }
    ac.smoothness = smooth;

    ac.roots = scalar_roots([&](double x) { return f1.d1(x); }, [&](double x) { return f1.d2(x); }, -2.0, 12.0, 140001, 1e-10);
    const std::vector<double> expected{0.0, 1.0, 2.0, 9.0};
    ac.h1 = ac.roots.size() == expected.size();
    for (std::size_t i = 0; ac.h1 && i < expected.size(); ++i) ac.h1 = std::abs(ac.roots[i] - expected[i]) <= 1e-8;
    if (!ac.h1) {
        why << "roots of F1':";
        for (double r : ac.roots) why << ' ' << r;
        why << "; ";
    }

    ac.h2 = std::abs(f1.value(1.0) + 1.0) <= 1e-12;
    ac.h3 = std::abs(f1.value(2.0) - (-1.0 + eta)) <= 1e-12;
    bool slope_ok = true;
    for (int k = 0; k <= 1000; ++k) slope_ok = slope_ok && f1.d1(3.0 + 5.0 * k / 1000.0) <= -1.0;
    ac.h4 = std::abs(f1.value(3.0) + 3.0) <= 1e-12 && slope_ok;
    ac.h5 = f1.d2(1.0) > 0.0 && f1.d2(9.0) > 0.0;
    bool tail = true;
    for (int k = 1; k <= 1000; ++k) tail = tail && f1.d1(9.0 + 3.0 * k / 1000.0) > 0.0;
    ac.tail = tail;
    if (!ac.h2) why << "F1(1)=" << f1.value(1.0) << "; ";
    if (!ac.h3) why << "F1(2)=" << f1.value(2.0) << "; ";
    if (!ac.h4) why << "F1(3)=" << f1.value(3.0) << (slope_ok ? "" : " or F1'>-1 on [3,8]") << "; ";
    if (!ac.h5) why << "F1''(1)=" << f1.d2(1.0) << " F1''(9)=" << f1.d2(9.0) << "; ";
    if (!ac.tail) why << "F1' not positive beyond 9; ";
    ac.detail = why.str();
    return ac;
}

AssumptionReport verify_assumptions(const Potential& p, std::size_t samples, std::uint64_t seed,
                                    const AppendixSpec* appendix) {
    if (samples < 100) throw Error(ErrorCode::OutOfRange, "verify_assumptions needs at least 100 samples");
    AssumptionReport rep;
    rep.samples = samples;
    rep.seed = seed;

    rep.derivatives = check_derivatives(p, samples, seed);
    const auto& d = rep.derivatives;
    rep.checks.push_back({"grad-consistency", d.grad_error <= kGradTol, d.grad_error, kGradTol, ""});
    rep.checks.push_back({"hess-consistency", d.hess_error <= kHessTol, d.hess_error, kHessTol, ""});
    rep.checks.push_back({"dt-consistency", d.dt_error <= kDtTol, d.dt_error, kDtTol, ""});
    rep.checks.push_back({"dt-grad-consistency", d.dt_grad_error <= kDtTol, d.dt_grad_error, kDtTol, ""});
    rep.checks.push_back({"hess-symmetry", d.hess_asymmetry <= 1e-12, d.hess_asymmetry, 1e-12, ""});

    // Power control |dt F| <= c1 F + c2 by least squares, then c2 raised to feasibility.
    {
        std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
        std::uniform_real_distribution<double> ut(p.horizon_start(), p.horizon_end());
        std::vector<double> fs;
        std::vector<double> ps;
        for (std::size_t s = 0; s < samples; ++s) {
            const double t = ut(rng);
            const Vector x = sample_point(p.box(), rng);
            fs.push_back(p.eval(t, x));
            ps.push_back(std::abs(p.dt(t, x)));
        }
        const double m = static_cast<double>(samples);
        double sf = 0, sp = 0, sff = 0, sfp = 0;
        for (std::size_t i = 0; i < samples; ++i) {
            sf += fs[i];
            sp += ps[i];
            sff += fs[i] * fs[i];
            sfp += fs[i] * ps[i];
        }
        const double det = m * sff - sf * sf;
        double c1 = det > 0.0 ? (m * sfp - sf * sp) / det : 0.0;
        if (c1 < 0.0) c1 = 0.0;
        const double c2 = (sp - c1 * sf) / m;
        double viol = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < samples; ++i) viol = std::max(viol, ps[i] - (c1 * fs[i] + c2));
        rep.power = {c1, c2, viol, c2 + std::max(0.0, viol)};
        const bool ok = std::isfinite(c1) && std::isfinite(rep.power.c2_feasible);
        rep.checks.push_back({"power-control-fit", ok, rep.power.max_violation, rep.power.c2_feasible,
                              "c1=" + std::to_string(c1) + " c2_feasible=" + std::to_string(rep.power.c2_feasible)});
    }

    // Isolation of critical points and boundary coercivity at probe times.
    {
        double gap = std::numeric_limits<double>::infinity();
        double margin = std::numeric_limits<double>::infinity();
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        const Box& box = p.box();
        const std::size_t n = p.dim();
        Box core = box;  // central tenth of the box
        for (std::size_t i = 0; i < n; ++i) {
            const double c = 0.5 * (box.lower[i] + box.upper[i]);
            const double h = 0.05 * (box.upper[i] - box.lower[i]);
            core.lower[i] = c - h;
            core.upper[i] = c + h;
        }
        for (std::size_t k = 0; k < kProbeTimes; ++k) {
            const double t = p.horizon_start() +
                             (p.horizon_end() - p.horizon_start()) * (static_cast<double>(k) + 0.5) / kProbeTimes;
            const auto found = find_critical_points(p, t);
            if (found.points.size() >= 2) gap = std::min(gap, min_gap(found.points));

            double boundary_min = std::numeric_limits<double>::infinity();
            double core_max = -std::numeric_limits<double>::infinity();
            const std::size_t per_face = n == 1 ? 1 : 64;
            for (std::size_t axis = 0; axis < n; ++axis) {
                for (double side : {0.0, 1.0}) {
                    for (std::size_t s = 0; s < per_face; ++s) {
                        Vector x = n == 1 ? Vector(1) : sample_point(box, rng);
                        x[axis] = side == 0.0 ? box.lower[axis] : box.upper[axis];
                        boundary_min = std::min(boundary_min, p.eval(t, x));
                    }
                }
            }
            core_max = p.eval(t, core.center());
            for (std::size_t s = 0; s < 64; ++s) core_max = std::max(core_max, p.eval(t, sample_point(core, rng)));
            margin = std::min(margin, boundary_min - core_max);
        }
        rep.critical_min_gap = gap;
        rep.coercivity_margin = margin;
        rep.checks.push_back({"critical-isolation", gap > 1e-6 * p.box().diameter(), gap, 1e-6 * p.box().diameter(),
                              std::isinf(gap) ? "at most one critical point per probe time" : ""});
        rep.checks.push_back({"boundary-coercivity", margin > 0.0, margin, 0.0, ""});
    }

    if (appendix != nullptr) {
        const auto* model = dynamic_cast<const TiltedProfileModel*>(&p.model());
        if (model == nullptr) throw Error(ErrorCode::ConstructionFailed, "appendix checks need a tilted profile potential");
        rep.appendix = check_appendix_conditions(model->profile(), appendix->eta);
        const auto& a = *rep.appendix;
        rep.checks.push_back({"appendix-smoothness", a.smoothness, 0, 0, a.detail});
        rep.checks.push_back({"appendix-H1", a.h1, static_cast<double>(a.roots.size()), 4, a.detail});
        rep.checks.push_back({"appendix-H2", a.h2, 0, 0, a.detail});
        rep.checks.push_back({"appendix-H3", a.h3, 0, 0, a.detail});
        rep.checks.push_back({"appendix-H4", a.h4, 0, 0, a.detail});
        rep.checks.push_back({"appendix-H5", a.h5, 0, 0, a.detail});
        rep.checks.push_back({"appendix-tail", a.tail, 0, 0, a.detail});
    }
    return rep;
}

}  // namespace bvlab
