// Acceptance run: one PASS/FAIL line per criterion. `--expect-fail k,...`
// names criteria known to fail; the exit code is 0 iff exactly those fail.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bvlab/app.hpp"
#include "bvlab/assumptions.hpp"
#include "bvlab/cost.hpp"
#include "bvlab/demo.hpp"
#include "bvlab/error.hpp"
#include "bvlab/flow.hpp"
#include "bvlab/limit.hpp"
#include "bvlab/selftest.hpp"

using namespace bvlab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <class F>
auto timed(double& secs, F&& f) {
    const auto start = Clock::now();
    auto r = f();
    secs = seconds_since(start);
    return r;
}

struct Line {
    int id;
    bool passed;
    std::string text;
};

std::vector<Line> g_lines;

void report(int id, bool passed, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
void report(int id, bool passed, const char* fmt, ...) {
    char buf[1024];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    g_lines.push_back({id, passed, buf});
    std::printf("[%s] %2d %s\n", passed ? "PASS" : "FAIL", id, buf);
    std::fflush(stdout);
}

// Registered potentials of the property suites.
struct Registered {
    std::string name;
    Potential p;
    double t;
    SpdMatrix A;
    SpdMatrix B;
};

CustomSplineSpec double_well() {
    CustomSplineSpec s;
    s.knots = {-2, -1, 0, 1, 2};
    for (double x : s.knots) {
        s.values.push_back(x * x * x * x / 4 - x * x / 2);
        s.first.push_back(x * x * x - x);
        s.second.push_back(3 * x * x - 1);
        s.third.push_back(6 * x);
    }
    return s;
}

std::vector<Registered> registered() {
    const SpdMatrix one = SpdMatrix::scalar(1, 1.0);
    return {
        {"appendix", make_appendix(0.05).potential, 1.0, one, SpdMatrix::scalar(1, 0.25)},
        {"quadratic", make_quadratic(1, {Polynomial{{0, 1}}}), 0.5, one, one},
        {"quadratic-2d", make_quadratic(2, {Polynomial{{0, 1}}, Polynomial{{0.5, 0, -0.25}}}), 0.7,
         SpdMatrix::from_entries(2, std::vector<double>{2, 0.5, 0.5, 1}),
         SpdMatrix::from_entries(2, std::vector<double>{1, -0.3, -0.3, 0.5})},
        {"double-well", make_custom_spline(double_well()), 1.2, one, one},
    };
}

// Closed form of eps^2 u'' + eps u' + u = t with u(0) = u'(0) = 0.
double quadratic_closed_form(double eps, double t) {
    const double w = std::sqrt(3.0) / (2 * eps);
    return t - eps + std::exp(-t / (2 * eps)) * (eps * std::cos(w * t) - eps / std::sqrt(3.0) * std::sin(w * t));
}

std::set<int> parse_expected(int argc, char** argv) {
    std::set<int> out;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--expect-fail" && i + 1 < argc) {
            for (double v : parse_vector(argv[++i])) out.insert(static_cast<int>(v));
        } else {
            std::fprintf(stderr, "usage: acceptance [--expect-fail k,...]\n");
            std::exit(2);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const std::set<int> expected = parse_expected(argc, argv);
    const AppendixPotential ap = make_appendix(0.05);
    const Potential& p = ap.potential;
    const SpdMatrix A = SpdMatrix::scalar(1, 1.0), B = SpdMatrix::scalar(1, 0.25);
    const double drop = ap.profile.value(0.0) - ap.profile.value(9.0);  // F_1(0) - F_1(9) from the profile itself

    // 1. divergence of the two limits at t = 1
    double demo_secs = 0.0;
    const DemoResult demo = timed(demo_secs, [] { return run_appendix_demo(); });
    {
        const double e1 = std::abs(demo.first_order_link.to_point[0] - 1.0);
        const double e2 = std::abs(demo.second_order_link.to_point[0] - 9.0);
        report(1, e1 <= 1e-3 && e2 <= 1e-3 && demo_secs <= 10.0,
               "heteroclinic endpoints from 0 at t=1: first-order %.9f (err %.1e), second-order %.9f (err %.1e), "
               "tol 1e-3; appendix-demo %.1f s <= 10 s",
               demo.first_order_link.to_point[0], e1, demo.second_order_link.to_point[0], e2, demo_secs);
    }

    // 2. pre-jump tracking, recomputed from a fresh sweep
    double sweep_secs = 0.0;
    const SweepConfig s2 = appendix_sweep(false);
    const std::vector<Trajectory> t2 = timed(sweep_secs, [&] { return run_epsilon_sweep(s2); });
    std::vector<double> track;
    for (const Trajectory& tr : t2) {
        double sup = 0.0;
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            if (tr.times[i] >= 0.1 && tr.times[i] <= 0.9)
                sup = std::max(sup, std::abs(tr.states[i][0] + std::sqrt((1.0 - tr.times[i]) / 3.0)));
        track.push_back(sup);
    }
    {
        bool decreasing = true;
        for (std::size_t i = 1; i < track.size(); ++i) decreasing = decreasing && track[i] < track[i - 1];
        std::ostringstream o;
        for (std::size_t i = 0; i < track.size(); ++i) o << (i ? ", " : "") << track[i];
        report(2, track.back() <= 0.05 && decreasing && sweep_secs <= 60.0,
               "sup_[0.1,0.9] |u_eps - phi| = [%s] for eps = 0.1..0.0125; last %.3e <= 0.05, %s; sweep %.2f s <= 60 s",
               o.str().c_str(), track.back(), decreasing ? "decreasing" : "NOT decreasing", sweep_secs);
    }

    // 3. post-jump values at t = 1.4
    const SweepConfig s1 = appendix_sweep(true);
    const std::vector<Trajectory> t1 = run_epsilon_sweep(s1);
    {
        const double u2 = value_at(t2.back(), 1.4)[0], u1 = value_at(t1.back(), 1.4)[0];
        report(3, std::abs(u2 - 9.0) <= 0.1 && std::abs(u1 - 1.0) <= 0.05,
               "u_eps(1.4) at eps=0.0125: second-order %.6f (|u-9| %.2e <= 0.1), first-order %.6f (|u-1| %.2e <= 0.05)",
               u2, std::abs(u2 - 9.0), u1, std::abs(u1 - 1.0));
    }

    // 4. energy identity over every integration of this run
    {
        std::vector<Trajectory> all = t2;
        all.insert(all.end(), t1.begin(), t1.end());
        for (const Trajectory& tr : run_epsilon_sweep(quadratic_sweep())) all.push_back(tr);
        const Potential q = make_quadratic(1, {Polynomial{{0, 1}}});
        all.push_back(integrate_second_order(q, SpdMatrix::identity(1), SpdMatrix::identity(1), 0.1, {0.0}, {0.0}, 0, 2));
        const Registered q2 = registered()[2];
        all.push_back(integrate_second_order(q2.p, q2.A, q2.B, 0.05, {1.0, -1.0}, {2.0, 0.5}, 0, 2));
        SweepConfig dw(make_custom_spline(double_well()), A, A);
        dw.epsilons = {0.1, 0.05, 0.025, 0.0125};
        dw.t0 = 0.0;
        dw.t1 = 2.0;
        dw.u0 = {-1.324717957244746};
        for (const Trajectory& tr : run_epsilon_sweep(dw)) all.push_back(tr);
        double worst = 0.0, worst_g = 0.0;
        bool ok = true;
        for (const Trajectory& tr : all) {
            const LedgerCheck lc = check_ledger(tr);
            worst = std::max(worst, lc.max_pair_residual / lc.scale);
            worst_g = std::max(worst_g, lc.max_g_increase);
            ok = ok && lc.max_pair_residual <= 1e-6 * lc.scale && lc.max_g_increase <= 1e-6;
        }
        report(4, ok,
               "%zu integrations: max pair residual / (1+max|F|) = %.2e <= 1e-6; max increase of g = %.2e <= 1e-6",
               all.size(), worst, worst_g);
    }

    // 5. cost axioms on {0, 1, 2, 9} at t = 1, judged from the raw cost matrix
    {
        const std::vector<Vector> pts{{0.0}, {1.0}, {2.0}, {9.0}};
        double secs = 0.0;
        const AxiomReport ax = timed(secs, [&] { return check_cost_axioms(p, 1.0, pts, A, B); });
        const auto& c = ax.cost;
        bool diag = true;
        double sym = 0.0, lower = std::numeric_limits<double>::infinity(), tri = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < 4; ++a) {
            diag = diag && c[a][a] == 0.0;
            for (std::size_t b = 0; b < 4; ++b) {
                if (a == b) continue;
                sym = std::max(sym, std::abs(c[a][b] - c[b][a]) / std::max(c[a][b], c[b][a]));
                lower = std::min(lower, c[a][b] - std::abs(p.eval(1.0, pts[a]) - p.eval(1.0, pts[b])));
                for (std::size_t m = 0; m < 4; ++m)
                    if (m != a && m != b) tri = std::max(tri, c[a][b] - c[a][m] - c[m][b]);
            }
        }
        report(5, diag && sym <= 1e-2 && lower >= -1e-3 && tri <= 1e-3 && secs <= 120.0,
               "c(a,a)=0 %s; symmetry %.2e <= 1e-2; min c-|dF| %.2e >= -1e-3; max triangle excess %.2e <= 1e-3; "
               "c(0,1)=%.4f c(0,2)=%.4f c(1,2)=%.4f c(0,9)=%.4f c(1,9)=%.4f c(2,9)=%.4f; %.1f s <= 120 s",
               diag ? "exactly" : "VIOLATED", sym, lower, tri, c[0][1], c[0][2], c[1][2], c[0][3], c[1][3], c[2][3],
               secs);
    }

    // 6. jump identity at the certified second-order jump
    {
        const JumpRecord* j = nullptr;
        for (const JumpRecord& r : demo.second_order.jumps)
            if (!j || std::abs(r.t_star - 1.0) < std::abs(j->t_star - 1.0)) j = &r;
        const double cost = j && j->cost_value ? *j->cost_value : std::nan("");
        const double mu = j ? j->mu_atom : std::nan("");
        const double cost_rel = std::abs(cost - drop) / std::abs(drop);
        const double mu_tol = 5e-2 * (1 + std::abs(ap.profile.value(9.0)));
        report(6, cost_rel <= 1e-2 && std::abs(mu - drop) <= mu_tol,
               "F1(0)-F1(9) = %.6f; cost %.6f (rel %.2e <= 1e-2); mu atom %.6f (|mu-drop| %.3f <= %.3f)", drop, cost,
               cost_rel, mu, std::abs(mu - drop), mu_tol);
    }

    // 7. energy balance on the appendix and the quadratic sweeps
    {
        const BalanceReport& b2 = demo.second_order_balance;
        const BalanceReport& b1 = demo.first_order_balance;
        const SweepConfig qs = quadratic_sweep();
        const LimitReport ql = estimate_limit(run_epsilon_sweep(qs), qs.potential);
        const BalanceReport bq = verify_energy_balance(ql, qs.potential);
        const bool ok = b2.max_residual <= 5e-2 * b2.scale && b1.max_residual <= 5e-2 * b1.scale &&
                        ql.jumps.empty() && bq.max_residual <= 1e-2;
        report(7, ok,
               "appendix second-order %.3f <= %.3f, first-order %.3f <= %.3f; quadratic %.2e <= 1e-2 with %zu jumps",
               b2.max_residual, 5e-2 * b2.scale, b1.max_residual, 5e-2 * b1.scale, bq.max_residual, ql.jumps.size());
    }

    const std::vector<Registered> regs = registered();

    // 8. cost gradient against central differences
    {
        std::ostringstream o;
        double worst = 0.0;
        for (const Registered& r : regs) {
            const double e = cost_gradient_error(r.p, r.t, r.A, r.B, 5, 8);
            worst = std::max(worst, e);
            o << (o.tellp() ? ", " : "") << r.name << " " << e;
        }
        report(8, worst <= 1e-5, "5 seeded paths per potential: %s; max %.2e <= 1e-5", o.str().c_str(), worst);
    }

    // 9. derivative consistency
    {
        std::ostringstream o;
        bool ok = true;
        for (const Registered& r : regs) {
            const DerivativeConsistency d = check_derivatives(r.p, 1000, 9);
            ok = ok && d.grad_error <= kGradTol && d.hess_error <= kHessTol && d.dt_error <= kDtTol &&
                 d.dt_grad_error <= kDtTol;
            char buf[200];
            std::snprintf(buf, sizeof buf, "%s grad %.1e hess %.1e dt %.1e dt_grad %.1e", r.name.c_str(), d.grad_error,
                          d.hess_error, d.dt_error, d.dt_grad_error);
            o << (o.tellp() ? "; " : "") << buf;
        }
        report(9, ok, "1000 samples (tol grad 1e-6, hess 1e-5, dt 1e-6): %s", o.str().c_str());
    }

    // 10. closed-form quadratic trajectory
    {
        const Potential q = make_quadratic(1, {Polynomial{{0, 1}}});
        std::ostringstream o;
        double worst = 0.0;
        for (double eps : {0.1, 0.04, 0.02, 0.01}) {
            const Trajectory tr = integrate_second_order(q, SpdMatrix::identity(1), SpdMatrix::identity(1), eps, {0.0},
                                                         {0.0}, 0.0, 2.0);
            double err = 0.0;
            for (std::size_t i = 0; i < tr.times.size(); ++i)
                err = std::max(err, std::abs(tr.states[i][0] - quadratic_closed_form(eps, tr.times[i])));
            worst = std::max(worst, err);
            o << (o.tellp() ? ", " : "") << "eps " << eps << ": " << err;
        }
        report(10, worst <= 1e-6, "sup |u - closed form| on [0,2]: %s; max %.2e <= 1e-6", o.str().c_str(), worst);
    }

    // 11. assumption verifier and the spurious-root hook
    {
        const AssumptionReport rep = verify_assumptions(p, 1000, 11, &ap.spec);
        const AppendixConditions& c = *rep.appendix;
        const bool flags = c.h1 && c.h2 && c.h3 && c.h4 && c.h5;
        std::string hook = "no error";
        bool construction_failed = false;
        AppendixOptions bad;
        bad.inject_root_at = 5.0;
        try {
            (void)make_appendix(bad);
        } catch (const Error& e) {
            construction_failed = e.code() == ErrorCode::ConstructionFailed;
            hook = e.what();
        }
        report(11, flags && construction_failed, "H1 %d H2 %d H3 %d H4 %d H5 %d (roots of F1': %zu); injected root: %s",
               c.h1, c.h2, c.h3, c.h4, c.h5, c.roots.size(), hook.c_str());
    }

    // 12. a-priori diagnostics across the appendix sweep. Uniform boundedness
    // is read as saturation: halving the smallest eps grows no diagnostic by
    // more than 1.5 (an eps^-1 blow-up would double it).
    {
        std::vector<std::vector<double>> vals;
        for (const Trajectory& tr : t2) vals.push_back(apriori_diagnostics(tr, p, A, B).values());
        const auto names = DiagnosticsReport::names();
        double bound = 0.0, worst_ratio = 0.0;
        bool finite = true;
        std::string worst_name;
        for (std::size_t k = 0; k < names.size(); ++k) {
            for (const auto& v : vals) {
                finite = finite && std::isfinite(v[k]);
                bound = std::max(bound, v[k]);
            }
            const double prev = vals[vals.size() - 2][k], last = vals.back()[k];
            const double ratio = prev > 0 ? last / prev : (last > 0 ? INFINITY : 1.0);
            if (ratio > worst_ratio) {
                worst_ratio = ratio;
                worst_name = names[k];
            }
        }
        report(12, finite && worst_ratio <= 1.5,
               "8 diagnostics over 4 members bounded by C = %.4g; worst growth from eps=0.025 to 0.0125 is %.3f (%s) "
               "<= 1.5",
               bound, worst_ratio, worst_name.c_str());
    }

    std::set<int> failed;
    for (const Line& l : g_lines)
        if (!l.passed) failed.insert(l.id);
    std::printf("%zu/%zu criteria passed", g_lines.size() - failed.size(), g_lines.size());
    if (!expected.empty()) {
        std::printf("; expected failures:");
        for (int k : expected) std::printf(" %d", k);
    }
    std::printf("\n");
    return failed == expected ? 0 : 1;
}
