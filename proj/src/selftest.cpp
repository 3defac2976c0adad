#include "bvlab/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "bvlab/cost.hpp"
#include "bvlab/error.hpp"

namespace bvlab {

namespace {

// std distributions are implementation-defined; this mapping is not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    Vector vector(std::size_t n, double lo, double hi) {
        Vector v(n);
        for (double& x : v) x = uniform(lo, hi);
        return v;
    }

private:
    std::mt19937_64 gen_;
};

SpdMatrix random_spd(Rng& rng, std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    Matrix q = m * m.transposed();
    for (std::size_t i = 0; i < n; ++i) q(i, i) += 0.1;
    return SpdMatrix::from_matrix(q);
}

CheckResult bound_check(std::string name, double value, double tol, std::string detail = "") {
    return {std::move(name), value <= tol, value, tol, std::move(detail)};
}

struct NamedProblem {
    std::string name;
    Potential potential;
    SpdMatrix A;
    SpdMatrix B;
    double t;
};

std::vector<NamedProblem> problems(bool faulty) {
    auto fault = [&](Potential p) { return faulty ? with_gradient_error(p, 1e-3) : p; };
    std::vector<NamedProblem> out;
    out.push_back({"appendix", fault(make_appendix(0.05).potential), SpdMatrix::scalar(1, 1.0), SpdMatrix::scalar(1, 0.25), 1.0});
    out.push_back({"quadratic", fault(make_quadratic(1, {Polynomial{{0.0, 1.0}}})), SpdMatrix::identity(1),
                   SpdMatrix::identity(1), 0.5});
    const double a[] = {2.0, 0.5, 0.5, 1.0};
    const double b[] = {1.0, -0.3, -0.3, 0.5};
    out.push_back({"quadratic-2d", fault(make_quadratic(2, {Polynomial{{0.0, 1.0}}, Polynomial{{1.0, 0.0, 0.5}}})),
                   SpdMatrix::from_entries(2, a), SpdMatrix::from_entries(2, b), 0.7});
    return out;
}

void algebra_checks(std::uint64_t seed, std::vector<CheckResult>& out) {
    Rng rng(seed);
    double cs = 0.0, young = 0.0, identity = 0.0, root = 0.0, eig = 0.0, orth = 0.0;
    for (int k = 0; k < 500; ++k) {
        const std::size_t n = 1 + static_cast<std::size_t>(k % 4);
        const SpdMatrix q = random_spd(rng, n);
        const Vector z1 = rng.vector(n, -2.0, 2.0), z2 = rng.vector(n, -2.0, 2.0);
        const double ip = dot(z1, z2), ni = q_inv_norm(q, z1), nq = q_norm(q, z2);
        const double s = 1.0 + ni * ni + nq * nq;
        cs = std::max(cs, (std::abs(ip) - ni * nq) / s);
        young = std::max(young, (ni * nq - 0.5 * (ni * ni + nq * nq)) / s);
        const Vector w = axpy(1.0, z1, q.apply(z2));
        const double lhs = q_inv_norm(q, w) * q_inv_norm(q, w);
        identity = std::max(identity, std::abs(lhs - (ni * ni + 2.0 * ip + nq * nq)) / (1.0 + std::abs(lhs)));
        root = std::max(root, std::abs(nq - norm2(q.sqrt_apply(z2))) / (1.0 + nq));

        Matrix sym(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) sym(i, j) = sym(j, i) = rng.uniform(-1.0, 1.0);
        const SymmetricEigen e = eig_sym(sym);
        Matrix lambda(n, n);
        for (std::size_t i = 0; i < n; ++i) lambda(i, i) = e.values[i];
        const Matrix rebuilt = e.vectors * lambda * e.vectors.transposed();
        eig = std::max(eig, (rebuilt - sym).max_abs() / std::max(1.0, sym.max_abs()));
        orth = std::max(orth, (e.vectors.transposed() * e.vectors - Matrix::identity(n)).max_abs());
    }
    out.push_back(bound_check("algebra.cauchy-schwarz", cs, 1e-12, "|<z1,z2>| <= |z1|_{Q^-1} |z2|_Q"));
    out.push_back(bound_check("algebra.young", young, 1e-12, "|z1|_{Q^-1} |z2|_Q <= (|z1|^2_{Q^-1} + |z2|^2_Q)/2"));
    out.push_back(bound_check("algebra.polarization", identity, 1e-9, "|z1 + Q z2|^2_{Q^-1} expansion"));
    out.push_back(bound_check("algebra.sqrt-norm", root, 1e-10, "|z|_Q = |Q^{1/2} z|"));
    out.push_back(bound_check("algebra.eigen-reconstruction", eig, 1e-10));
    out.push_back(bound_check("algebra.eigen-orthonormal", orth, 1e-10));

    const double d4[] = {4.0};
    const SpdMatrix four = SpdMatrix::from_entries(1, d4);
    const Vector one{1.0};
    const double ex = std::max(std::abs(q_norm(four, one) - 2.0), std::abs(q_inv_norm(four, one) - 0.5));
    out.push_back(bound_check("algebra.diag4-norms", ex, 1e-15, "|1|_4 = 2, |1|_{1/4} = 0.5"));

    const double indefinite[] = {1.0, 2.0, 2.0, 1.0};
    CheckResult rej{"algebra.rejects-indefinite", false, 0.0, 0.0, "(2, [1,2,2,1])"};
    try {
        (void)SpdMatrix::from_entries(2, indefinite);
        rej.detail += " was accepted";
    } catch (const Error& e) {
        rej.passed = e.code() == ErrorCode::NotPositiveDefinite;
        if (!rej.passed) rej.detail += std::string(" raised ") + std::string(to_string(e.code()));
    }
    out.push_back(rej);
}

void derivative_checks(const std::vector<NamedProblem>& probs, std::uint64_t seed, std::vector<CheckResult>& out) {
    for (const NamedProblem& pr : probs) {
        const DerivativeConsistency d = check_derivatives(pr.potential, 1000, seed);
        const std::string base = "derivatives." + pr.name + ".";
        out.push_back(bound_check(base + "grad", d.grad_error, kGradTol));
        out.push_back(bound_check(base + "hess", d.hess_error, kHessTol));
        out.push_back(bound_check(base + "dt", d.dt_error, kDtTol));
        out.push_back(bound_check(base + "dt-grad", d.dt_grad_error, kDtTol));
    }
}

void gradient_checks(const std::vector<NamedProblem>& probs, std::uint64_t seed, std::vector<CheckResult>& out) {
    for (const NamedProblem& pr : probs)
        out.push_back(bound_check("gradient." + pr.name, cost_gradient_error(pr.potential, pr.t, pr.A, pr.B, 5, seed),
                                  1e-5, "cost gradient against central differences, 5 paths"));
}

void axiom_checks(const std::vector<NamedProblem>& probs, std::vector<CheckResult>& out) {
    const NamedProblem& ap = probs.front();
    const AxiomReport rep = check_cost_axioms(ap.potential, ap.t, {{0.0}, {1.0}, {2.0}, {9.0}}, ap.A, ap.B);
    std::string detail;
    for (const std::string& v : rep.violations) detail += (detail.empty() ? "" : "; ") + v;
    out.push_back({"axioms.diagonal", rep.diagonal_zero, 0.0, 0.0, "c(a,a) = 0"});
    out.push_back(bound_check("axioms.symmetry", rep.max_symmetry_rel, 1e-2, "relative |c(a,b) - c(b,a)|"));
    out.push_back({"axioms.lower-bound", rep.lower_bound, rep.min_lower_bound_margin, -rep.tol,
                   "min c(a,b) - |F(a) - F(b)|"});
    out.push_back(bound_check("axioms.triangle", rep.max_triangle_excess, rep.tol, "max c(a,c) - c(a,b) - c(b,c)"));
    if (!detail.empty()) out.back().detail += " [" + detail + "]";
}

}  // namespace

double cost_gradient_error(const Potential& p, double t, const SpdMatrix& A, const SpdMatrix& B, std::size_t paths,
                           std::uint64_t seed) {
    Rng rng(seed);
    const Box& box = p.box();
    // keep the paths where the potential is meant to be evaluated
    const Box inner = box.inflated(-0.5);
    double worst = 0.0;
    for (std::size_t k = 0; k < paths; ++k) {
        Vector u1(p.dim()), u2(p.dim());
        for (std::size_t i = 0; i < p.dim(); ++i) {
            u1[i] = rng.uniform(inner.lower[i], inner.upper[i]);
            u2[i] = rng.uniform(inner.lower[i], inner.upper[i]);
        }
        DiscretizedPath path = DiscretizedPath::straight(t, 1.0 + static_cast<double>(k), 33, u1, u2);
        Vector x = free_coordinates(path);
        const double amp = 0.1 * inner.diameter();
        for (double& xi : x) xi += rng.uniform(-amp, amp);
        set_free_coordinates(path, x);

        const Vector g = cost_gradient(path, p, A, B);
        double err = 0.0, gmax = 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double step = 1e-5 * (1.0 + std::abs(x[i]));
            DiscretizedPath plus = path, minus = path;
            Vector xp = x, xm = x;
            xp[i] += step;
            xm[i] -= step;
            set_free_coordinates(plus, xp);
            set_free_coordinates(minus, xm);
            const double fd = (cost_functional(plus, p, A, B) - cost_functional(minus, p, A, B)) / (xp[i] - xm[i]);
            err = std::max(err, std::abs(g[i] - fd));
            gmax = std::max(gmax, std::abs(g[i]));
        }
        worst = std::max(worst, err / gmax);
    }
    return worst;
}

bool SelftestReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> SelftestReport::failed() const {
    std::vector<std::string> names;
    for (const CheckResult& c : checks)
        if (!c.passed) names.push_back(c.name);
    return names;
}

std::string SelftestReport::table() const {
    std::size_t width = 5;
    for (const CheckResult& c : checks) width = std::max(width, c.name.size());
    std::ostringstream o;
    char line[512];
    std::snprintf(line, sizeof line, "%-*s  %-4s  %12s  %12s  %s\n", static_cast<int>(width), "check", "ok", "value",
                  "tolerance", "detail");
    o << line;
    for (const CheckResult& c : checks) {
        std::snprintf(line, sizeof line, "%-*s  %-4s  %12.4e  %12.4e  %s\n", static_cast<int>(width), c.name.c_str(),
                      c.passed ? "PASS" : "FAIL", c.value, c.tolerance, c.detail.c_str());
        o << line;
    }
    o << (passed() ? "selftest passed" : "selftest FAILED") << " (" << checks.size() << " checks)\n";
    return o.str();
}

const std::vector<std::string>& selftest_groups() {
    static const std::vector<std::string> groups{"algebra", "derivatives", "gradient", "axioms"};
    return groups;
}

SelftestReport run_selftest(const SelftestOptions& opts) {
    const auto& known = selftest_groups();
    for (const std::string& g : opts.groups)
        if (std::find(known.begin(), known.end(), g) == known.end())
            throw Error(ErrorCode::ConfigError, "unknown selftest group '" + g + "'");
    if (opts.inject_fault && *opts.inject_fault != "gradient")
        throw Error(ErrorCode::ConfigError, "unknown fault '" + *opts.inject_fault + "' (known: gradient)");
    auto wanted = [&](const std::string& g) {
        return opts.groups.empty() || std::find(opts.groups.begin(), opts.groups.end(), g) != opts.groups.end();
    };
    const std::vector<NamedProblem> probs = problems(opts.inject_fault.has_value());
    SelftestReport rep;
    if (wanted("algebra")) algebra_checks(opts.seed, rep.checks);
    if (wanted("derivatives")) derivative_checks(probs, opts.seed, rep.checks);
    if (wanted("gradient")) gradient_checks(probs, opts.seed, rep.checks);
    if (wanted("axioms")) axiom_checks(probs, rep.checks);
    return rep;
}

}  // namespace bvlab
