#include <doctest.h>

#include <cmath>

#include "bvlab/assumptions.hpp"
#include "bvlab/error.hpp"
#include "bvlab/potential.hpp"
#include "test_util.hpp"

using namespace bvlab;

namespace {

const AppendixPotential& appendix() {
    static const AppendixPotential ap = make_appendix(0.05);
    return ap;
}

// Knot data of the double well S(x) = x^4/4 - x^2/2.
CustomSplineSpec double_well_spec() {
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

}  // namespace

TEST_CASE("appendix values at the constrained points") {
    const Potential& p = appendix().potential;
    CHECK(p.eval(1.0, Vector{1.0}) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(p.eval(1.0, Vector{3.0}) == doctest::Approx(-3.0).epsilon(1e-12));
    for (double t : {0.0, 0.3, 1.0, 1.5}) CHECK(p.eval(t, Vector{0.0}) == 0.0);
    CHECK(std::abs(p.grad(0.5, Vector{-std::sqrt(1.0 / 6.0)})[0]) < 1e-12);
    // x <= 0 is exactly -x^3 - (t - 1) x.
    for (double x : {-0.3, -1.0, -2.5})
        CHECK(p.eval(0.25, Vector{x}) == doctest::Approx(-x * x * x + 0.75 * x).epsilon(1e-13));
}

TEST_CASE("minimizer curve of the appendix") {
    CHECK(minimizer_curve_appendix(0.0) == doctest::Approx(-std::sqrt(1.0 / 3.0)));
    CHECK(std::abs(minimizer_curve_appendix(1.0 - 1e-12)) < 1e-6);
    CHECK(minimizer_curve_appendix(0.25) == doctest::Approx(-0.5));
    const Potential& p = appendix().potential;
    for (double t = 0.0; t < 1.0; t += 0.05) {
        const double phi = minimizer_curve_appendix(t);
        CHECK(std::abs(p.grad(t, Vector{phi})[0]) < 1e-12);
        CHECK(p.hess(t, Vector{phi})(0, 0) > 0.0);
    }
}

TEST_CASE("appendix profile is C3 across its knots") {
    const ScalarProfile& f1 = appendix().profile;
    const auto& pieces = f1.pieces();
    for (std::size_t k = 1; k < pieces.size(); ++k) {
        const double x = pieces[k].start;
        const ScalarProfile::Jet l = f1.jet_of_piece(k - 1, x), r = f1.jet_of_piece(k, x);
        const double s = 1.0 + std::abs(l.d1) + std::abs(l.d2) + std::abs(l.d3);
        CHECK(std::abs(l.value - r.value) <= 1e-10 * (1 + std::abs(l.value)));
        CHECK(std::abs(l.d1 - r.d1) <= 1e-10 * s);
        CHECK(std::abs(l.d2 - r.d2) <= 1e-9 * s);
        CHECK(std::abs(l.d3 - r.d3) <= 1e-8 * s);
    }
}

TEST_CASE("appendix root layout and the spurious-root hook") {
    const AppendixConditions c = check_appendix_conditions(appendix().profile, 0.05);
    CHECK(c.h1);
    CHECK(c.h2);
    CHECK(c.h3);
    CHECK(c.h4);
    CHECK(c.h5);
    CHECK(c.smoothness);
    CHECK(c.tail);
    AppendixOptions bad;
    bad.inject_root_at = 5.0;
    try {
        (void)make_appendix(bad);
        FAIL("construction should fail");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConstructionFailed);
    }
}

TEST_CASE("derivative consistency and the wrong-gradient fault") {
    const Potential& p = appendix().potential;
    const DerivativeConsistency d = check_derivatives(p, 1000, 7);
    CHECK(d.grad_error <= kGradTol);
    CHECK(d.hess_error <= kHessTol);
    CHECK(d.dt_error <= kDtTol);
    CHECK(d.dt_grad_error <= kDtTol);
    const AssumptionReport bad = verify_assumptions(with_gradient_error(p, 0.1), 200, 7);
    REQUIRE(bad.find("grad-consistency") != nullptr);
    CHECK_FALSE(bad.find("grad-consistency")->passed);
    CHECK_FALSE(bad.all_passed());
}

TEST_CASE("quadratic potential: closed forms and a clean verifier run") {
    const Potential q = make_quadratic(2, {Polynomial{{0, 1}}, Polynomial{{1, 0, 0.5}}});
    const double t = 0.8;
    const Vector x{0.3, -0.4};
    const double l0 = t, l1 = 1 + 0.5 * t * t;
    const double e0 = x[0] - l0, e1 = x[1] - l1;
    CHECK(q.eval(t, x) == doctest::Approx(0.5 * (e0 * e0 + e1 * e1)));
    CHECK(q.grad(t, x)[1] == doctest::Approx(e1));
    CHECK(q.dt(t, x) == doctest::Approx(-(e0 * 1.0 + e1 * t)));
    CHECK(q.dt_grad(t, x)[1] == doctest::Approx(-t));
    CHECK((q.hess(t, x) - Matrix::identity(2)).max_abs() == 0.0);
    // The second load component drifts to 3, so the box boundary dips below its centre.
    const AssumptionReport drift = verify_assumptions(q, 200, 3);
    REQUIRE(drift.find("boundary-coercivity") != nullptr);
    CHECK_FALSE(drift.find("boundary-coercivity")->passed);
    const AssumptionReport rep = verify_assumptions(make_quadratic(1, {Polynomial{{0, 1}}}), 500, 3);
    for (const CheckResult& c : rep.checks) CHECK_MESSAGE(c.passed, c.name);
}

TEST_CASE("septic spline reproduces a quartic from exact knot data") {
    const CustomSplineSpec spec = double_well_spec();
    const Potential p = make_custom_spline(spec);
    bvlab::testing::Draw draw(5);
    for (int i = 0; i < 200; ++i) {
        // Inside the knots and on the right tail the quartic is reproduced exactly.
        const double x = draw.uniform(-2.0, 3.0);
        const double s = x * x * x * x / 4 - x * x / 2;
        CHECK(p.eval(1.0, Vector{x}) == doctest::Approx(s).epsilon(1e-10).scale(1.0));
        CHECK(p.grad(1.0, Vector{x})[0] == doctest::Approx(x * x * x - x).epsilon(1e-9).scale(1.0));
        CHECK(p.eval(1.6, Vector{x}) == doctest::Approx(s - 0.6 * x).epsilon(1e-10).scale(1.0));
    }
    // Left of the knots the extension is the cubic Taylor polynomial.
    const double z = -0.5;
    CHECK(p.eval(1.0, Vector{-2.0 + z}) == doctest::Approx(2 - 6 * z + 11 * z * z / 2 - 2 * z * z * z));
}

TEST_CASE("custom spline rejects malformed knot data") {
    CustomSplineSpec s = double_well_spec();
    s.values.pop_back();
    CHECK_THROWS_AS((void)make_custom_spline(s), Error);
    s = double_well_spec();
    s.knots[2] = s.knots[1];
    CHECK_THROWS_AS((void)make_custom_spline(s), Error);
}

TEST_CASE("frozen potential has no time dependence") {
    const Potential f = frozen_at(appendix().potential, 1.0);
    CHECK(f.dt(0.2, Vector{4.0}) == 0.0);
    CHECK(f.eval(0.2, Vector{4.0}) == appendix().potential.eval(1.0, Vector{4.0}));
}
