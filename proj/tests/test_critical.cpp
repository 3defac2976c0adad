#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "bvlab/critical.hpp"
#include "bvlab/error.hpp"
#include "bvlab/potential.hpp"
#include "test_util.hpp"

using namespace bvlab;

namespace {

const Potential& appendix() {
    static const Potential p = make_appendix(0.05).potential;
    return p;
}

}  // namespace

TEST_CASE("appendix critical set at the jump time") {
    const CriticalSearch s = find_critical_points(appendix(), 1.0);
    REQUIRE(s.points.size() == 4);
    const double loc[] = {0, 1, 2, 9};
    const CriticalKind kind[] = {CriticalKind::Degenerate, CriticalKind::Minimum, CriticalKind::Maximum,
                                 CriticalKind::Minimum};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(s.points[i].location[0] == doctest::Approx(loc[i]).epsilon(1e-9).scale(1.0));
        CHECK(s.points[i].kind == kind[i]);
        CHECK(s.points[i].residual <= 1e-9);
    }
    CHECK(min_gap(s.points) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("appendix critical set before the jump holds the minimizer curve") {
    const CriticalSearch s = find_critical_points(appendix(), 0.5);
    const double phi = -std::sqrt(1.0 / 6.0);
    const auto it = std::find_if(s.points.begin(), s.points.end(),
                                 [&](const CriticalPoint& c) { return std::abs(c.location[0] - phi) < 1e-9; });
    REQUIRE(it != s.points.end());
    CHECK(it->kind == CriticalKind::Minimum);
}

TEST_CASE("quadratic critical set is the load") {
    const Potential q = make_quadratic(2, {Polynomial{{0, 1}}, Polynomial{{-1, 0, 1}}});
    for (double t : {0.0, 0.7, 1.9}) {
        const CriticalSearch s = find_critical_points(q, t);
        REQUIRE(s.points.size() == 1);
        CHECK(s.points[0].location[0] == doctest::Approx(t));
        CHECK(s.points[0].location[1] == doctest::Approx(-1 + t * t));
        CHECK(s.points[0].kind == CriticalKind::Minimum);
    }
}

TEST_CASE("Newton polishing") {
    CHECK(std::abs(newton_polish(appendix(), 1.0, Vector{8.7}, 1e-12)[0] - 9.0) <= 1e-10);
    const Potential q = make_quadratic(1, {Polynomial{{0.5, 2}}});
    const PolishResult r = polish(q, 0.25, Vector{-7.0}, 1e-12, 1);
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0));
    try {
        (void)newton_polish(appendix(), 1.0, Vector{0.5}, 1e-9, 1);
        FAIL("expected NoConvergence");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoConvergence);
    }
}

TEST_CASE("min_gap against brute force") {
    CriticalPoint one;
    one.location = {0.0};
    try {
        (void)min_gap({one});
        FAIL("expected TooFewPoints");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooFewPoints);
    }
    bvlab::testing::Draw draw(21);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<CriticalPoint> pts(3);
        for (CriticalPoint& c : pts) c.location = draw.vector(2, -5, 5);
        double brute = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = i + 1; j < 3; ++j) brute = std::min(brute, distance(pts[i].location, pts[j].location));
        CHECK(min_gap(pts) == doctest::Approx(brute).epsilon(1e-14));
    }
}

TEST_CASE("classification follows the eigenvalue signs") {
    CHECK(classify({1.0, 2.0}, 1e-6) == CriticalKind::Minimum);
    CHECK(classify({-1.0, 2.0}, 1e-6) == CriticalKind::Saddle);
    CHECK(classify({-1.0, -2.0}, 1e-6) == CriticalKind::Maximum);
    CHECK(classify({1e-9, 2.0}, 1e-6) == CriticalKind::Degenerate);
}

TEST_CASE("scalar roots find simple and tangential roots") {
    // (x + 1) x^2 (x - 2): simple roots at -1 and 2, a double root at 0.
    const auto f = [](double x) { return (x + 1) * x * x * (x - 2); };
    const auto df = [](double x) { return 4 * x * x * x - 3 * x * x - 4 * x; };
    const std::vector<double> r = scalar_roots(f, df, -3, 3, 601, 1e-12);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == doctest::Approx(-1.0));
    CHECK(std::abs(r[1]) < 1e-6);
    CHECK(r[2] == doctest::Approx(2.0));
}
