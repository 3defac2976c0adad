#include <doctest.h>

#include <cmath>

#include "bvlab/cost.hpp"
#include "bvlab/selftest.hpp"
#include "test_util.hpp"

using namespace bvlab;

namespace {

const Potential& appendix() {
    static const Potential p = make_appendix(0.05).potential;
    return p;
}

const SpdMatrix kOne = SpdMatrix::scalar(1, 1.0);
const SpdMatrix kQuarter = SpdMatrix::scalar(1, 0.25);

}  // namespace

TEST_CASE("constant paths") {
    const DiscretizedPath rest = DiscretizedPath::constant(1.0, 8.0, 257, {9.0});
    CHECK(cost_functional(rest, appendix(), kOne, kQuarter) == 0.0);
    // Away from a critical point the integrand is the constant 1/2 |grad F|^2_{B^-1}.
    const double x = 5.0, N = 4.0;
    const DiscretizedPath c = DiscretizedPath::constant(1.0, N, 129, {x});
    const double g = appendix().grad(1.0, Vector{x})[0];
    CHECK(cost_functional(c, appendix(), kOne, kQuarter) == doctest::Approx(2 * N * 0.5 * g * g / 0.25).epsilon(1e-12));
}

TEST_CASE("straight path 0 to 9 exceeds the energy drop") {
    const DiscretizedPath s = DiscretizedPath::straight(1.0, 8.0, 513, {0.0}, {9.0});
    CHECK_NOTHROW(s.validate());
    const double drop = appendix().eval(1.0, Vector{0.0}) - appendix().eval(1.0, Vector{9.0});
    CHECK(cost_functional(s, appendix(), kOne, kQuarter) > drop);
}

TEST_CASE("property: the functional is invariant under path reversal") {
    bvlab::testing::Draw draw(31);
    for (int k = 0; k < 10; ++k) {
        DiscretizedPath path = DiscretizedPath::straight(1.0, 2.0, 65, {draw.uniform(-1, 3)}, {draw.uniform(3, 9)});
        for (std::size_t i = 2; i + 2 < path.m; ++i) path.values[i][0] += draw.uniform(-0.3, 0.3);
        const double fwd = cost_functional(path, appendix(), kOne, kQuarter);
        const double bwd = cost_functional(path.reversed(), appendix(), kOne, kQuarter);
        CHECK(bwd == doctest::Approx(fwd).epsilon(1e-12));
        CHECK(path.reversed().reversed().values == path.values);
    }
}

TEST_CASE("free coordinates round trip") {
    DiscretizedPath path = DiscretizedPath::straight(0.5, 2.0, 33, {0.0, 1.0}, {2.0, -1.0});
    Vector x = free_coordinates(path);
    CHECK(x.size() == path.free_count() * 2);
    for (double& v : x) v += 0.125;
    set_free_coordinates(path, x);
    CHECK(free_coordinates(path) == x);
    CHECK(path.values[1] == Vector{0.0, 1.0});
}

TEST_CASE("cost gradient against central differences") {
    CHECK(cost_gradient_error(appendix(), 1.0, kOne, kQuarter, 5, 1) <= 1e-5);
    const Potential q = make_quadratic(2, {Polynomial{{0, 1}}, Polynomial{{0.5}}});
    const SpdMatrix A = SpdMatrix::from_entries(2, std::vector<double>{2, 0.5, 0.5, 1});
    const SpdMatrix B = SpdMatrix::from_entries(2, std::vector<double>{1, -0.3, -0.3, 0.5});
    CHECK(cost_gradient_error(q, 0.7, A, B, 5, 2) <= 1e-5);
    // A scaled gradient callback is still a field the functional and its gradient
    // share, so this oracle cannot see it; the derivative checks do.
    CHECK(cost_gradient_error(with_gradient_error(appendix(), 1e-3), 1.0, kOne, kQuarter, 5, 1) <= 1e-5);
}

TEST_CASE("optimized paths are discretely stationary") {
    const Potential q = make_quadratic(1, {Polynomial{{0, 1}}});
    const DiscretizedPath seed = DiscretizedPath::straight(0.0, 4.0, 129, {-1.0}, {1.0});
    const OptimizeResult r = optimize_path(seed, q, kOne, kOne, 1e-10, 200);
    CHECK(r.converged);
    CHECK(norm2(cost_gradient(r.path, q, kOne, kOne)) <= 1e-10 * (1 + r.value));
    CHECK(r.value <= cost_functional(seed, q, kOne, kOne));
}

TEST_CASE("cost of identical points is zero") {
    const CostResult r = minimize_cost(appendix(), 1.0, {5.0}, {5.0}, kOne, kQuarter);
    CHECK(r.value == 0.0);
}

TEST_CASE("quadratic cost respects the lower bound and is symmetric") {
    const Potential q = make_quadratic(1, {Polynomial{{0, 1}}});
    const double t = 0.5;
    const CostResult ab = minimize_cost(q, t, {-0.5}, {1.5}, kOne, kOne);
    const CostResult ba = minimize_cost(q, t, {1.5}, {-0.5}, kOne, kOne);
    const double lower = std::abs(q.eval(t, Vector{-0.5}) - q.eval(t, Vector{1.5}));
    CHECK(ab.value >= lower - 1e-3);
    CHECK(std::abs(ab.value - ba.value) <= 1e-2 * std::max(ab.value, ba.value));
    const AxiomReport ax = check_cost_axioms(q, t, {{-0.5}, {-0.5}}, kOne, kOne);
    CHECK(ax.passed());
}
