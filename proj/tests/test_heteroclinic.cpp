#include <doctest.h>

#include <cmath>

#include "bvlab/error.hpp"
#include "bvlab/heteroclinic.hpp"

using namespace bvlab;

namespace {

const Potential& appendix() {
    static const Potential p = make_appendix(0.05).potential;
    return p;
}

const SpdMatrix kOne = SpdMatrix::scalar(1, 1.0);
const SpdMatrix kQuarter = SpdMatrix::scalar(1, 0.25);

void check_link(const Heteroclinic& h, double from, double to) {
    CHECK(h.from_point[0] == doctest::Approx(from));
    CHECK(std::abs(h.to_point[0] - to) <= 1e-3);
    CHECK(h.end_error <= ShotControl{}.endpoint_tol);
    CHECK(std::abs(appendix().grad(1.0, h.to_point)[0]) <= 1e-9);
    CHECK(h.residual <= 1e-6);
    CHECK(h.max_energy_increase <= 1e-9);
    // Along an exact solution the dissipation telescopes to the energy drop.
    CHECK(h.cost_along == doctest::Approx(h.energy_drop).epsilon(1e-6));
}

}  // namespace

TEST_CASE("inertial link from the degenerate point reaches the far well") {
    const Heteroclinic h = shoot_heteroclinic(appendix(), 1.0, {0.0}, {1.0}, 1e-4, kOne, kQuarter);
    check_link(h, 0.0, 9.0);
    CHECK(h.robust);
    CHECK(h.robustness_shift <= 1e-5);
}

TEST_CASE("gradient-flow links stop at the nearest well") {
    check_link(shoot_first_order(appendix(), 1.0, {0.0}, {1.0}, 1e-4, kQuarter), 0.0, 1.0);
    check_link(shoot_first_order(appendix(), 1.0, {2.0}, {1.0}, 1e-4, kQuarter), 2.0, 9.0);
    check_link(shoot_first_order(appendix(), 1.0, {2.0}, {-1.0}, 1e-4, kQuarter), 2.0, 1.0);
}

TEST_CASE("no descent from a minimum") {
    for (double d : {1.0, -1.0}) {
        try {
            (void)shoot_heteroclinic(appendix(), 1.0, {1.0}, {d}, 1e-4, kOne, kQuarter);
            FAIL("expected NotDescent");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NotDescent);
        }
    }
}

TEST_CASE("spectrum at the hyperbolic maximum solves the quadratic pencil") {
    const EquilibriumSpectrum sp = linearize_equilibrium(appendix(), 1.0, {2.0}, kOne, kQuarter);
    const double h = sp.hess_eigs[0];
    CHECK(h < 0.0);
    REQUIRE(sp.unstable_rates.size() == 1);
    // lambda^2 + lambda/4 + h = 0
    CHECK(sp.unstable_rates[0] == doctest::Approx((-0.25 + std::sqrt(0.0625 - 4 * h)) / 2));
    CHECK(sp.stable_count == 1);
    CHECK_FALSE(sp.degenerate);
    const EquilibriumSpectrum deg = linearize_equilibrium(appendix(), 1.0, {0.0}, kOne, kQuarter);
    CHECK(deg.degenerate);
    CHECK(deg.unstable_rates.empty());
    CHECK(candidate_directions(deg).size() == 2);
    const EquilibriumSpectrum fo = linearize_first_order(appendix(), 1.0, {2.0}, kQuarter);
    REQUIRE(fo.unstable_rates.size() == 1);
    CHECK(fo.unstable_rates[0] == doctest::Approx(-h / 0.25));
}

TEST_CASE("jump chains") {
    const JumpChain c = build_jump_chain(appendix(), 1.0, {0.0}, {9.0}, kOne, kQuarter);
    REQUIRE(c.m() == 1);
    CHECK(std::abs(c.links[0].to_point[0] - 9.0) <= 1e-3);
    CHECK(c.total_cost_along == doctest::Approx(c.energy_drop).epsilon(1e-6));
    CHECK(build_jump_chain(appendix(), 1.0, {1.0}, {1.0}, kOne, kQuarter).m() == 0);
    ChainOptions fo;
    fo.first_order = true;
    const JumpChain c1 = build_jump_chain(appendix(), 1.0, {0.0}, {1.0}, kOne, kQuarter, fo);
    REQUIRE(c1.m() == 1);
    CHECK(std::abs(c1.links[0].to_point[0] - 1.0) <= 1e-3);
}

TEST_CASE("link CSV has one row per sample") {
    const Heteroclinic h = shoot_first_order(appendix(), 1.0, {2.0}, {-1.0}, 1e-4, kQuarter);
    const std::string csv = heteroclinic_csv(h);
    std::size_t rows = 0;
    for (char ch : csv) rows += ch == '\n';
    CHECK(rows == h.s.size() + 1);
}
