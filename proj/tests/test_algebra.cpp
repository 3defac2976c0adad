#include <doctest.h>

#include <cmath>

#include "bvlab/algebra.hpp"
#include "bvlab/error.hpp"
#include "test_util.hpp"

using namespace bvlab;
using bvlab::testing::Draw;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::ConfigError;
}

}  // namespace

TEST_CASE("spd construction examples") {
    const SpdMatrix one = SpdMatrix::from_entries(1, std::vector<double>{1.0});
    CHECK(one.eigenvalues()[0] == doctest::Approx(1.0));
    const SpdMatrix quarter = SpdMatrix::from_entries(1, std::vector<double>{0.25});
    CHECK(quarter.coercivity() == doctest::Approx(0.25));
    CHECK(code_of([] { (void)SpdMatrix::from_entries(2, std::vector<double>{1, 2, 2, 1}); }) ==
          ErrorCode::NotPositiveDefinite);
    CHECK(code_of([] { (void)SpdMatrix::from_entries(2, std::vector<double>{1, 0.5, 0.0, 1}); }) ==
          ErrorCode::NotSymmetric);
    CHECK(code_of([] { (void)SpdMatrix::from_entries(2, std::vector<double>{1, 0, 1}); }) ==
          ErrorCode::DimensionMismatch);
}

TEST_CASE("weighted norms by hand") {
    const Vector z{3.0, -4.0};
    const SpdMatrix id = SpdMatrix::identity(2);
    CHECK(q_norm(id, z) == doctest::Approx(5.0));
    CHECK(q_inv_norm(id, z) == doctest::Approx(5.0));
    CHECK(q_norm(SpdMatrix::scalar(1, 4.0), Vector{1.0}) == doctest::Approx(2.0));
    CHECK(q_inv_norm(SpdMatrix::scalar(1, 4.0), Vector{1.0}) == doctest::Approx(0.5));
    CHECK(q_inv_norm(SpdMatrix::scalar(1, 0.25), Vector{1.0}) == doctest::Approx(2.0));
}

TEST_CASE("eigen decomposition of diagonal and identity") {
    Matrix d(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    const SymmetricEigen e = eig_sym(d);
    CHECK(e.values[0] == doctest::Approx(1.0));
    CHECK(e.values[1] == doctest::Approx(3.0));
    CHECK(std::abs(e.vectors(1, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(0, 1)) == doctest::Approx(1.0));
    for (double v : eig_sym(Matrix::identity(4)).values) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("property: Cauchy-Schwarz, Young and polarization for random SPD Q") {
    Draw draw(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 5);
        const SpdMatrix q = SpdMatrix::from_matrix(draw.spd(n));
        const Vector x = draw.vector(n), y = draw.vector(n);
        const double qxy = dot(x, q.apply(y));
        const double nx = q.norm(x), ny = q.norm(y);
        CHECK(std::abs(qxy) <= nx * ny * (1 + 1e-12) + 1e-14);
        CHECK(qxy <= 0.5 * (nx * nx + ny * ny) + 1e-12);
        // <x, y> <= |x|_Q |y|_{Q^-1}
        CHECK(std::abs(dot(x, y)) <= nx * q.inv_norm(y) * (1 + 1e-12) + 1e-14);
        const double pol = 0.25 * (q.norm_sq(axpy(1.0, x, y)) - q.norm_sq(axpy(-1.0, y, x)));
        CHECK(pol == doctest::Approx(qxy).epsilon(1e-10).scale(1.0));
        CHECK(norm2(q.sqrt_apply(x)) == doctest::Approx(nx).epsilon(1e-10));
        CHECK(q.inv_norm_sq(q.apply(x)) == doctest::Approx(q.norm_sq(x)).epsilon(1e-9));
        CHECK(q.factorization_error() < 1e-12);
    }
}

TEST_CASE("property: Jacobi eigenpairs reconstruct and are orthonormal") {
    Draw draw(12);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 6);
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) m(i, j) = m(j, i) = draw.uniform(-2, 2);
        const SymmetricEigen e = eig_sym(m);
        Matrix lam(n, n);
        for (std::size_t k = 0; k < n; ++k) lam(k, k) = e.values[k];
        CHECK((e.vectors * lam * e.vectors.transposed() - m).max_abs() < 1e-12 * (1 + m.max_abs()));
        CHECK((e.vectors.transposed() * e.vectors - Matrix::identity(n)).max_abs() < 1e-12);
        for (std::size_t k = 1; k < n; ++k) CHECK(e.values[k - 1] <= e.values[k]);
    }
}

TEST_CASE("banded Cholesky agrees with the dense solve") {
    Draw draw(13);
    const std::size_t n = 30, kd = 3;
    BandedSpd band(n, kd);
    Matrix dense(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        band.add(i, i, 4.0 * kd);
        dense(i, i) += 4.0 * kd;
        for (std::size_t j = (i >= kd ? i - kd : 0); j < i; ++j) {
            const double v = draw.uniform(-1, 1);
            band.add(i, j, v);
            dense(i, j) += v;
            dense(j, i) += v;
        }
    }
    const Vector rhs = draw.vector(n);
    const Vector x_dense = solve_dense(dense, rhs);
    const Vector mx = band.multiply(x_dense);
    CHECK(norm_inf(sub(mx, rhs)) < 1e-12);
    REQUIRE(band.factor());
    CHECK(norm_inf(sub(band.solve(rhs), x_dense)) < 1e-12);
}

TEST_CASE("banded factor rejects an indefinite matrix") {
    BandedSpd band(3, 1);
    band.add(0, 0, 1.0);
    band.add(1, 1, 1.0);
    band.add(2, 2, 1.0);
    band.add(1, 0, 2.0);
    CHECK_FALSE(band.factor());
}
