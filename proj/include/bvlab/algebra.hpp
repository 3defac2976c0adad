#pragma once

// Small dense linear algebra. Dimensions here are tiny (n <= ~10), so
// everything is stored densely and row-major.

#include <cstddef>
#include <span>
#include <vector>

namespace bvlab {

using Vector = std::vector<double>;

[[nodiscard]] double dot(std::span<const double> a, std::span<const double> b);
[[nodiscard]] double norm2(std::span<const double> a);
[[nodiscard]] double norm_inf(std::span<const double> a);
[[nodiscard]] Vector axpy(double alpha, std::span<const double> x, std::span<const double> y);  // alpha*x + y
[[nodiscard]] Vector sub(std::span<const double> a, std::span<const double> b);
[[nodiscard]] Vector scaled(double alpha, std::span<const double> x);
[[nodiscard]] double distance(std::span<const double> a, std::span<const double> b);

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    [[nodiscard]] static Matrix identity(std::size_t n);
    [[nodiscard]] static Matrix from_rows(std::size_t rows, std::size_t cols, std::span<const double> entries);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    [[nodiscard]] Vector apply(std::span<const double> x) const;
    [[nodiscard]] Matrix transposed() const;
    [[nodiscard]] Matrix operator*(const Matrix& other) const;
    [[nodiscard]] Matrix operator+(const Matrix& other) const;
    [[nodiscard]] Matrix operator-(const Matrix& other) const;
    [[nodiscard]] Matrix operator*(double s) const;

    [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }
    [[nodiscard]] double max_abs() const;
    // Largest |a_ij - a_ji| relative to max |a_ij| (0 for the zero matrix).
    [[nodiscard]] double asymmetry() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct SymmetricEigen {
    Vector values;    // ascending
    Matrix vectors;   // column k is the eigenvector of values[k]
};

// Cyclic Jacobi. Throws NotSymmetric for visibly asymmetric input and
// NoConvergence when the sweep cap is hit.
[[nodiscard]] SymmetricEigen eig_sym(const Matrix& m, int max_sweeps = 64);

// Symmetric positive definite operator with cached Cholesky and eigen
// factorizations. Immutable after construction.
class SpdMatrix {
public:
    [[nodiscard]] static SpdMatrix from_entries(std::size_t dim, std::span<const double> entries);
    [[nodiscard]] static SpdMatrix from_matrix(const Matrix& m);
    [[nodiscard]] static SpdMatrix identity(std::size_t dim);
    [[nodiscard]] static SpdMatrix scalar(std::size_t dim, double value);

    [[nodiscard]] std::size_t dim() const noexcept { return matrix_.rows(); }
    [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] const Vector& eigenvalues() const noexcept { return eigen_.values; }
    [[nodiscard]] double coercivity() const { return eigen_.values.front(); }
    [[nodiscard]] double operator_norm() const { return eigen_.values.back(); }

    [[nodiscard]] Vector apply(std::span<const double> z) const;
    [[nodiscard]] Vector solve(std::span<const double> z) const;  // Q^{-1} z via Cholesky
    [[nodiscard]] Vector sqrt_apply(std::span<const double> z) const;  // Q^{1/2} z via eigen
    [[nodiscard]] Matrix inverse() const;

    [[nodiscard]] double norm(std::span<const double> z) const;
    [[nodiscard]] double inv_norm(std::span<const double> z) const;
    [[nodiscard]] double norm_sq(std::span<const double> z) const;
    [[nodiscard]] double inv_norm_sq(std::span<const double> z) const;

    // Largest relative error of L L^T and V diag V^T against the stored matrix.
    [[nodiscard]] double factorization_error() const;

private:
    SpdMatrix() = default;

    Matrix matrix_;
    Matrix cholesky_;  // lower triangular
    SymmetricEigen eigen_;
};

// Dense LU with partial pivoting for the small polynomial-fitting systems.
// Throws NoConvergence when the matrix is numerically singular.
[[nodiscard]] Vector solve_dense(Matrix m, Vector rhs);

[[nodiscard]] double q_norm(const SpdMatrix& q, std::span<const double> z);
[[nodiscard]] double q_inv_norm(const SpdMatrix& q, std::span<const double> z);

// Symmetric banded matrix with half-bandwidth kd, stored by lower diagonals.
// Used for the block-banded Newton systems of the path optimizer.
class BandedSpd {
public:
    BandedSpd(std::size_t n, std::size_t kd);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t bandwidth() const noexcept { return kd_; }

    // Adds to entry (i,j) and its mirror; |i-j| must be <= kd. Only one of
    // (i,j) and (j,i) should be added.
    void add(std::size_t i, std::size_t j, double value);
    [[nodiscard]] double get(std::size_t i, std::size_t j) const;
    void add_diagonal(std::span<const double> d, double scale);

    // In-place Cholesky. Returns false if the matrix is not positive definite.
    [[nodiscard]] bool factor();
    [[nodiscard]] Vector solve(std::span<const double> rhs) const;

    [[nodiscard]] Vector multiply(std::span<const double> x) const;

private:
    [[nodiscard]] double& at(std::size_t i, std::size_t offset) { return band_[i * (kd_ + 1) + offset]; }
    [[nodiscard]] double at(std::size_t i, std::size_t offset) const { return band_[i * (kd_ + 1) + offset]; }

    std::size_t n_;
    std::size_t kd_;
    std::vector<double> band_;  // band_(i, d) = A(i, i-d)
    bool factored_ = false;
};

}  // namespace bvlab
