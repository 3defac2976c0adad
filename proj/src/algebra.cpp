#include "bvlab/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bvlab/error.hpp"

namespace bvlab {

namespace {

constexpr double kSymmetryTol = 1e-12;

void require_same(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + " (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    require_same(a.size(), b.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

Vector axpy(double alpha, std::span<const double> x, std::span<const double> y) {
    require_same(x.size(), y.size(), "axpy");
    Vector out(y.begin(), y.end());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
    return out;
}

Vector sub(std::span<const double> a, std::span<const double> b) {
    require_same(a.size(), b.size(), "sub");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector scaled(double alpha, std::span<const double> x) {
    Vector out(x.begin(), x.end());
    for (double& v : out) v *= alpha;
    return out;
}

double distance(std::span<const double> a, std::span<const double> b) {
    require_same(a.size(), b.size(), "distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::size_t rows, std::size_t cols, std::span<const double> entries) {
    require_same(entries.size(), rows * cols, "matrix entries");
    Matrix m(rows, cols);
    std::copy(entries.begin(), entries.end(), m.data_.begin());
    return m;
}

Vector Matrix::apply(std::span<const double> x) const {
    require_same(x.size(), cols_, "matrix-vector product");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::operator*(const Matrix& other) const {
    require_same(cols_, other.rows_, "matrix product");
    Matrix out(rows_, other.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < other.cols_; ++j) out(i, j) += a * other(k, j);
        }
    return out;
}

Matrix Matrix::operator+(const Matrix& other) const {
    require_same(rows_, other.rows_, "matrix sum rows");
    require_same(cols_, other.cols_, "matrix sum cols");
    Matrix out = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += other.data_[i];
    return out;
}

Matrix Matrix::operator-(const Matrix& other) const {
    require_same(rows_, other.rows_, "matrix difference rows");
    require_same(cols_, other.cols_, "matrix difference cols");
    Matrix out = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= other.data_[i];
    return out;
}

Matrix Matrix::operator*(double s) const {
    Matrix out = *this;
    for (double& v : out.data_) v *= s;
    return out;
}

double Matrix::max_abs() const { return norm_inf(data_); }

double Matrix::asymmetry() const {
    if (rows_ != cols_) return INFINITY;
    const double scale = max_abs();
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i + 1; j < cols_; ++j)
            worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
    return worst / scale;
}

SymmetricEigen eig_sym(const Matrix& input, int max_sweeps) {
    if (input.rows() != input.cols()) throw Error(ErrorCode::DimensionMismatch, "eig_sym needs a square matrix");
    if (input.asymmetry() > kSymmetryTol) throw Error(ErrorCode::NotSymmetric, "eig_sym input");

    const std::size_t n = input.rows();
    Matrix a = input;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
    Matrix v = Matrix::identity(n);

    const double scale = std::max(a.max_abs(), 1e-300);
    bool converged = n <= 1;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(off) <= 1e-15 * scale) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(off) > 1e-13 * scale) throw Error(ErrorCode::NoConvergence, "Jacobi sweep cap reached");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

SpdMatrix SpdMatrix::from_entries(std::size_t dim, std::span<const double> entries) {
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "SPD matrix of dimension 0");
    return from_matrix(Matrix::from_rows(dim, dim, entries));
}

SpdMatrix SpdMatrix::from_matrix(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) throw Error(ErrorCode::DimensionMismatch, "SPD matrix must be square");
    if (m.asymmetry() > kSymmetryTol) throw Error(ErrorCode::NotSymmetric, "entries are not symmetric");
    const std::size_t n = m.rows();

    SpdMatrix q;
    q.matrix_ = m;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) q.matrix_(i, j) = q.matrix_(j, i) = 0.5 * (m(i, j) + m(j, i));

    q.eigen_ = eig_sym(q.matrix_);
    if (!(q.eigen_.values.front() > 0.0)) {
        throw Error(ErrorCode::NotPositiveDefinite,
                    "smallest eigenvalue " + std::to_string(q.eigen_.values.front()));
    }

    q.cholesky_ = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = q.matrix_(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= q.cholesky_(j, k) * q.cholesky_(j, k);
        if (!(d > 0.0)) throw Error(ErrorCode::NotPositiveDefinite, "Cholesky pivot is not positive");
        const double ljj = std::sqrt(d);
        q.cholesky_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = q.matrix_(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= q.cholesky_(i, k) * q.cholesky_(j, k);
            q.cholesky_(i, j) = s / ljj;
        }
    }
    return q;
}

SpdMatrix SpdMatrix::identity(std::size_t dim) { return from_matrix(Matrix::identity(dim)); }

SpdMatrix SpdMatrix::scalar(std::size_t dim, double value) { return from_matrix(Matrix::identity(dim) * value); }

Vector SpdMatrix::apply(std::span<const double> z) const { return matrix_.apply(z); }

Vector SpdMatrix::solve(std::span<const double> z) const {
    const std::size_t n = dim();
    require_same(z.size(), n, "SPD solve");
    Vector y(z.begin(), z.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= cholesky_(i, k) * y[k];
        y[i] /= cholesky_(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) y[ii] -= cholesky_(k, ii) * y[k];
        y[ii] /= cholesky_(ii, ii);
    }
    return y;
}

Vector SpdMatrix::sqrt_apply(std::span<const double> z) const {
    const std::size_t n = dim();
    require_same(z.size(), n, "SPD square root");
    Vector coeff(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += eigen_.vectors(i, k) * z[i];
        coeff[k] = std::sqrt(eigen_.values[k]) * s;
    }
    Vector out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) out[i] += eigen_.vectors(i, k) * coeff[k];
    return out;
}

Matrix SpdMatrix::inverse() const {
    const std::size_t n = dim();
    Matrix inv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vector e(n, 0.0);
        e[j] = 1.0;
        const Vector col = solve(e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

double SpdMatrix::norm_sq(std::span<const double> z) const {
    require_same(z.size(), dim(), "q_norm");
    return std::max(0.0, dot(z, apply(z)));
}

double SpdMatrix::inv_norm_sq(std::span<const double> z) const {
    require_same(z.size(), dim(), "q_inv_norm");
    return std::max(0.0, dot(z, solve(z)));
}

double SpdMatrix::norm(std::span<const double> z) const { return std::sqrt(norm_sq(z)); }

double SpdMatrix::inv_norm(std::span<const double> z) const { return std::sqrt(inv_norm_sq(z)); }

double SpdMatrix::factorization_error() const {
    const std::size_t n = dim();
    const Matrix llt = cholesky_ * cholesky_.transposed();
    Matrix diag(n, n);
    for (std::size_t k = 0; k < n; ++k) diag(k, k) = eigen_.values[k];
    const Matrix vdv = eigen_.vectors * diag * eigen_.vectors.transposed();
    const double scale = matrix_.max_abs();
    return std::max((llt - matrix_).max_abs(), (vdv - matrix_).max_abs()) / scale;
}

Vector solve_dense(Matrix m, Vector rhs) {
    const std::size_t n = m.rows();
    require_same(m.cols(), n, "dense solve needs a square matrix");
    require_same(rhs.size(), n, "dense solve rhs");
    const double scale = std::max(m.max_abs(), 1e-300);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
        if (std::abs(m(piv, col)) <= 1e-14 * scale) throw Error(ErrorCode::NoConvergence, "singular dense system");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(piv, j), m(col, j));
            std::swap(rhs[piv], rhs[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m(r, col) / m(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) m(r, j) -= f * m(col, j);
            rhs[r] -= f * rhs[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= m(i, j) * rhs[j];
        rhs[i] = s / m(i, i);
    }
    return rhs;
}

double q_norm(const SpdMatrix& q, std::span<const double> z) { return q.norm(z); }

double q_inv_norm(const SpdMatrix& q, std::span<const double> z) { return q.inv_norm(z); }

BandedSpd::BandedSpd(std::size_t n, std::size_t kd) : n_(n), kd_(kd), band_(n * (kd + 1), 0.0) {}

void BandedSpd::add(std::size_t i, std::size_t j, double value) {
    if (i < j) std::swap(i, j);
    if (i - j > kd_) throw Error(ErrorCode::OutOfRange, "entry outside the band");
    at(i, i - j) += value;
}

double BandedSpd::get(std::size_t i, std::size_t j) const {
    if (i < j) std::swap(i, j);
    if (i - j > kd_) return 0.0;
    return at(i, i - j);
}

void BandedSpd::add_diagonal(std::span<const double> d, double scale) {
    require_same(d.size(), n_, "banded diagonal");
    for (std::size_t i = 0; i < n_; ++i) at(i, 0) += scale * d[i];
}

bool BandedSpd::factor() {
    for (std::size_t j = 0; j < n_; ++j) {
        const std::size_t k0 = j > kd_ ? j - kd_ : 0;
        double d = at(j, 0);
        for (std::size_t k = k0; k < j; ++k) d -= at(j, j - k) * at(j, j - k);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        at(j, 0) = ljj;
        const std::size_t iend = std::min(n_, j + kd_ + 1);
        for (std::size_t i = j + 1; i < iend; ++i) {
            double s = at(i, i - j);
            const std::size_t kk0 = i > kd_ ? i - kd_ : 0;
            for (std::size_t k = std::max(k0, kk0); k < j; ++k) s -= at(i, i - k) * at(j, j - k);
            at(i, i - j) = s / ljj;
        }
    }
    factored_ = true;
    return true;
}

Vector BandedSpd::solve(std::span<const double> rhs) const {
    if (!factored_) throw Error(ErrorCode::OutOfRange, "banded solve before factorization");
    require_same(rhs.size(), n_, "banded solve");
    Vector y(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t k0 = i > kd_ ? i - kd_ : 0;
        for (std::size_t k = k0; k < i; ++k) y[i] -= at(i, i - k) * y[k];
        y[i] /= at(i, 0);
    }
    for (std::size_t ii = n_; ii-- > 0;) {
        const std::size_t kend = std::min(n_, ii + kd_ + 1);
        for (std::size_t k = ii + 1; k < kend; ++k) y[ii] -= at(k, k - ii) * y[k];
        y[ii] /= at(ii, 0);
    }
    return y;
}

Vector BandedSpd::multiply(std::span<const double> x) const {
    require_same(x.size(), n_, "banded multiply");
    Vector y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        y[i] += at(i, 0) * x[i];
        const std::size_t k0 = i > kd_ ? i - kd_ : 0;
        for (std::size_t k = k0; k < i; ++k) {
            y[i] += at(i, i - k) * x[k];
            y[k] += at(i, i - k) * x[i];
        }
    }
    return y;
}

}  // namespace bvlab
