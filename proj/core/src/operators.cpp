#include "tbrk/operators.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace tbrk {

namespace {

bool all_real(const Vector& v) {
    for (Index i = 0; i < v.size(); ++i) {
        if (v(i).imag() != 0.0) return false;
    }
    return true;
}

/// Partial-pivot LU of a tridiagonal matrix, LAPACK gttrf style.
/// Bands: sub(i) sits at (i+1, i), diag(i) at (i, i), sup(i) at (i, i+1).
struct TridiagLU {
    Vector dl, d, du, du2;
    std::vector<bool> swapped;

    TridiagLU(Vector sub, Vector diag, Vector sup)
        : dl(std::move(sub)), d(std::move(diag)), du(std::move(sup)) {
        const Index n = d.size();
        du2 = Vector::Zero(std::max<Index>(n - 2, 0));
        swapped.assign(static_cast<size_t>(std::max<Index>(n - 1, 0)), false);
        for (Index i = 0; i + 1 < n; ++i) {
            if (std::abs(d(i)) >= std::abs(dl(i))) {
                if (std::abs(d(i)) != 0.0) {
                    const Complex fact = dl(i) / d(i);
                    dl(i) = fact;
                    d(i + 1) -= fact * du(i);
                } else {
                    dl(i) = Complex(0.0);
                }
                if (i + 2 < n) du2(i) = Complex(0.0);
            } else {
                swapped[static_cast<size_t>(i)] = true;
                const Complex fact = d(i) / dl(i);
                d(i) = dl(i);
                dl(i) = fact;
                const Complex tmp = du(i);
                du(i) = d(i + 1);
                d(i + 1) = tmp - fact * d(i + 1);
                if (i + 2 < n) {
                    du2(i) = du(i + 1);
                    du(i + 1) = -fact * du(i + 1);
                }
            }
        }
        double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < n; ++i) {
            const double a = std::abs(d(i));
            dmax = std::max(dmax, a);
            dmin = std::min(dmin, a);
        }
        if (dmax == 0.0 || dmin <= 1e-14 * dmax) {
            throw SingularMatrix("tridiagonal solve: pivot below relative threshold");
        }
    }

    void solve_in_place(Eigen::Ref<Vector> b) const {
        const Index n = d.size();
        for (Index i = 0; i + 1 < n; ++i) {
            if (swapped[static_cast<size_t>(i)]) std::swap(b(i), b(i + 1));
            b(i + 1) -= dl(i) * b(i);
        }
        b(n - 1) /= d(n - 1);
        if (n >= 2) b(n - 2) = (b(n - 2) - du(n - 2) * b(n - 1)) / d(n - 2);
        for (Index i = n - 3; i >= 0; --i) {
            b(i) = (b(i) - du(i) * b(i + 1) - du2(i) * b(i + 2)) / d(i);
        }
    }
};

}  // namespace

TridiagOperator::TridiagOperator(Vector sub, Vector diag, Vector sup)
    : sub_(std::move(sub)), diag_(std::move(diag)), sup_(std::move(sup)) {
    const Index n = diag_.size();
    if (n < 1 || sub_.size() != n - 1 || sup_.size() != n - 1) {
        throw DimensionMismatch("TridiagOperator: band lengths must be n-1, n, n-1");
    }
    real_ = all_real(sub_) && all_real(diag_) && all_real(sup_);
    hermitian_ = true;
    for (Index i = 0; i + 1 < n; ++i) {
        if (std::abs(sub_(i) - std::conj(sup_(i))) >
            1e-14 * (std::abs(sub_(i)) + std::abs(sup_(i)) + 1e-300)) {
            hermitian_ = false;
            break;
        }
    }
    if (hermitian_) {
        for (Index i = 0; i < n; ++i) {
            if (diag_(i).imag() != 0.0) {
                hermitian_ = false;
                break;
            }
        }
    }
}

Matrix TridiagOperator::apply(const Matrix& x) const {
    const Index n = dim();
    if (x.rows() != n) throw DimensionMismatch("TridiagOperator::apply: row mismatch");
    Matrix y(n, x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        y(0, j) = diag_(0) * x(0, j);
        if (n > 1) y(0, j) += sup_(0) * x(1, j);
        for (Index i = 1; i + 1 < n; ++i) {
            y(i, j) = sub_(i - 1) * x(i - 1, j) + diag_(i) * x(i, j) + sup_(i) * x(i + 1, j);
        }
        if (n > 1) {
            y(n - 1, j) = sub_(n - 2) * x(n - 2, j) + diag_(n - 1) * x(n - 1, j);
        }
    }
    return y;
}

Matrix TridiagOperator::solve_shifted(Complex alpha, Complex beta, const Matrix& b) const {
    if (b.rows() != dim()) throw DimensionMismatch("TridiagOperator::solve_shifted");
    TridiagLU lu(beta * sub_, (alpha + beta * diag_.array()).matrix(), beta * sup_);
    Matrix x = b;
    for (Index j = 0; j < x.cols(); ++j) lu.solve_in_place(x.col(j));
    return x;
}

double TridiagOperator::norm_est() const {
    return std::sqrt(sub_.squaredNorm() + diag_.squaredNorm() + sup_.squaredNorm());
}

Matrix TridiagOperator::dense(Index element_budget) const {
    const Index n = dim();
    if (n * n > element_budget) {
        throw SizeOverflow("TridiagOperator::dense exceeds element budget");
    }
    Matrix a = Matrix::Zero(n, n);
    a.diagonal() = diag_;
    if (n > 1) {
        a.diagonal(-1) = sub_;
        a.diagonal(1) = sup_;
    }
    return a;
}

bool TridiagOperator::structurally_equal(const LinearOperator& other) const {
    if (this == &other) return true;
    const auto* o = dynamic_cast<const TridiagOperator*>(&other);
    if (o == nullptr || o->dim() != dim()) return false;
    return (sub_.array() == o->sub_.array()).all() &&
           (diag_.array() == o->diag_.array()).all() &&
           (sup_.array() == o->sup_.array()).all();
}

DenseOperator::DenseOperator(Matrix a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) {
        throw DimensionMismatch("DenseOperator: matrix must be square");
    }
    real_ = true;
    for (Index j = 0; j < a_.cols() && real_; ++j) {
        for (Index i = 0; i < a_.rows(); ++i) {
            if (a_(i, j).imag() != 0.0) {
                real_ = false;
                break;
            }
        }
    }
    const double scale = a_.norm();
    hermitian_ = scale == 0.0 || (a_ - a_.adjoint()).norm() <= 1e-14 * scale;
}

Matrix DenseOperator::solve_shifted(Complex alpha, Complex beta, const Matrix& b) const {
    if (b.rows() != dim()) throw DimensionMismatch("DenseOperator::solve_shifted");
    Matrix shifted = beta * a_;
    shifted.diagonal().array() += alpha;
    Eigen::PartialPivLU<Matrix> lu(shifted);
    const auto diag = lu.matrixLU().diagonal();
    double max_piv = 0.0, min_piv = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < diag.size(); ++i) {
        const double p = std::abs(diag(i));
        max_piv = std::max(max_piv, p);
        min_piv = std::min(min_piv, p);
    }
    if (max_piv == 0.0 || min_piv <= 1e-14 * max_piv) {
        throw SingularMatrix("DenseOperator: shifted solve hit a near-zero pivot");
    }
    return lu.solve(b);
}

Matrix DenseOperator::dense(Index element_budget) const {
    if (a_.size() > element_budget) {
        throw SizeOverflow("DenseOperator::dense exceeds element budget");
    }
    return a_;
}

bool DenseOperator::structurally_equal(const LinearOperator& other) const {
    if (this == &other) return true;
    const auto* o = dynamic_cast<const DenseOperator*>(&other);
    return o != nullptr && o->a_.rows() == a_.rows() &&
           (o->a_.array() == a_.array()).all();
}

}  // namespace tbrk
