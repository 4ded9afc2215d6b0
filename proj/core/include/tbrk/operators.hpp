#pragma once

#include <memory>

#include "tbrk/errors.hpp"
#include "tbrk/types.hpp"

namespace tbrk {

/// Square operator supplied through an apply / shifted-solve interface.
/// Shifted solves compute (alpha*I + beta*A)^{-1} B, which covers the
/// rational Arnoldi steps (I - A/xi)^{-1} and plain inverses A^{-1}.
class LinearOperator {
public:
    virtual ~LinearOperator() = default;

    virtual Index dim() const = 0;
    virtual Matrix apply(const Matrix& x) const = 0;
    virtual Matrix solve_shifted(Complex alpha, Complex beta, const Matrix& b) const = 0;

    Matrix solve(const Matrix& b) const { return solve_shifted(Complex(0.0), Complex(1.0), b); }

    virtual bool is_real() const = 0;
    virtual bool is_hermitian() const = 0;
    virtual double norm_est() const = 0;

    /// Dense materialization for oracles; throws SizeOverflow past budget.
    virtual Matrix dense(Index element_budget) const = 0;

    /// True when the two operators represent the same matrix (used to share
    /// Krylov bases between modes with identical coefficients).
    virtual bool structurally_equal(const LinearOperator& other) const {
        return this == &other;
    }
};

/// Tridiagonal operator with O(n) apply and O(n) shifted solves
/// (partial-pivot LU on the three bands).
class TridiagOperator final : public LinearOperator {
public:
    TridiagOperator(Vector sub, Vector diag, Vector sup);

    Index dim() const override { return diag_.size(); }
    Matrix apply(const Matrix& x) const override;
    Matrix solve_shifted(Complex alpha, Complex beta, const Matrix& b) const override;
    bool is_real() const override { return real_; }
    bool is_hermitian() const override { return hermitian_; }
    double norm_est() const override;
    Matrix dense(Index element_budget) const override;
    bool structurally_equal(const LinearOperator& other) const override;

    const Vector& sub() const { return sub_; }
    const Vector& diag() const { return diag_; }
    const Vector& sup() const { return sup_; }

private:
    Vector sub_, diag_, sup_;
    bool real_ = false;
    bool hermitian_ = false;
};

/// Dense fallback operator for custom problems.
class DenseOperator final : public LinearOperator {
public:
    explicit DenseOperator(Matrix a);

    Index dim() const override { return a_.rows(); }
    Matrix apply(const Matrix& x) const override { return a_ * x; }
    Matrix solve_shifted(Complex alpha, Complex beta, const Matrix& b) const override;
    bool is_real() const override { return real_; }
    bool is_hermitian() const override { return hermitian_; }
    double norm_est() const override { return a_.norm(); }
    Matrix dense(Index element_budget) const override;
    bool structurally_equal(const LinearOperator& other) const override;

    const Matrix& matrix() const { return a_; }

private:
    Matrix a_;
    bool real_ = false;
    bool hermitian_ = false;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

}  // namespace tbrk
