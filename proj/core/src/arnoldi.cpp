#include "tbrk/arnoldi.hpp"

#include <cmath>

namespace tbrk {

bool operator==(const Pole& a, const Pole& b) {
    if (a.infinite || b.infinite) return a.infinite == b.infinite;
    return a.value == b.value;
}

BlockKrylovBasis arnoldi_init(const LinearOperator& a, const Matrix& c) {
    if (c.rows() != a.dim()) {
        throw DimensionMismatch("arnoldi_init: block vector rows must match operator");
    }
    if (c.cols() < 1 || c.cols() > c.rows()) {
        throw DimensionMismatch("arnoldi_init: invalid block size");
    }
    const double thresh = qr_deflation_threshold(c);
    auto qr = thin_qr(c);
    for (Index i = 0; i < qr.r.rows(); ++i) {
        if (std::abs(qr.r(i, i)) < thresh) {
            throw DeflationError("arnoldi_init: starting block is rank deficient");
        }
    }
    BlockKrylovBasis basis;
    basis.v = std::move(qr.q);
    basis.block_size = c.cols();
    basis.h_under = Matrix::Zero(c.cols(), 0);
    basis.k_under = Matrix::Zero(c.cols(), 0);
    basis.poles = {Pole::inf()};
    return basis;
}

BlockKrylovBasis arnoldi_expand(const BlockKrylovBasis& basis, const LinearOperator& a,
                                const Pole& xi) {
    const Index b = basis.block_size;
    const Index n = basis.dim();
    const Index cols = basis.v.cols();
    if (cols + b > n) {
        throw DeflationError("arnoldi_expand: space is full, mode saturated");
    }

    const Matrix v_last = basis.v.rightCols(b);
    Matrix w;
    if (xi.infinite) {
        w = a.apply(v_last);
    } else if (xi.is_zero()) {
        w = a.solve(v_last);
    } else {
        const Matrix av = a.apply(v_last);
        w = a.solve_shifted(Complex(1.0), -1.0 / xi.value, av);
    }
    const double candidate_scale = qr_deflation_threshold(w);

    // Classical block Gram-Schmidt with one reorthogonalization pass.
    Matrix coeff = basis.v.adjoint() * w;
    w.noalias() -= basis.v * coeff;
    Matrix coeff2 = basis.v.adjoint() * w;
    w.noalias() -= basis.v * coeff2;
    coeff += coeff2;

    auto qr = thin_qr(w);
    for (Index i = 0; i < b; ++i) {
        if (std::abs(qr.r(i, i)) < candidate_scale) {
            throw DeflationError("arnoldi_expand: new block numerically in current span");
        }
    }

    const Index k_old = basis.steps();
    BlockKrylovBasis out;
    out.block_size = b;
    out.poles = basis.poles;
    out.poles.push_back(xi);

    out.v.resize(n, cols + b);
    out.v << basis.v, qr.q;

    // Full new-column coefficients of w in the extended basis.
    Matrix c_full = Matrix::Zero(cols + b, b);
    c_full.topRows(cols) = coeff;
    c_full.bottomRows(b) = qr.r;

    // Unit column-block selecting the previous last block.
    Matrix e_last = Matrix::Zero(cols + b, b);
    e_last.block(cols - b, 0, b, b) = Matrix::Identity(b, b);

    out.h_under = Matrix::Zero(cols + b, (k_old + 1) * b);
    out.k_under = Matrix::Zero(cols + b, (k_old + 1) * b);
    out.h_under.topLeftCorner(cols, k_old * b) = basis.h_under;
    out.k_under.topLeftCorner(cols, k_old * b) = basis.k_under;

    if (xi.infinite) {
        // A v_last = V c  =>  K col = e_last, H col = c.
        out.h_under.rightCols(b) = c_full;
        out.k_under.rightCols(b) = e_last;
    } else if (xi.is_zero()) {
        // A^{-1} v_last = V c  =>  A V c = v_last.
        out.h_under.rightCols(b) = e_last;
        out.k_under.rightCols(b) = c_full;
    } else {
        // (I - A/xi)^{-1} A v_last = V c  =>  A (v_last + V c / xi) = V c.
        out.h_under.rightCols(b) = c_full;
        out.k_under.rightCols(b) = e_last + c_full / xi.value;
    }
    return out;
}

BlockKrylovBasis ensure_trailing_infinity(const BlockKrylovBasis& basis,
                                          const LinearOperator& a) {
    if (!basis.poles.empty() && basis.poles.back().infinite) {
        return basis;
    }
    return arnoldi_expand(basis, a, Pole::inf());
}

Matrix projected_matrix(const BlockKrylovBasis& basis, const LinearOperator& a) {
    if (basis.steps() < 1) {
        throw PreconditionViolation("projected_matrix: basis needs at least one step");
    }
    const Matrix vk = basis.galerkin_basis();
    Matrix p = vk.adjoint() * a.apply(vk);
    if (a.is_hermitian()) {
        p = 0.5 * (p + p.adjoint()).eval();
    }
    return p;
}

Pole ConjugatePairScheduler::next(const Pole& requested) {
    if (pending_.has_value()) {
        const Pole forced = Pole::finite(*pending_);
        pending_.reset();
        return forced;
    }
    if (!requested.infinite &&
        std::abs(requested.value.imag()) > 1e-14 * std::abs(requested.value)) {
        pending_ = std::conj(requested.value);
    }
    return requested;
}

}  // namespace tbrk
