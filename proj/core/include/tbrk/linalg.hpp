#pragma once

#include <vector>

#include "tbrk/errors.hpp"
#include "tbrk/types.hpp"

namespace tbrk {

struct QrResult {
    Matrix q;  ///< orthonormal columns
    Matrix r;  ///< upper triangular, real nonnegative diagonal
};

/// Thin (economy) QR of an m x n matrix, m >= n. The R factor is
/// normalized to a real nonnegative diagonal, so the factorization is
/// unique for full-rank input. Rank deficiency is not an error here;
/// callers inspect the diagonal of R against their own threshold.
QrResult thin_qr(const Matrix& m);

/// Relative threshold under which a diagonal entry of R signals a
/// numerically dependent column: 1e-12 times the largest column norm.
double qr_deflation_threshold(const Matrix& m);

/// Compact QR for any shape: Q is m x q, R is q x n with q = min(m, n).
/// Same diagonal normalization as thin_qr.
QrResult qr_compact(const Matrix& m);

struct SvdResult {
    Matrix u;
    RealVector s;  ///< singular values, descending
    Matrix v;
};

/// Thin SVD, M = U diag(s) V^H.
SvdResult svd_thin(const Matrix& m);

struct EigResult {
    Vector values;
    Matrix vectors;  ///< columns are right eigenvectors, unit norm
};

/// Dense eigendecomposition. Hermitian inputs take the symmetric path
/// (real eigenvalues, orthonormal vectors); anything else goes through
/// the complex Schur form. Throws NonConvergence if the QR sweeps fail.
EigResult eig_dense(const Matrix& m);

bool is_hermitian(const Matrix& m, double tol = 1e-13);

/// Solve A X = B for square nonsingular A by partial-pivot LU.
/// Throws SingularMatrix when a pivot falls below 1e-14 of the largest.
Matrix solve_dense(const Matrix& a, const Matrix& b);

/// Convex polygon in the complex plane. Vertices are counterclockwise,
/// starting from the lexicographically smallest (re, then im); no three
/// consecutive vertices are collinear. Degenerate sets are represented
/// with one vertex (point) or two (segment).
struct ComplexPolygon {
    std::vector<Complex> vertices;

    bool is_point() const { return vertices.size() == 1; }
    bool is_segment() const { return vertices.size() == 2; }
    double diameter() const;
    double perimeter() const;
    /// Signed-area containment test; tol is an absolute slack on the
    /// cross products (callers scale it by diameter^2).
    bool contains(Complex p, double tol) const;
};

/// Minimal convex polygon containing the given nonempty point set.
ComplexPolygon convex_hull(std::vector<Complex> points);

/// Minkowski sum of convex polygons: the hull of all pairwise vertex sums,
/// folded over the list.
ComplexPolygon minkowski_sum(const std::vector<ComplexPolygon>& hulls);

/// Apply (F_d x ... x F_1) to v without forming the Kronecker product.
/// factors are listed mode-first (F_1, ..., F_d) and v has length
/// prod(cols(F_i)) with the first mode's index fastest.
Vector kron_apply(const std::vector<Matrix>& factors, const Vector& v);

/// Dense Kronecker product B x A (small sizes; oracles and tests).
Matrix kron_dense(const Matrix& b, const Matrix& a);

}  // namespace tbrk
