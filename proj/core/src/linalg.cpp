#include "tbrk/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

namespace tbrk {

QrResult thin_qr(const Matrix& m) {
    if (m.rows() < m.cols()) {
        throw DimensionMismatch("thin_qr: need rows >= cols");
    }
    const Index n = m.cols();
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), n);
    Matrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    // Normalize to a real nonnegative diagonal of R.
    for (Index j = 0; j < n; ++j) {
        const Complex d = r(j, j);
        const double a = std::abs(d);
        if (a > 0.0) {
            const Complex phase = d / a;
            r.row(j) *= std::conj(phase);
            q.col(j) *= phase;
        }
    }
    return {std::move(q), std::move(r)};
}

QrResult qr_compact(const Matrix& m) {
    const Index q = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix qm = qr.householderQ() * Matrix::Identity(m.rows(), q);
    Matrix r = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
    for (Index j = 0; j < q; ++j) {
        const Complex d = r(j, j);
        const double a = std::abs(d);
        if (a > 0.0) {
            const Complex phase = d / a;
            r.row(j) *= std::conj(phase);
            qm.col(j) *= phase;
        }
    }
    return {std::move(qm), std::move(r)};
}

SvdResult svd_thin(const Matrix& m) {
    if (std::min(m.rows(), m.cols()) <= 16) {
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
    }
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

double qr_deflation_threshold(const Matrix& m) {
    double max_col = 0.0;
    for (Index j = 0; j < m.cols(); ++j) {
        max_col = std::max(max_col, m.col(j).norm());
    }
    return 1e-12 * max_col;
}

bool is_hermitian(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = m.norm();
    if (scale == 0.0) return true;
    return (m - m.adjoint()).norm() <= tol * scale;
}

EigResult eig_dense(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch("eig_dense: matrix must be square");
    }
    if (is_hermitian(m)) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
        if (es.info() != Eigen::Success) {
            throw NonConvergence("eig_dense: tridiagonal QL sweep budget exceeded");
        }
        return {es.eigenvalues().cast<Complex>(), es.eigenvectors()};
    }
    Eigen::ComplexEigenSolver<Matrix> es(m, /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success) {
        throw NonConvergence("eig_dense: Schur iteration budget exceeded");
    }
    return {es.eigenvalues(), es.eigenvectors()};
}

Matrix solve_dense(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols()) {
        throw DimensionMismatch("solve_dense: matrix must be square");
    }
    if (a.rows() != b.rows()) {
        throw DimensionMismatch("solve_dense: rhs row count mismatch");
    }
    Eigen::PartialPivLU<Matrix> lu(a);
    const auto diag = lu.matrixLU().diagonal();
    double max_piv = 0.0, min_piv = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < diag.size(); ++i) {
        const double p = std::abs(diag(i));
        max_piv = std::max(max_piv, p);
        min_piv = std::min(min_piv, p);
    }
    if (max_piv == 0.0 || min_piv <= 1e-14 * max_piv) {
        throw SingularMatrix("solve_dense: pivot below relative threshold");
    }
    return lu.solve(b);
}

namespace {

double cross(Complex o, Complex a, Complex b) {
    return (a.real() - o.real()) * (b.imag() - o.imag()) -
           (a.imag() - o.imag()) * (b.real() - o.real());
}

bool lex_less(Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

}  // namespace

double ComplexPolygon::diameter() const {
    double d = 0.0;
    for (size_t i = 0; i < vertices.size(); ++i) {
        for (size_t j = i + 1; j < vertices.size(); ++j) {
            d = std::max(d, std::abs(vertices[i] - vertices[j]));
        }
    }
    return d;
}

double ComplexPolygon::perimeter() const {
    if (vertices.size() < 2) return 0.0;
    double p = 0.0;
    for (size_t i = 0; i < vertices.size(); ++i) {
        p += std::abs(vertices[(i + 1) % vertices.size()] - vertices[i]);
    }
    return p;
}

bool ComplexPolygon::contains(Complex p, double tol) const {
    if (vertices.empty()) return false;
    if (vertices.size() == 1) {
        return std::abs(p - vertices[0]) <= std::sqrt(std::max(tol, 0.0)) + 1e-14;
    }
    if (vertices.size() == 2) {
        const Complex a = vertices[0], b = vertices[1];
        if (std::abs(cross(a, b, p)) > tol + 1e-300) return false;
        const Complex d = b - a;
        const double len2 = std::norm(d);
        const double t = ((p - a).real() * d.real() + (p - a).imag() * d.imag()) / len2;
        return t >= -1e-12 && t <= 1.0 + 1e-12;
    }
    for (size_t i = 0; i < vertices.size(); ++i) {
        const Complex a = vertices[i];
        const Complex b = vertices[(i + 1) % vertices.size()];
        if (cross(a, b, p) < -tol) return false;
    }
    return true;
}

ComplexPolygon convex_hull(std::vector<Complex> points) {
    if (points.empty()) {
        throw DimensionMismatch("convex_hull: empty point set");
    }
    std::sort(points.begin(), points.end(), lex_less);
    points.erase(std::unique(points.begin(), points.end()), points.end());

    double scale = 0.0;
    for (const Complex& p : points) {
        scale = std::max({scale, std::abs(p.real() - points.front().real()),
                          std::abs(p.imag() - points.front().imag())});
    }
    const double eps = 1e-13 * scale * scale;

    if (points.size() == 1) return {points};

    std::vector<Complex> hull(2 * points.size());
    size_t k = 0;
    // lower chain
    for (const Complex& p : points) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= eps) --k;
        hull[k++] = p;
    }
    // upper chain
    const size_t lower = k + 1;
    for (auto it = points.rbegin() + 1; it != points.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= eps) --k;
        hull[k++] = *it;
    }
    hull.resize(k - 1);  // last point equals the first
    if (hull.size() > 2 && std::abs(hull.front() - hull.back()) == 0.0) {
        hull.pop_back();
    }
    return {std::move(hull)};
}

ComplexPolygon minkowski_sum(const std::vector<ComplexPolygon>& hulls) {
    if (hulls.empty()) {
        throw DimensionMismatch("minkowski_sum: empty hull list");
    }
    std::vector<Complex> acc = hulls.front().vertices;
    for (size_t i = 1; i < hulls.size(); ++i) {
        std::vector<Complex> sums;
        sums.reserve(acc.size() * hulls[i].vertices.size());
        for (const Complex& a : acc) {
            for (const Complex& b : hulls[i].vertices) {
                sums.push_back(a + b);
            }
        }
        acc = convex_hull(std::move(sums)).vertices;
    }
    return convex_hull(std::move(acc));
}

Vector kron_apply(const std::vector<Matrix>& factors, const Vector& v) {
    Index expect = 1;
    for (const Matrix& f : factors) expect *= f.cols();
    if (v.size() != expect) {
        throw DimensionMismatch("kron_apply: vector length != product of factor columns");
    }
    Vector cur = v;
    Index left = 1;
    Index tail = expect;  // product of unprocessed column dims, including current
    for (const Matrix& f : factors) {
        const Index ci = f.cols(), ri = f.rows();
        tail /= ci;
        Vector next(left * ri * tail);
        for (Index r = 0; r < tail; ++r) {
            Eigen::Map<const Matrix> slab(cur.data() + r * left * ci, left, ci);
            Eigen::Map<Matrix> out(next.data() + r * left * ri, left, ri);
            out.noalias() = slab * f.transpose();
        }
        left *= ri;
        cur = std::move(next);
    }
    return cur;
}

Matrix kron_dense(const Matrix& b, const Matrix& a) {
    Matrix out(b.rows() * a.rows(), b.cols() * a.cols());
    for (Index i = 0; i < b.rows(); ++i) {
        for (Index j = 0; j < b.cols(); ++j) {
            out.block(i * a.rows(), j * a.cols(), a.rows(), a.cols()) = b(i, j) * a;
        }
    }
    return out;
}

}  // namespace tbrk
