#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support.hpp"
#include "tbrk/arnoldi.hpp"

using namespace tbrk;
using namespace tbrk::test;

namespace {

std::shared_ptr<TridiagOperator> symmetric_tridiag(Index n) {
    return std::make_shared<TridiagOperator>(Vector::Constant(n - 1, Complex(-1.0)),
                                             Vector::Constant(n, Complex(2.0)),
                                             Vector::Constant(n - 1, Complex(-1.0)));
}

std::shared_ptr<TridiagOperator> diag_operator(const Vector& d) {
    return std::make_shared<TridiagOperator>(Vector::Zero(d.size() - 1), d,
                                             Vector::Zero(d.size() - 1));
}

double pencil_residual(const BlockKrylovBasis& basis, const LinearOperator& a) {
    const Matrix lhs = a.apply(basis.v) * basis.k_under;
    const Matrix rhs = basis.v * basis.h_under;
    const double scale = a.norm_est() * basis.k_under.norm() + 1e-300;
    return (lhs - rhs).norm() / scale;
}

double orthonormality_defect(const BlockKrylovBasis& basis) {
    const Index m = basis.v.cols();
    return (basis.v.adjoint() * basis.v - Matrix::Identity(m, m)).norm();
}

}  // namespace

TEST_CASE("arnoldi_init reproduces an orthonormal starting block") {
    std::mt19937_64 rng(1);
    auto a = symmetric_tridiag(12);
    Matrix c = thin_qr(random_matrix(rng, 12, 3)).q;
    // normalize to positive-diagonal R so the first block equals c exactly
    auto qr = thin_qr(c);
    BlockKrylovBasis basis = arnoldi_init(*a, qr.q);
    CHECK((basis.v - qr.q).norm() <= 1e-13);
    CHECK(basis.poles.size() == 1);
    CHECK(basis.poles[0].infinite);
}

TEST_CASE("arnoldi_init on a unit vector") {
    auto a = symmetric_tridiag(6);
    Matrix c = Matrix::Zero(6, 1);
    c(0, 0) = 1.0;
    BlockKrylovBasis basis = arnoldi_init(*a, c);
    CHECK((basis.v - c).norm() <= 1e-14);
}

TEST_CASE("arnoldi_init spans the starting block") {
    std::mt19937_64 rng(2);
    auto a = std::make_shared<DenseOperator>(random_stable(rng, 20));
    Matrix c = random_matrix(rng, 20, 2);
    BlockKrylovBasis basis = arnoldi_init(*a, c);
    const Matrix proj = basis.v * (basis.v.adjoint() * c);
    CHECK((c - proj).norm() <= 1e-12 * c.norm());
}

TEST_CASE("arnoldi_init rejects rank-deficient blocks") {
    auto a = symmetric_tridiag(8);
    Matrix c(8, 2);
    c.col(0) = Vector::Ones(8);
    c.col(1) = 2.0 * Vector::Ones(8);
    CHECK_THROWS_AS(arnoldi_init(*a, c), DeflationError);
}

TEST_CASE("polynomial expansion keeps the selector pattern in K and a banded H") {
    auto a = symmetric_tridiag(50);
    Matrix c = Matrix::Ones(50, 1);
    BlockKrylovBasis basis = arnoldi_init(*a, c);
    for (int step = 0; step < 5; ++step) {
        basis = arnoldi_expand(basis, *a, Pole::inf());
    }
    CHECK(basis.steps() == 5);
    CHECK(pencil_residual(basis, *a) <= 1e-12);
    CHECK(orthonormality_defect(basis) <= 1e-10);
    // K_under = [I; 0]
    CHECK((basis.k_under.topRows(5) - Matrix::Identity(5, 5)).norm() <= 1e-14);
    CHECK(basis.k_under.bottomRows(1).norm() <= 1e-14);
    // Lanczos three-term structure: H is tridiagonal up to roundoff
    for (Index i = 0; i < basis.h_under.rows(); ++i) {
        for (Index j = 0; j < basis.h_under.cols(); ++j) {
            if (i + 1 < j) {
                CHECK(std::abs(basis.h_under(i, j)) <= 1e-12 * a->norm_est());
            }
        }
    }
}

TEST_CASE("shift-and-invert expansion matches the explicit dense direction") {
    Vector d(10);
    for (Index i = 0; i < 10; ++i) d(i) = Complex(static_cast<double>(i + 1), 0.0);
    auto a = diag_operator(d);
    Matrix c = Matrix::Ones(10, 1);
    BlockKrylovBasis basis = arnoldi_init(*a, c);
    basis = arnoldi_expand(basis, *a, Pole::finite(Complex(2.5)));

    // explicit oracle: w = (I - A/2.5)^{-1} A v0
    Vector v0 = Vector::Constant(10, Complex(1.0 / std::sqrt(10.0)));
    Vector w(10);
    for (Index i = 0; i < 10; ++i) {
        const Complex lam = d(i);
        w(i) = lam * v0(i) / (1.0 - lam / 2.5);
    }
    const Matrix proj = basis.v * (basis.v.adjoint() * w);
    CHECK((w - proj).norm() <= 1e-12 * w.norm());
    CHECK(pencil_residual(basis, *a) <= 1e-12);
}

TEST_CASE("expanding with a pole on the spectrum fails as a singular solve") {
    Vector d(6);
    for (Index i = 0; i < 6; ++i) d(i) = Complex(static_cast<double>(i + 1), 0.0);
    auto a = diag_operator(d);
    BlockKrylovBasis basis = arnoldi_init(*a, Matrix::Ones(6, 1));
    CHECK_THROWS_AS(arnoldi_expand(basis, *a, Pole::finite(Complex(3.0))), SingularMatrix);
}

TEST_CASE("zero poles take inverse steps and keep the pencil") {
    auto a = symmetric_tridiag(24);
    Matrix c = Matrix::Ones(24, 1);
    BlockKrylovBasis basis = arnoldi_init(*a, c);
    basis = arnoldi_expand(basis, *a, Pole::inf());
    basis = arnoldi_expand(basis, *a, Pole::finite(Complex(0.0)));
    basis = arnoldi_expand(basis, *a, Pole::inf());
    CHECK(pencil_residual(basis, *a) <= 1e-12);
    CHECK(orthonormality_defect(basis) <= 1e-10);
    // the inverse direction lies in the span
    Matrix w = a->solve(Matrix(basis.v.col(1)));
    const Matrix proj = basis.v * (basis.v.adjoint() * w);
    CHECK((w - proj).norm() <= 1e-10 * w.norm());
}

TEST_CASE("ensure_trailing_infinity is idempotent and appends otherwise") {
    auto a = symmetric_tridiag(30);
    BlockKrylovBasis basis = arnoldi_init(*a, Matrix::Ones(30, 1));
    basis = arnoldi_expand(basis, *a, Pole::inf());
    BlockKrylovBasis same = ensure_trailing_infinity(basis, *a);
    CHECK(same.num_blocks() == basis.num_blocks());
    CHECK((same.v - basis.v).norm() == 0.0);

    basis = arnoldi_expand(basis, *a, Pole::finite(Complex(3.0)));
    CHECK_FALSE(basis.poles.back().infinite);
    BlockKrylovBasis fixed = ensure_trailing_infinity(basis, *a);
    CHECK(fixed.poles.back().infinite);
    CHECK(fixed.num_blocks() == basis.num_blocks() + 1);
    CHECK(pencil_residual(fixed, *a) <= 1e-10);
}

TEST_CASE("pole order does not change the space") {
    auto a = symmetric_tridiag(30);
    Matrix c = Matrix::Ones(30, 1);
    const std::vector<Complex> order1 = {Complex(2.0), Complex(5.0), Complex(-1.0)};
    const std::vector<Complex> order2 = {Complex(-1.0), Complex(2.0), Complex(5.0)};
    auto build = [&](const std::vector<Complex>& poles) {
        BlockKrylovBasis basis = arnoldi_init(*a, c);
        for (Complex xi : poles) basis = arnoldi_expand(basis, *a, Pole::finite(xi));
        return basis;
    };
    const BlockKrylovBasis b1 = build(order1);
    const BlockKrylovBasis b2 = build(order2);
    CHECK(max_principal_angle(b1.v, b2.v) <= 1e-8);
}

TEST_CASE("projected_matrix contracts against dense references") {
    std::mt19937_64 rng(3);
    Matrix araw = random_stable(rng, 18);
    auto a = std::make_shared<DenseOperator>(araw);
    Matrix c = random_matrix(rng, 18, 2);
    BlockKrylovBasis basis = arnoldi_init(*a, c);
    for (int step = 0; step < 4; ++step) {
        basis = arnoldi_expand(basis, *a, step % 2 == 0 ? Pole::inf() : Pole::finite(Complex(9.0)));
    }
    const Matrix vk = basis.galerkin_basis();
    const Matrix expect = vk.adjoint() * araw * vk;
    CHECK((projected_matrix(basis, *a) - expect).norm() <= 1e-12 * expect.norm());

    // identity operator projects to the identity
    auto eye = std::make_shared<DenseOperator>(Matrix(Matrix::Identity(18, 18)));
    const Matrix pid = projected_matrix(basis, *eye);
    CHECK((pid - Matrix::Identity(pid.rows(), pid.cols())).norm() <= 1e-13);

    // Hermitian operators project to Hermitian matrices
    Matrix h = random_matrix(rng, 18, 18);
    h = (h + h.adjoint()).eval();
    auto hop = std::make_shared<DenseOperator>(h);
    const Matrix ph = projected_matrix(basis, *hop);
    CHECK((ph - ph.adjoint()).norm() <= 1e-13 * ph.norm());
}

TEST_CASE("conjugate pair scheduling") {
    ConjugatePairScheduler sched;
    CHECK_FALSE(sched.has_pending());
    Pole first = sched.next(Pole::finite(Complex(2.0, 1.0)));
    CHECK(first.value == Complex(2.0, 1.0));
    CHECK(sched.has_pending());
    Pole second = sched.next(Pole::finite(Complex(100.0, -5.0)));
    CHECK(second.value == Complex(2.0, -1.0));
    CHECK_FALSE(sched.has_pending());
    Pole real = sched.next(Pole::finite(Complex(3.0, 0.0)));
    CHECK(real.value == Complex(3.0, 0.0));
    CHECK_FALSE(sched.has_pending());
}

TEST_CASE("pencil relation and orthonormality hold across random configurations") {
    std::mt19937_64 rng(4);
    for (Index n : {20, 60, 200}) {
        for (Index b : {1, 2, 3}) {
            Matrix araw = random_stable(rng, n);
            auto a = std::make_shared<DenseOperator>(araw);
            Matrix c = random_matrix(rng, n, b);
            BlockKrylovBasis basis = arnoldi_init(*a, c);
            const std::vector<Pole> poles = {
                Pole::inf(),
                Pole::finite(Complex(2.0 * n, 3.0)),
                Pole::finite(Complex(2.0 * n, -3.0)),
                Pole::finite(Complex(0.0)),
                Pole::inf(),
                Pole::finite(Complex(-1.5 * n, 0.0)),
            };
            for (const Pole& xi : poles) {
                basis = arnoldi_expand(basis, *a, xi);
                CHECK(pencil_residual(basis, *a) <= 1e-10);
                CHECK(orthonormality_defect(basis) <= 1e-10);
            }
            CHECK(basis.v.cols() == b * (static_cast<Index>(poles.size()) + 1));
        }
    }
}

TEST_CASE("the space matches its rational-function characterization") {
    std::mt19937_64 rng(5);
    const Index n = 24;
    Matrix araw = random_stable(rng, n);
    auto a = std::make_shared<DenseOperator>(araw);
    Matrix c = random_matrix(rng, n, 1);

    const std::vector<Pole> poles = {Pole::inf(), Pole::finite(Complex(40.0, 7.0)),
                                     Pole::inf(), Pole::finite(Complex(55.0, -3.0))};
    BlockKrylovBasis basis = arnoldi_init(*a, c);
    for (const Pole& xi : poles) basis = arnoldi_expand(basis, *a, xi);

    // densely built space {Q(A)^{-1} A^j v}
    Matrix qa = Matrix::Identity(n, n);
    for (const Pole& xi : poles) {
        if (!xi.infinite && !xi.is_zero()) {
            qa = ((araw - xi.value * Matrix::Identity(n, n)) * qa).eval();
        }
    }
    Matrix span(n, poles.size() + 1);
    Matrix power = c;
    for (size_t j = 0; j <= poles.size(); ++j) {
        span.col(static_cast<Index>(j)) = solve_dense(qa, power).col(0);
        power = (araw * power).eval();
    }
    const Matrix q = thin_qr(span).q;
    CHECK(max_principal_angle(basis.v, q) <= 1e-8);
}
