#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support.hpp"
#include "tbrk/projected.hpp"

using namespace tbrk;
using namespace tbrk::test;

TEST_CASE("identity coefficients scale the rhs by 1/d") {
    std::mt19937_64 rng(1);
    DenseTensor c = random_tensor(rng, {3, 4, 2});
    std::vector<Matrix> coeffs = {Matrix::Identity(3, 3), Matrix::Identity(4, 4),
                                  Matrix::Identity(2, 2)};
    DenseTensor y = solve_dense_diag({coeffs, c});
    CHECK((y.data() - c.data() / 3.0).norm() <= 1e-12 * c.norm());
}

TEST_CASE("diagonal coefficients give the entrywise closed form") {
    DenseTensor c({2, 2});
    c.at({0, 0}) = 1.0;
    c.at({1, 0}) = 2.0;
    c.at({0, 1}) = 3.0;
    c.at({1, 1}) = 4.0;
    Matrix a1 = Matrix::Zero(2, 2), a2 = Matrix::Zero(2, 2);
    a1(0, 0) = 1.0;
    a1(1, 1) = 2.0;
    a2(0, 0) = 10.0;
    a2(1, 1) = 20.0;
    DenseTensor y = solve_dense_diag({{a1, a2}, c});
    CHECK(std::abs(y.at({0, 0}) - Complex(1.0 / 11.0)) < 1e-13);
    CHECK(std::abs(y.at({1, 0}) - Complex(2.0 / 12.0)) < 1e-13);
    CHECK(std::abs(y.at({0, 1}) - Complex(3.0 / 21.0)) < 1e-13);
    CHECK(std::abs(y.at({1, 1}) - Complex(4.0 / 22.0)) < 1e-13);
}

TEST_CASE("diagonalization solve matches the vectorized Kronecker system") {
    std::mt19937_64 rng(2);
    std::vector<Matrix> coeffs;
    for (int i = 0; i < 3; ++i) coeffs.push_back(random_spd(rng, 5));
    DenseTensor c = random_tensor(rng, {5, 5, 5});
    DenseTensor y1 = solve_dense_diag({coeffs, c});
    DenseTensor y2 = solve_dense_vectorized({coeffs, c});
    CHECK((y1.data() - y2.data()).norm() <= 1e-9 * y2.data().norm());
}

TEST_CASE("diag and vectorized solvers agree across many SPD instances") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 2 + trial % 3;
        std::vector<Index> shape;
        std::vector<Matrix> coeffs;
        for (int i = 0; i < d; ++i) {
            const Index n = 2 + (trial + i) % 4;
            shape.push_back(n);
            coeffs.push_back(random_spd(rng, n));
        }
        DenseTensor c = random_tensor(rng, shape);
        DenseTensor y1 = solve_dense_diag({coeffs, c});
        DenseTensor y2 = solve_dense_vectorized({coeffs, c});
        CHECK((y1.data() - y2.data()).norm() <= 1e-9 * (y2.data().norm() + 1e-300));
    }
}

TEST_CASE("single-mode problems reduce to a plain linear solve") {
    std::mt19937_64 rng(4);
    Matrix a = random_spd(rng, 6);
    DenseTensor c = random_tensor(rng, {6});
    DenseTensor y = solve_dense_vectorized({{a}, c});
    Matrix x = solve_dense(a, Matrix(c.data()));
    CHECK((y.data() - x.col(0)).norm() <= 1e-11 * x.norm());
}

TEST_CASE("zero rhs gives zero solutions in all solvers") {
    std::mt19937_64 rng(5);
    std::vector<Matrix> coeffs = {random_spd(rng, 3), random_spd(rng, 4)};
    DenseTensor c({3, 4});
    CHECK(solve_dense_diag({coeffs, c}).norm() == 0.0);
    CHECK(solve_dense_vectorized({coeffs, c}).norm() == 0.0);

    TTTensor zero_tt = TTTensor::zero({3, 4});
    TTSolveOptions opt;
    TTTensor y = solve_tt_als({coeffs, zero_tt}, opt);
    CHECK(frob_norm(y) == 0.0);
    for (Index r : y.ranks()) CHECK(r == 1);
}

TEST_CASE("vanishing eigenvalue sums are rejected") {
    Matrix a1 = Matrix::Zero(2, 2), a2 = Matrix::Zero(2, 2);
    a1(0, 0) = 1.0;
    a1(1, 1) = -1.0;
    a2(0, 0) = -1.0;
    a2(1, 1) = 1.0;
    DenseTensor c({2, 2});
    c.data().setOnes();
    CHECK_THROWS_AS(solve_dense_diag({{a1, a2}, c}), SingularOperator);
}

TEST_CASE("ill-conditioned eigenvectors push callers to the fallback") {
    Matrix bad(2, 2);
    bad << Complex(1.0), Complex(1e9), Complex(0.0), Complex(1.0 + 1e-9);
    Matrix good = Matrix::Identity(3, 3);
    DenseTensor c({2, 3});
    c.data().setOnes();
    CHECK_THROWS_AS(solve_dense_diag({{bad, good}, c}), IllConditioned);
    // fallback path solves it
    DenseTensor y = solve_dense_vectorized({{bad, good}, c});
    DenseTensor r = c - apply_sylvester_operator({bad, good}, y);
    CHECK(r.norm() <= 1e-10 * c.norm());
}

TEST_CASE("solution scales linearly with the rhs") {
    std::mt19937_64 rng(6);
    std::vector<Matrix> coeffs = {random_spd(rng, 4), random_spd(rng, 3)};
    DenseTensor c = random_tensor(rng, {4, 3});
    DenseTensor y = solve_dense_diag({coeffs, c});
    DenseTensor y3 = solve_dense_diag({coeffs, Complex(-3.0) * c});
    CHECK((y3.data() + 3.0 * y.data()).norm() <= 1e-10 * y.data().norm());
}

TEST_CASE("vectorized solver enforces its budget") {
    std::vector<Matrix> coeffs = {Matrix::Identity(40, 40), Matrix::Identity(40, 40)};
    DenseTensor c({40, 40});
    c.data().setOnes();
    CHECK_THROWS_AS(solve_dense_vectorized({coeffs, c}, 100), SizeOverflow);
}

TEST_CASE("TT operator application matches the dense action") {
    std::mt19937_64 rng(7);
    std::vector<Matrix> coeffs = {random_spd(rng, 4), random_spd(rng, 3), random_spd(rng, 5)};
    TTTensor y = random_tt(rng, {4, 3, 5}, {2, 2});
    TTTensor ly = apply_sylvester_operator(coeffs, y);
    DenseTensor expect = apply_sylvester_operator(coeffs, tt_full(y));
    CHECK((tt_full(ly).data() - expect.data()).norm() <= 1e-11 * expect.norm());
    // bond ranks double
    const auto ry = y.ranks(), rl = ly.ranks();
    for (size_t i = 0; i < ry.size(); ++i) CHECK(rl[i] == 2 * ry[i]);
}

TEST_CASE("ALS recovers a constructed TT solution") {
    std::mt19937_64 rng(8);
    std::vector<Matrix> coeffs;
    for (int i = 0; i < 3; ++i) coeffs.push_back(random_spd(rng, 6));
    TTTensor y0 = random_tt(rng, {6, 6, 6}, {2, 2});
    TTTensor rhs = apply_sylvester_operator(coeffs, y0);

    TTSolveOptions opt;
    opt.tol = 1e-10;
    opt.max_sweeps = 60;
    TTSolveReport rep;
    TTTensor y = solve_tt_als({coeffs, rhs}, opt, &rep);
    CHECK(rep.achieved <= 1e-9);
    CHECK((tt_full(y) - tt_full(y0)).norm() <= 1e-8 * tt_full(y0).norm());
}

TEST_CASE("ALS agrees with the dense solver on small problems") {
    std::mt19937_64 rng(9);
    std::vector<Matrix> coeffs;
    for (int i = 0; i < 3; ++i) coeffs.push_back(random_spd(rng, 5));
    TTTensor rhs = random_tt(rng, {5, 5, 5}, {2, 2});
    TTSolveOptions opt;
    opt.tol = 1e-8;
    opt.max_sweeps = 80;
    TTSolveReport rep;
    TTTensor y = solve_tt_als({coeffs, rhs}, opt, &rep);
    DenseTensor dense = solve_dense_vectorized({coeffs, tt_full(rhs)});
    // both residuals are below tol and the operator's smallest eigenvalue
    // sum exceeds one, so the iterates agree to 2 tol times the rhs norm
    CHECK((tt_full(y) - dense).norm() <= 2.0 * opt.tol * frob_norm(rhs));
}

TEST_CASE("ALS reports the residual it achieved") {
    std::mt19937_64 rng(10);
    std::vector<Matrix> coeffs;
    for (int i = 0; i < 4; ++i) coeffs.push_back(random_spd(rng, 4));
    TTTensor rhs = random_tt(rng, {4, 4, 4, 4}, {2, 2, 2});
    TTSolveOptions opt;
    opt.tol = 1e-7;
    opt.max_sweeps = 60;
    TTSolveReport rep;
    TTTensor y = solve_tt_als({coeffs, rhs}, opt, &rep);
    TTTensor resid = tt_add(rhs, tt_scale(apply_sylvester_operator(coeffs, y), Complex(-1.0)));
    CHECK(frob_norm(resid) / frob_norm(rhs) == doctest::Approx(rep.achieved).epsilon(1e-6));
    CHECK(rep.achieved <= opt.tol);
}

TEST_CASE("Galerkin consistency of solver outputs") {
    std::mt19937_64 rng(11);
    std::vector<Matrix> coeffs;
    for (int i = 0; i < 3; ++i) coeffs.push_back(random_spd(rng, 4));
    DenseTensor c = random_tensor(rng, {4, 4, 4});
    DenseTensor y = solve_dense_diag({coeffs, c});
    DenseTensor r = c - apply_sylvester_operator(coeffs, y);
    CHECK(r.norm() <= 1e-10 * c.norm());
}
