#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "support.hpp"
#include "tbrk/io.hpp"
#include "tbrk/pde.hpp"

using namespace tbrk;
using namespace tbrk::test;

TEST_CASE("laplacian stencil entries and scaling") {
    GridSpec g{5, 1};
    CHECK(g.spacing() == doctest::Approx(0.25));
    auto a = laplacian_1d(g);
    CHECK(a->dim() == 3);
    Matrix dense = a->dense(100);
    CHECK(std::abs(dense(0, 0) - Complex(2.0 * 16.0)) < 1e-12);
    CHECK(std::abs(dense(0, 1) - Complex(-16.0)) < 1e-12);
    CHECK(std::abs(dense(1, 0) - Complex(-16.0)) < 1e-12);
    CHECK(std::abs(dense(2, 2) - Complex(32.0)) < 1e-12);
}

TEST_CASE("second differences of constants vanish away from the boundary") {
    GridSpec g{12, 1};
    auto a = laplacian_1d(g);
    Matrix ones = Matrix::Ones(g.interior(), 1);
    Matrix y = a->apply(ones);
    for (Index i = 1; i + 1 < g.interior(); ++i) {
        CHECK(std::abs(y(i, 0)) < 1e-12);
    }
    CHECK(std::abs(y(0, 0)) > 1.0);  // boundary-adjacent rows keep the Dirichlet term
}

TEST_CASE("laplacian spectrum matches the closed form") {
    GridSpec g{12, 1};
    auto a = laplacian_1d(g);
    const Index m = g.interior();
    auto eig = eig_dense(a->dense(1000));
    std::vector<double> vals;
    for (Index i = 0; i < m; ++i) vals.push_back(eig.values(i).real());
    std::sort(vals.begin(), vals.end());
    const double h = g.spacing();
    const double pi = std::acos(-1.0);
    for (Index j = 0; j < m; ++j) {
        const double expect = (2.0 - 2.0 * std::cos((j + 1) * pi / (m + 1))) / (h * h);
        CHECK(vals[static_cast<size_t>(j)] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("laplacian reaches second-order accuracy on smooth samples") {
    const double pi = std::acos(-1.0);
    std::vector<double> errs, spacings;
    for (Index n : {32, 64, 128}) {
        GridSpec g{n, 1};
        auto a = laplacian_1d(g);
        Matrix v(g.interior(), 1);
        for (Index j = 0; j < g.interior(); ++j) v(j, 0) = std::sin(pi * g.point(j));
        Matrix y = a->apply(v);
        errs.push_back((y - pi * pi * v).norm() / v.norm());
        spacings.push_back(g.spacing());
    }
    for (size_t i = 1; i < errs.size(); ++i) {
        const double order = std::log(errs[i - 1] / errs[i]) / std::log(spacings[i - 1] / spacings[i]);
        CHECK(order >= 1.9);
        CHECK(order <= 2.1);
    }
}

TEST_CASE("convection matrix is skew-symmetric with the documented scaling") {
    GridSpec g{9, 1};
    auto b = convection_1d(g);
    Matrix dense = b->dense(1000);
    CHECK((dense + dense.transpose()).norm() == 0.0);
    CHECK(std::abs(dense(0, 1) - Complex(1.0 / (2.0 * g.spacing()))) < 1e-13);
}

TEST_CASE("phi profiles sample the interior grid points") {
    GridSpec g{5, 1};
    RealVector d = phi_diag(phi_profile("quad"), g);
    REQUIRE(d.size() == 3);
    for (Index j = 0; j < 3; ++j) {
        const double x = g.point(j);
        CHECK(d(j) == doctest::Approx(1.0 + (x + 1.0) * (x + 1.0) / 4.0));
    }
    CHECK(phi_diag(phi_profile("one"), g).isOnes());
    CHECK_THROWS_AS(phi_profile("cubic"), UnsupportedExpression);
}

TEST_CASE("convection-diffusion operator reduces to the scaled laplacian") {
    GridSpec g{10, 1};
    auto cd = convdiff_operator_1d(g, 0.3, phi_profile("zero"));
    auto lap = laplacian_1d(g);
    Matrix diff = cd->dense(1000) - 0.3 * lap->dense(1000);
    CHECK(diff.norm() <= 1e-12 * lap->dense(1000).norm());
}

TEST_CASE("convection-diffusion rows scale the stencil by the local profile") {
    GridSpec g{8, 1};
    const double eps = 0.1;
    auto cd = convdiff_operator_1d(g, eps, phi_profile("quad"));
    Matrix dense = cd->dense(1000);
    const double h = g.spacing();
    auto phi = phi_profile("quad");
    for (Index i = 0; i + 1 < g.interior(); ++i) {
        CHECK(std::abs(dense(i, i + 1) - Complex(-eps / (h * h) + phi(g.point(i)) / (2 * h))) <
              1e-12);
        CHECK(std::abs(dense(i + 1, i) - Complex(-eps / (h * h) - phi(g.point(i + 1)) / (2 * h))) <
              1e-12);
    }
}

TEST_CASE("exponential sums approximate the reciprocal over the fitted range") {
    ExpSum es = fit_inverse_expsum(1.0, 4.0, 1e-9);
    for (int i = 0; i <= 200; ++i) {
        const double s = 1.0 + 3.0 * i / 200.0;
        CHECK(std::abs(1.0 - s * es.eval(s)) <= 1e-9);
    }
}

TEST_CASE("separable right-hand sides are exact rank-one samples") {
    GridSpec g{10, 3};
    TuckerTensor t = build_rhs_tucker(RhsSpec::parse("separable:sinpi"), g, 1e-8);
    for (Index r : t.ranks()) CHECK(r == 1);
    const double pi = std::acos(-1.0);
    DenseTensor full = tucker_full(t);
    std::vector<Index> idx = {2, 5, 7};
    double expect = 1.0;
    for (int i = 0; i < 3; ++i) expect *= std::sin(pi * g.point(idx[static_cast<size_t>(i)]));
    CHECK(std::abs(full.at(idx) - Complex(expect)) <= 1e-12);

    TTTensor tt = build_rhs_tt(RhsSpec::parse("separable:sinpi"), g, 1e-8);
    for (Index r : tt.ranks()) CHECK(r == 1);
    CHECK(std::abs(tt_entry(tt, idx) - Complex(expect)) <= 1e-12);
}

TEST_CASE("inverse-sum right-hand sides meet their tolerance against dense sampling") {
    GridSpec g{34, 3};
    const double tol = 1e-7;
    TuckerTensor t = build_rhs_tucker(RhsSpec::parse("invsum"), g, tol);
    TTTensor tt = build_rhs_tt(RhsSpec::parse("invsum"), g, tol);
    DenseTensor exact(std::vector<Index>(3, g.interior()));
    std::vector<Index> idx(3, 0);
    for (Index pos = 0; pos < exact.size(); ++pos) {
        double s = 1.0;
        for (int i = 0; i < 3; ++i) s += g.point(idx[static_cast<size_t>(i)]);
        exact.data()(pos) = Complex(1.0 / s);
        for (int i = 0; i < 3; ++i) {
            if (idx[static_cast<size_t>(i)] + 1 < g.interior()) {
                ++idx[static_cast<size_t>(i)];
                break;
            }
            idx[static_cast<size_t>(i)] = 0;
        }
    }
    CHECK((tucker_full(t) - exact).norm() <= tol * exact.norm());
    CHECK((tt_full(tt) - exact).norm() <= tol * exact.norm());
}

TEST_CASE("paired-product right-hand side verifies for four modes") {
    GridSpec g{12, 4};
    TuckerTensor t = build_rhs_tucker(RhsSpec::parse("prodinv"), g, 1e-7);
    CHECK(t.order() == 4);
    GridSpec g3{12, 3};
    CHECK_THROWS_AS(build_rhs_tucker(RhsSpec::parse("prodinv"), g3, 1e-7),
                    UnsupportedExpression);
}

TEST_CASE("random low-rank right-hand sides are reproducible per seed") {
    GridSpec g{18, 4};
    RhsSpec spec;
    spec.kind = RhsKind::random_lowrank;
    spec.rank = 2;
    spec.seed = 99;
    TTTensor a = build_rhs_tt(spec, g, 1e-8);
    TTTensor b = build_rhs_tt(spec, g, 1e-8);
    for (int i = 0; i < 4; ++i) {
        CHECK((a.carriage(i).data() - b.carriage(i).data()).norm() == 0.0);
    }
    spec.seed = 100;
    TTTensor cdiff = build_rhs_tt(spec, g, 1e-8);
    CHECK((a.carriage(0).data() - cdiff.carriage(0).data()).norm() > 0.0);
}

TEST_CASE("rhs parsing accepts the documented grammar") {
    CHECK(RhsSpec::parse("invsum:2.5").alpha == doctest::Approx(2.5));
    CHECK(RhsSpec::parse("random-tt:3").rank == 3);
    CHECK(RhsSpec::parse("file:/tmp/x.txt").path == "/tmp/x.txt");
    CHECK_THROWS_AS(RhsSpec::parse("fourier"), UnsupportedExpression);
    CHECK_THROWS_AS(RhsSpec::parse("separable:exp"), UnsupportedExpression);
}

TEST_CASE("dense oracle agrees with the diagonalization solver for two modes") {
    std::mt19937_64 rng(1);
    std::vector<OperatorPtr> ops = {std::make_shared<DenseOperator>(random_spd(rng, 7)),
                                    std::make_shared<DenseOperator>(random_spd(rng, 6))};
    DenseTensor c = random_tensor(rng, {7, 6});
    DenseTensor x1 = oracle_solve_dense(ops, c);
    std::vector<Matrix> mats = {ops[0]->dense(1000), ops[1]->dense(1000)};
    DenseTensor x2 = solve_dense_diag({mats, c});
    CHECK((x1.data() - x2.data()).norm() <= 1e-9 * x2.data().norm());
}

TEST_CASE("dense oracle inverts diagonal operators entrywise") {
    Vector d1(3), d2(2);
    d1 << Complex(1.0), Complex(2.0), Complex(3.0);
    d2 << Complex(10.0), Complex(20.0);
    std::vector<OperatorPtr> ops = {
        std::make_shared<TridiagOperator>(Vector::Zero(2), d1, Vector::Zero(2)),
        std::make_shared<TridiagOperator>(Vector::Zero(1), d2, Vector::Zero(1))};
    DenseTensor c({3, 2});
    c.data().setOnes();
    DenseTensor x = oracle_solve_dense(ops, c);
    for (Index j = 0; j < 2; ++j) {
        for (Index i = 0; i < 3; ++i) {
            CHECK(std::abs(x.at({i, j}) - 1.0 / (d1(i) + d2(j))) < 1e-13);
        }
    }
}

TEST_CASE("dense oracle solves a small Poisson problem to near machine precision") {
    GridSpec g{12, 3};
    auto lap = laplacian_1d(g);
    std::vector<OperatorPtr> ops(3, lap);
    TuckerTensor rhs = build_rhs_tucker(RhsSpec::parse("invsum"), g, 1e-9);
    DenseTensor c = tucker_full(rhs);
    DenseTensor x = oracle_solve_dense(ops, c);
    std::vector<Matrix> mats(3, lap->dense(1000));
    DenseTensor r = c - apply_sylvester_operator(mats, x);
    CHECK(r.norm() <= 1e-12 * c.norm());
    CHECK_THROWS_AS(oracle_solve_dense(ops, c, 100), SizeOverflow);
}

TEST_CASE("dat files round-trip losslessly") {
    ConvergenceTrace trace;
    for (int i = 1; i <= 5; ++i) {
        TraceRow row;
        row.iteration = i;
        row.mean_iteration = i + 0.25 * (i % 2);
        row.rel_residual = std::pow(10.0, -i) * 3.14159;
        trace.rows.push_back(row);
    }
    const std::string path = "bench_roundtrip_test.dat";
    write_dat(path, trace);
    auto rows = read_dat(path);
    REQUIRE(rows.size() == 5);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].first == trace.rows[i].mean_iteration);
        CHECK(rows[i].second == trace.rows[i].rel_residual);
        CHECK(rows[i].second >= 0.0);
    }
    std::remove(path.c_str());
}

TEST_CASE("matrix and tensor files round-trip") {
    std::mt19937_64 rng(2);
    const std::string path = "bench_tensorfile_test.txt";

    Matrix m = random_matrix(rng, 4, 3);
    write_matrix_file(path, m);
    CHECK((read_matrix_file(path) - m).norm() == 0.0);

    TuckerTensor t = random_tucker(rng, {5, 4, 3}, 2);
    write_tensor_file(path, TensorFile(t));
    auto back = read_tensor_file(path);
    auto* tt = std::get_if<TuckerTensor>(&back);
    REQUIRE(tt != nullptr);
    CHECK((tucker_full(*tt) - tucker_full(t)).norm() <= 1e-12 * frob_norm(t));

    TTTensor train = random_tt(rng, {4, 5, 3}, {2, 2});
    write_tensor_file(path, TensorFile(train));
    auto back2 = read_tensor_file(path);
    auto* tr = std::get_if<TTTensor>(&back2);
    REQUIRE(tr != nullptr);
    CHECK((tt_full(*tr) - tt_full(train)).norm() <= 1e-12 * frob_norm(train));

    DenseTensor dt = random_tensor(rng, {3, 2, 4});
    write_tensor_file(path, TensorFile(dt));
    auto back3 = read_tensor_file(path);
    auto* dd = std::get_if<DenseTensor>(&back3);
    REQUIRE(dd != nullptr);
    CHECK((dd->data() - dt.data()).norm() == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("run_solve produces converged summaries and artifact files") {
    RunConfig cfg;
    cfg.grid = GridSpec{26, 3};
    cfg.problem.kind = ProblemKind::poisson;
    cfg.problem.rhs = RhsSpec::parse("invsum");
    cfg.solver.tolerance = 1e-6;
    cfg.solver.max_iterations = 30;
    cfg.solver.strategy.kind = PoleStrategyKind::det;
    cfg.out_dat = "bench_run_test.dat";
    cfg.out_solution = "bench_run_solution.txt";
    RunSummary summary = run_solve(cfg);
    CHECK(summary.status == SolveStatus::converged);
    CHECK(summary.final_residual <= 1e-6);
    const std::string json = summary_to_json(summary);
    CHECK(json.find("\"poisson\"") != std::string::npos);
    CHECK(json.find("iterations_per_mode") != std::string::npos);

    auto rows = read_dat("bench_run_test.dat");
    REQUIRE(!rows.empty());
    for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].first > rows[i - 1].first);
    CHECK(rows.back().second <= 1e-6);

    auto sol = read_tensor_file("bench_run_solution.txt");
    CHECK(std::get_if<TuckerTensor>(&sol) != nullptr);
    std::remove("bench_run_test.dat");
    std::remove("bench_run_solution.txt");
}
