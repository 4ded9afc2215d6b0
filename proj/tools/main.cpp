#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tbrk/driver.hpp"
#include "tbrk/io.hpp"
#include "tbrk/pde.hpp"

namespace {

using namespace tbrk;

std::string sidecar_json_path(const std::string& dat_path) {
    const auto dot = dat_path.rfind('.');
    if (dot == std::string::npos) return dat_path + ".json";
    return dat_path.substr(0, dot) + ".json";
}

int run_verify() {
    int failures = 0;
    const auto report = [&](const char* name, bool ok, double value) {
        std::printf("[%s] %-34s (%.3e)\n", ok ? "PASS" : "FAIL", name, value);
        if (!ok) ++failures;
    };

    // small Poisson solve against the dense Kronecker oracle
    {
        GridSpec g{12, 3};
        auto ops = build_operators({ProblemKind::poisson, 0.1, {}, RhsSpec::parse("separable:sinpi"), {}}, g);
        TuckerTensor rhs = build_rhs_tucker(RhsSpec::parse("separable:sinpi"), g, 1e-10);
        TbrkConfig cfg;
        cfg.tolerance = 1e-9;
        cfg.strategy.kind = PoleStrategyKind::det;
        cfg.max_iterations = 20;
        SolveResult res = tuck_tbrk(ops, rhs, cfg);
        DenseTensor x = tucker_full(res.tucker());
        DenseTensor oracle = oracle_solve_dense(ops, tucker_full(rhs));
        const double err = (x - oracle).norm() / oracle.norm();
        report("poisson solve vs dense oracle", err <= 1e-7, err);
    }

    // cheap residual against the explicit one on a few random problems
    {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> normal;
        double worst = 0.0;
        for (int trial = 0; trial < 4; ++trial) {
            const int d = 2 + trial % 2;
            const Index n = 12;
            std::vector<OperatorPtr> ops;
            std::vector<Matrix> factors;
            for (int i = 0; i < d; ++i) {
                Matrix a(n, n);
                for (Index r = 0; r < n; ++r)
                    for (Index c = 0; c < n; ++c) a(r, c) = Complex(normal(rng), 0.0);
                a = (a + a.adjoint()).eval();
                a.diagonal().array() += 4.0 * n;
                ops.push_back(std::make_shared<DenseOperator>(a));
                Matrix u(n, 2);
                for (Index r = 0; r < n; ++r)
                    for (Index c = 0; c < 2; ++c) u(r, c) = Complex(normal(rng), 0.0);
                factors.push_back(thin_qr(u).q);
            }
            DenseTensor core(std::vector<Index>(static_cast<size_t>(d), 2));
            for (Index i = 0; i < core.size(); ++i) core.data()(i) = Complex(normal(rng), 0.0);
            TuckerTensor c(core, factors);

            TbrkConfig cfg;
            cfg.tolerance = 1e-12;
            cfg.max_iterations = 3;
            cfg.strategy.kind = trial % 2 == 0 ? PoleStrategyKind::poly : PoleStrategyKind::det;
            SolveResult res = tuck_tbrk(ops, c, cfg);
            const double cheap = res.final_residual;
            const double expl = explicit_residual_norm(ops, res.tucker(), c) / frob_norm(c);
            worst = std::max(worst, std::abs(cheap - expl) / std::max(expl, 1e-30));
        }
        report("cheap vs explicit residual", worst <= 1e-8, worst);
    }

    // residual decomposition identities on a hand-built Galerkin state
    {
        GridSpec g{10, 3};
        auto lap = laplacian_1d(g);
        std::vector<OperatorPtr> ops(3, lap);
        TuckerTensor rhs = build_rhs_tucker(RhsSpec::parse("invsum"), g, 1e-9);

        BlockKrylovBasis basis = arnoldi_init(*lap, rhs.factor(0));
        basis = arnoldi_expand(basis, *lap, Pole::finite(Complex(-40.0)));
        basis = arnoldi_expand(basis, *lap, Pole::inf());
        std::vector<BlockKrylovBasis> bs(3, basis);
        std::vector<Matrix> coeffs(3, projected_matrix(basis, *lap));
        DenseTensor pr = rhs.core();
        for (int i = 0; i < 3; ++i) {
            pr = mode_product(pr, basis.galerkin_basis().adjoint() * rhs.factor(i), i);
        }
        DenseTensor y = solve_dense_diag({coeffs, pr});
        DecompositionReport rep = residual_decomposition_check(bs, ops, y, rhs);
        const double worst = std::max({rep.max_cross_orthogonality, rep.pythagoras_error,
                                       rep.max_unfolding_mismatch, rep.remainder_norm / rep.rhs_norm});
        report("residual decomposition identities", worst <= 1e-10, worst);
    }

    // TT path against the dense oracle
    {
        GridSpec g{12, 3};
        auto ops = build_operators({ProblemKind::poisson, 0.1, {}, RhsSpec{}, {}}, g);
        RhsSpec rspec;
        rspec.kind = RhsKind::random_lowrank;
        rspec.rank = 2;
        rspec.seed = 5;
        TTTensor rhs = build_rhs_tt(rspec, g, 1e-8);
        TbrkConfig cfg;
        cfg.tolerance = 1e-9;
        cfg.strategy.kind = PoleStrategyKind::det2;
        cfg.max_iterations = 20;
        SolveResult res = tt_tbrk(ops, rhs, cfg);
        DenseTensor x = tt_full(res.tt());
        DenseTensor oracle = oracle_solve_dense(ops, tt_full(rhs));
        const double err = (x - oracle).norm() / oracle.norm();
        report("tt solve vs dense oracle", err <= 1e-7, err);
    }

    std::printf("%s (%d failure%s)\n", failures == 0 ? "verify: all checks passed" : "verify: FAILURES",
                failures, failures == 1 ? "" : "s");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank tensor Sylvester solver (tensorized block rational Krylov)"};
    app.require_subcommand(1);

    auto* solve = app.add_subcommand("solve", "solve a benchmark or custom problem");
    std::string problem;
    solve->add_option("problem", problem, "poisson | convdiff | files")
        ->required()
        ->check(CLI::IsMember({"poisson", "convdiff", "files"}));
    int d = 3;
    Index n = 128;
    std::string format = "tucker";
    std::string poles = "det";
    double tol = 1e-6;
    int maxit = 100;
    double eps = 0.1;
    std::string phi = "";
    std::string rhs = "";
    std::uint64_t seed = 0;
    int fov_samples = 256;
    double inner_tol = 0.0;
    int inner_sweeps = 50;
    std::string out;
    std::string save_solution;
    std::vector<std::string> op_files;
    double rhs_tol = 0.0;

    solve->add_option("--d", d, "number of modes");
    solve->add_option("--n", n, "grid points per direction (including boundary)");
    solve->add_option("--format", format)->check(CLI::IsMember({"tucker", "tt"}));
    solve->add_option("--poles", poles)->check(CLI::IsMember({"poly", "ext", "det", "det2"}));
    solve->add_option("--tol", tol, "relative residual target");
    solve->add_option("--maxit", maxit, "outer iteration cap per mode");
    solve->add_option("--eps", eps, "viscosity (convdiff)");
    solve->add_option("--phi", phi, "comma-separated convection profiles (zero|one|quad|ramp)");
    solve->add_option("--rhs", rhs,
                      "rhs spec: separable:{ones|sinpi} | invsum[:alpha] | prodinv | "
                      "random-tt:R | file:PATH");
    solve->add_option("--seed", seed, "seed for random right-hand sides");
    solve->add_option("--fov-samples", fov_samples, "boundary samples for adaptive poles");
    solve->add_option("--inner-tol", inner_tol, "inner solver tolerance (absolute)");
    solve->add_option("--inner-sweeps", inner_sweeps, "inner ALS sweep cap");
    solve->add_option("--rhs-tol", rhs_tol, "rhs compression tolerance");
    solve->add_option("--out", out, "write convergence trace to this .dat file");
    solve->add_option("--save-solution", save_solution, "write the solution tensor file");
    solve->add_option("--a", op_files, "operator matrix file (repeat per mode, files problem)");

    auto* verify = app.add_subcommand("verify", "run the built-in oracle comparison suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            return run_verify();
        }

        tbrk::RunConfig cfg;
        cfg.grid = tbrk::GridSpec{n, d};
        if (problem == "poisson") {
            cfg.problem.kind = tbrk::ProblemKind::poisson;
        } else if (problem == "convdiff") {
            cfg.problem.kind = tbrk::ProblemKind::convdiff;
        } else {
            cfg.problem.kind = tbrk::ProblemKind::files;
            cfg.problem.operator_files = op_files;
        }
        cfg.problem.epsilon = eps;
        if (!phi.empty()) {
            std::stringstream ss(phi);
            std::string item;
            while (std::getline(ss, item, ',')) cfg.problem.phi_names.push_back(item);
        } else if (cfg.problem.kind == tbrk::ProblemKind::convdiff) {
            cfg.problem.phi_names = {"quad"};  // remaining modes default to zero
        }
        if (!rhs.empty()) {
            cfg.problem.rhs = tbrk::RhsSpec::parse(rhs);
        } else {
            cfg.problem.rhs = tbrk::RhsSpec::parse("invsum");
        }
        cfg.problem.rhs.seed = seed;
        cfg.tt_format = (format == "tt");
        cfg.solver.tolerance = tol;
        cfg.solver.max_iterations = maxit;
        cfg.solver.strategy.kind = tbrk::pole_strategy_from_name(poles);
        cfg.solver.strategy.boundary_sample_count = fov_samples;
        if (inner_tol > 0.0) cfg.solver.inner_tol_factor = inner_tol / tol;
        cfg.solver.inner_max_sweeps = inner_sweeps;
        cfg.rhs_tol = rhs_tol;
        cfg.out_dat = out;
        cfg.out_solution = save_solution;

        const tbrk::RunSummary summary = tbrk::run_solve(cfg);
        const std::string json = tbrk::summary_to_json(summary);
        std::cout << json << std::endl;
        if (!out.empty()) {
            std::ofstream jf(sidecar_json_path(out));
            jf << json << '\n';
        }
        return summary.status == tbrk::SolveStatus::converged ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
