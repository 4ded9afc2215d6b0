#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tbrk/driver.hpp"
#include "tbrk/operators.hpp"
#include "tbrk/tensor.hpp"

namespace tbrk {

/// Uniform grid on [0,1]^d with n points per direction including the
/// boundary; the n-2 interior points carry the unknowns and the spacing is
/// h = 1/(n-1).
struct GridSpec {
    Index n = 0;
    int d = 0;

    double spacing() const { return 1.0 / static_cast<double>(n - 1); }
    Index interior() const { return n - 2; }
    /// Location of the j-th interior point (0-based): (j+1) h.
    double point(Index j) const { return static_cast<double>(j + 1) * spacing(); }

    void validate() const;
};

/// (1/h^2) tridiag(-1, 2, -1) on the interior points.
std::shared_ptr<TridiagOperator> laplacian_1d(const GridSpec& g);

/// (1/2h) tridiag(-1, 0, 1): centered first derivative, skew-symmetric.
std::shared_ptr<TridiagOperator> convection_1d(const GridSpec& g);

/// Diagonal sampling of a convection profile at the interior points.
RealVector phi_diag(const std::function<double(double)>& phi, const GridSpec& g);

/// eps * laplacian + diag(phi) * convection, assembled as one tridiagonal.
std::shared_ptr<TridiagOperator> convdiff_operator_1d(const GridSpec& g, double eps,
                                                      const std::function<double(double)>& phi);

/// Named convection profiles accepted by the CLI (`zero`, `one`, `quad`
/// = 1+(x+1)^2/4, `ramp` = (1+x)/2).
std::function<double(double)> phi_profile(const std::string& name);

// --- right-hand sides -------------------------------------------------------

enum class RhsKind { separable, inv_sum, prod_inv, random_lowrank, file };

struct RhsSpec {
    RhsKind kind = RhsKind::inv_sum;
    std::string separable_id = "ones";  ///< `ones` or `sinpi`
    double alpha = 1.0;                 ///< inv_sum: f = 1/(alpha + sum x_i)
    Index rank = 2;                     ///< random low-rank
    std::uint64_t seed = 0;
    std::string path;  ///< file kind

    /// Parse `separable:sinpi`, `invsum`, `invsum:2.5`, `prodinv`,
    /// `random-tt:2`, `file:PATH`.
    static RhsSpec parse(const std::string& text);
};

/// Exponential-sum approximation 1/s ~= sum_k w_k exp(-t_k s) on
/// [smin, smax], max relative error <= tol (self-verified on a dense grid).
struct ExpSum {
    RealVector weights;
    RealVector exponents;

    double eval(double s) const;
};
ExpSum fit_inverse_expsum(double smin, double smax, double tol);

TuckerTensor build_rhs_tucker(const RhsSpec& spec, const GridSpec& g, double tol);
TTTensor build_rhs_tt(const RhsSpec& spec, const GridSpec& g, double tol);

/// Assemble the Kronecker-sum operator densely and solve directly.
/// Acceptance oracle only; SizeOverflow past the unknown budget.
DenseTensor oracle_solve_dense(const std::vector<OperatorPtr>& ops, const DenseTensor& c,
                               Index budget = 20000);

// --- benchmark runs ---------------------------------------------------------

enum class ProblemKind { poisson, convdiff, files };

struct ProblemSpec {
    ProblemKind kind = ProblemKind::poisson;
    double epsilon = 0.1;
    std::vector<std::string> phi_names;  ///< convdiff profiles, padded with `zero`
    RhsSpec rhs;
    std::vector<std::string> operator_files;  ///< files kind
};

std::vector<OperatorPtr> build_operators(const ProblemSpec& problem, const GridSpec& g);

struct RunConfig {
    ProblemSpec problem;
    GridSpec grid;
    bool tt_format = false;
    TbrkConfig solver;
    double rhs_tol = 0.0;  ///< 0: derived from the solver tolerance
    std::string out_dat;
    std::string out_solution;
};

struct RunSummary {
    std::string problem;
    std::string format;
    std::string poles;
    int d = 0;
    Index n = 0;
    SolveStatus status = SolveStatus::max_iterations;
    double final_residual = 0.0;
    double seconds = 0.0;
    int outer_iterations = 0;
    double mean_iterations = 0.0;
    std::vector<int> mode_iterations;
};

RunSummary run_solve(const RunConfig& cfg);

std::string summary_to_json(const RunSummary& s);

/// Two whitespace-separated columns: mean iteration count and relative
/// residual, one row per outer iteration.
void write_dat(const std::string& path, const ConvergenceTrace& trace);
std::vector<std::pair<double, double>> read_dat(const std::string& path);

}  // namespace tbrk
