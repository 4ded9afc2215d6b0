#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "tbrk/arnoldi.hpp"
#include "tbrk/operators.hpp"
#include "tbrk/poles.hpp"
#include "tbrk/projected.hpp"
#include "tbrk/tensor.hpp"

namespace tbrk {

struct TraceRow {
    int iteration = 0;            ///< outer iteration, 1-based
    double mean_iteration = 0.0;  ///< mean of per-mode counts (fractional on pairing)
    double rel_residual = 0.0;
    std::vector<double> per_mode_norms;  ///< partial residual norms
    std::vector<int> mode_iterations;
    std::vector<Pole> poles_used;  ///< pole consumed per mode this round (empty on idle)
    bool inner_stagnation = false;
    double seconds = 0.0;  ///< wall time since solve start
};

struct ConvergenceTrace {
    std::vector<TraceRow> rows;
};

enum class SolveStatus { converged, max_iterations, deflated };

struct TbrkConfig {
    double tolerance = 1e-8;
    int max_iterations = 100;
    PoleStrategy strategy{};
    bool real_mode = true;  ///< force conjugate pairing on real operators
    double inner_tol_factor = 0.1;
    int inner_max_sweeps = 50;
    Index inner_enrich_rank = 3;
    Index dense_budget = 20000;  ///< dense fallback budget for the TT inner solve
    std::function<void(const TraceRow&)> trace_sink;
};

struct SolveResult {
    std::variant<TuckerTensor, TTTensor> solution;
    ConvergenceTrace trace;
    SolveStatus status = SolveStatus::max_iterations;
    double final_residual = 0.0;  ///< relative
    std::vector<int> mode_iterations;

    const TuckerTensor& tucker() const { return std::get<TuckerTensor>(solution); }
    const TTTensor& tt() const { return std::get<TTTensor>(solution); }
};

/// Galerkin solver with the right-hand side in Tucker format; the solution
/// comes back as (core; Krylov bases) without densification.
SolveResult tuck_tbrk(const std::vector<OperatorPtr>& ops, const TuckerTensor& c,
                      const TbrkConfig& cfg);

/// Tensor-train variant; the projected equation is solved in TT form (or
/// densely below the configured budget) and the solution stays in TT format.
SolveResult tt_tbrk(const std::vector<OperatorPtr>& ops, const TTTensor& c,
                    const TbrkConfig& cfg);

struct ResidualNorms {
    double total = 0.0;
    std::vector<double> per_mode;
};

/// Residual norm from the small pencil blocks alone: per mode the trailing
/// block row of H_under K^{-1} contracted into the core solution. Every
/// basis must start and end with an infinite pole; modes flagged in
/// exact_modes (invariant subspaces) contribute zero.
ResidualNorms cheap_residual_norm(const std::vector<BlockKrylovBasis>& bases,
                                  const DenseTensor& y,
                                  const std::vector<bool>& exact_modes = {});
ResidualNorms cheap_residual_norm(const std::vector<BlockKrylovBasis>& bases, const TTTensor& y,
                                  const std::vector<bool>& exact_modes = {});

/// || C - sum_i X x_i A_i ||_F evaluated without approximation beyond the
/// element budget (dense path) or TT arithmetic.
double explicit_residual_norm(const std::vector<OperatorPtr>& ops, const TuckerTensor& x,
                              const TuckerTensor& c, Index element_budget = kDefaultDenseBudget);
double explicit_residual_norm(const std::vector<OperatorPtr>& ops, const TTTensor& x,
                              const TTTensor& c);

struct DecompositionReport {
    double rhs_norm = 0.0;
    double residual_norm = 0.0;
    double remainder_norm = 0.0;           ///< ||c_hat||
    double max_cross_orthogonality = 0.0;  ///< max pairwise |<p_i,p_j>| / ||r||^2
    double pythagoras_error = 0.0;         ///< relative defect of the squared-norm identity
    double max_unfolding_mismatch = 0.0;   ///< per-mode norm vs unfolded Sylvester residual
    std::vector<double> partial_norms;

    bool passes(double tol) const {
        return max_cross_orthogonality <= tol && pythagoras_error <= tol &&
               max_unfolding_mismatch <= tol;
    }
};

/// Test-scale verification of the residual decomposition: builds the
/// vectorized residual explicitly, projects it onto the per-mode subspaces,
/// and cross-checks orthogonality, the Pythagorean identity, and the
/// per-mode unfolding formula.
DecompositionReport residual_decomposition_check(const std::vector<BlockKrylovBasis>& bases,
                                                 const std::vector<OperatorPtr>& ops,
                                                 const DenseTensor& y, const TuckerTensor& c,
                                                 Index element_budget = kDefaultDenseBudget);

}  // namespace tbrk
