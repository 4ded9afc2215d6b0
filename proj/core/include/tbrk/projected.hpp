#pragma once

#include <variant>
#include <vector>

#include "tbrk/tensor.hpp"
#include "tbrk/types.hpp"

namespace tbrk {

/// Small projected equation sum_i Y x_i A_i = C with dense coefficient
/// matrices and a dense or TT right-hand side.
struct ProjectedProblem {
    std::vector<Matrix> coeffs;
    std::variant<DenseTensor, TTTensor> rhs;

    void validate() const;
    std::vector<Index> sizes() const;
};

/// sum_i y x_i coeffs[i] for a dense tensor.
DenseTensor apply_sylvester_operator(const std::vector<Matrix>& coeffs, const DenseTensor& y);

/// Same action in TT form; bond ranks double (rank-2 operator train).
TTTensor apply_sylvester_operator(const std::vector<Matrix>& coeffs, const TTTensor& y);

/// Explicit Kronecker-sum matrix of the operator (oracles, vectorized path).
Matrix assemble_kron_sum(const std::vector<Matrix>& coeffs);

/// Direct solve by per-mode eigendecomposition: transform the rhs into the
/// eigenbases, divide by the eigenvalue sums, transform back. Verifies its
/// own residual (<= 1e-10 relative, one refinement pass allowed).
/// Throws SingularOperator on a (near-)zero eigenvalue sum and
/// IllConditioned when an eigenvector basis is too ill-conditioned; callers
/// fall back to solve_dense_vectorized.
DenseTensor solve_dense_diag(const ProjectedProblem& p);

/// Fallback and oracle: assemble the Kronecker-sum matrix and solve
/// directly. Throws SizeOverflow past the unknown budget.
DenseTensor solve_dense_vectorized(const ProjectedProblem& p, Index budget = 20000);

struct TTSolveOptions {
    double tol = 1e-8;        ///< relative operator-residual target
    int max_sweeps = 50;      ///< one-directional half sweeps
    Index enrich_rank = 3;    ///< residual enrichment rank per bond
    Index max_rank = 256;     ///< hard cap on solution bond ranks
};

struct TTSolveReport {
    double achieved = 0.0;  ///< relative residual of the returned iterate
    int sweeps = 0;
    bool stagnated = false;
};

/// Alternating one-site solver for the Laplace-like projected equation with
/// residual-based rank enrichment. Returns the best iterate; stagnation is
/// reported, not thrown. warm_start, when given with matching dimensions,
/// seeds the iteration instead of the rhs.
TTTensor solve_tt_als(const ProjectedProblem& p, const TTSolveOptions& opt,
                      TTSolveReport* report = nullptr, const TTTensor* warm_start = nullptr);

}  // namespace tbrk
