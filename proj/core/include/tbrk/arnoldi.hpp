#pragma once

#include <optional>
#include <vector>

#include "tbrk/linalg.hpp"
#include "tbrk/operators.hpp"
#include "tbrk/types.hpp"

namespace tbrk {

/// Extended complex shift. An exactly zero finite value requests the
/// inverse step w = A^{-1} v (the `ext` strategy); any other finite value
/// the shift-and-invert step w = (I - A/xi)^{-1} A v; infinity the
/// polynomial step w = A v.
struct Pole {
    Complex value{0.0, 0.0};
    bool infinite = false;

    static Pole inf() { return {Complex(0.0, 0.0), true}; }
    static Pole finite(Complex v) { return {v, false}; }

    bool is_zero() const { return !infinite && value == Complex(0.0, 0.0); }
};

bool operator==(const Pole& a, const Pole& b);

/// Orthonormal block basis of a block rational Krylov space together with
/// the Hessenberg pencil (H_under, K_under) satisfying A V K_under = V H_under.
/// V holds b*(k+1) columns for k completed expansion steps; poles has k+1
/// entries and always starts with infinity.
struct BlockKrylovBasis {
    Matrix v;
    Matrix h_under;  ///< b(k+1) x bk, block upper Hessenberg
    Matrix k_under;  ///< b(k+1) x bk, block upper Hessenberg
    std::vector<Pole> poles;
    Index block_size = 0;

    Index num_blocks() const { return static_cast<Index>(poles.size()); }
    Index steps() const { return num_blocks() - 1; }
    Index dim() const { return v.rows(); }

    /// First k blocks: the Galerkin space, excluding the trailing block.
    Matrix galerkin_basis() const { return v.leftCols(block_size * steps()); }
};

/// Start a basis on the columns of c with the leading infinite pole, so the
/// first block spans c exactly.
BlockKrylovBasis arnoldi_init(const LinearOperator& a, const Matrix& c);

/// One block expansion with the given pole. Classical block Gram-Schmidt
/// with one reorthogonalization pass; throws SingularMatrix when the pole
/// hits the spectrum and DeflationError when the new block is numerically
/// inside the current span (or the space is already full).
BlockKrylovBasis arnoldi_expand(const BlockKrylovBasis& basis, const LinearOperator& a,
                                const Pole& xi);

/// Returns a basis whose trailing pole is infinite: unchanged if it already
/// is, otherwise grown by one appended infinity block (the checkpoint-and-
/// replace scheme; callers re-expand from the pre-append state next round).
BlockKrylovBasis ensure_trailing_infinity(const BlockKrylovBasis& basis,
                                          const LinearOperator& a);

/// V_k^H A V_k over the Galerkin columns (trailing block excluded),
/// symmetrized when A is Hermitian.
Matrix projected_matrix(const BlockKrylovBasis& basis, const LinearOperator& a);

/// Conjugate bookkeeping for real problems: after a non-real pole is
/// consumed the next scheduled pole is forced to its conjugate.
class ConjugatePairScheduler {
public:
    Pole next(const Pole& requested);
    bool has_pending() const { return pending_.has_value(); }

private:
    std::optional<Complex> pending_;
};

}  // namespace tbrk
