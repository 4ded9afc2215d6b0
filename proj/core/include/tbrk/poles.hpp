#pragma once

#include <string>
#include <vector>

#include "tbrk/arnoldi.hpp"
#include "tbrk/linalg.hpp"
#include "tbrk/types.hpp"

namespace tbrk {

enum class PoleStrategyKind { poly, ext, det, det2 };

PoleStrategyKind pole_strategy_from_name(const std::string& name);
std::string pole_strategy_name(PoleStrategyKind kind);

struct PoleStrategy {
    PoleStrategyKind kind = PoleStrategyKind::det;
    int boundary_sample_count = 256;  ///< >= 32
};

/// Accumulated eigenvalue clouds of the negated projected matrices, one per
/// mode, with their convex hulls. The Minkowski sum of the hulls of the
/// other modes stands in for the numerical range the adaptive strategies
/// scan.
class FovSurrogate {
public:
    explicit FovSurrogate(int num_modes);

    int num_modes() const { return static_cast<int>(clouds_.size()); }
    bool empty(int mode) const { return clouds_.at(static_cast<size_t>(mode)).empty(); }

    /// Append the eigenvalues of -a_proj to cloud `mode` and refresh its hull.
    void update(int mode, const Matrix& a_proj);

    /// Same, for callers that already hold the eigenvalues of -A.
    void update_eigenvalues(int mode, const Vector& minus_eigs);

    const std::vector<Complex>& cloud(int mode) const {
        return clouds_.at(static_cast<size_t>(mode));
    }
    const ComplexPolygon& hull(int mode) const;

private:
    std::vector<std::vector<Complex>> clouds_;
    std::vector<ComplexPolygon> hulls_;
};

/// `count` arc-length-uniform points on the boundary of the Minkowski sum
/// of the hulls of all modes except `target_mode`. Degenerate sums (point,
/// segment) are sampled on their support, endpoints included.
std::vector<Complex> boundary_samples(const FovSurrogate& s, int target_mode, int count);

/// Greedy pole: conjugate of the boundary sample maximizing
///   b * sum_xi log|s - conj(xi)|  -  sum_mu log|s - conj(mu)|
/// over finite current poles xi and Ritz values mu of the target mode.
/// Ties break on the first sample index; samples colliding with a Ritz
/// value are discarded.
Pole next_pole_det(const FovSurrogate& s, int mode, const std::vector<Pole>& current_poles,
                   const Vector& ritz, Index block_size, int sample_count);

/// Variant with a short denominator: per sample the Ritz values are sorted
/// by distance and only every block_size-th of the first (k-1) strides
/// enters, giving a low-degree objective.
Pole next_pole_det2(const FovSurrogate& s, int mode, const std::vector<Pole>& current_poles,
                    const Vector& ritz, Index block_size, Index k, int sample_count);

/// poly: always infinity. ext: infinity for even j, zero for odd j.
Pole next_pole_static(PoleStrategyKind kind, Index j);

}  // namespace tbrk
