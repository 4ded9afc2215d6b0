#include "tbrk/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <Eigen/LU>
#include <Eigen/QR>

namespace tbrk {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> slice(const DenseTensor& car, Index j) {
    const Index rp = car.dim(0), n = car.dim(1), rn = car.dim(2);
    return {car.data().data() + rp * j, rp, rn, Eigen::OuterStride<>(rp * n)};
}

Eigen::Map<Matrix, 0, Eigen::OuterStride<>> slice(DenseTensor& car, Index j) {
    const Index rp = car.dim(0), n = car.dim(1), rn = car.dim(2);
    return {car.data().data() + rp * j, rp, rn, Eigen::OuterStride<>(rp * n)};
}

/// Trailing block row of H_under * K^{-1} for a trailing-infinity basis.
Matrix residual_row(const BlockKrylovBasis& basis) {
    const Index b = basis.block_size;
    const Index k = basis.steps();
    const Matrix kk = basis.k_under.topRows(b * k);
    const Matrix bottom = basis.h_under.bottomRows(b);
    Eigen::PartialPivLU<Matrix> lu(kk.transpose());
    const auto diag = lu.matrixLU().diagonal();
    double max_piv = 0.0, min_piv = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < diag.size(); ++i) {
        const double p = std::abs(diag(i));
        max_piv = std::max(max_piv, p);
        min_piv = std::min(min_piv, p);
    }
    if (max_piv == 0.0 || min_piv <= 1e-14 * max_piv) {
        throw SingularMatrix("cheap residual: K head is numerically singular");
    }
    return lu.solve(bottom.transpose()).transpose();
}

void check_residual_preconditions(const BlockKrylovBasis& basis) {
    if (basis.steps() < 1) {
        throw PreconditionViolation("cheap residual: basis has no completed step");
    }
    if (!basis.poles.front().infinite) {
        throw PreconditionViolation("cheap residual: leading pole must be infinite");
    }
    if (!basis.poles.back().infinite) {
        throw PreconditionViolation("cheap residual: trailing pole must be infinite");
    }
}

}  // namespace

ResidualNorms cheap_residual_norm(const std::vector<BlockKrylovBasis>& bases,
                                  const DenseTensor& y, const std::vector<bool>& exact_modes) {
    const int d = static_cast<int>(bases.size());
    if (y.order() != d) throw DimensionMismatch("cheap residual: order mismatch");
    ResidualNorms out;
    out.per_mode.resize(static_cast<size_t>(d), 0.0);
    double sq = 0.0;
    for (int i = 0; i < d; ++i) {
        if (!exact_modes.empty() && exact_modes[static_cast<size_t>(i)]) continue;
        const auto& basis = bases[static_cast<size_t>(i)];
        check_residual_preconditions(basis);
        if (y.dim(i) != basis.block_size * basis.steps()) {
            throw DimensionMismatch("cheap residual: core size does not match basis");
        }
        const Matrix s = residual_row(basis);
        const double term = mode_product(y, s, i).norm();
        out.per_mode[static_cast<size_t>(i)] = term;
        sq += term * term;
    }
    out.total = std::sqrt(sq);
    return out;
}

ResidualNorms cheap_residual_norm(const std::vector<BlockKrylovBasis>& bases, const TTTensor& y,
                                  const std::vector<bool>& exact_modes) {
    const int d = static_cast<int>(bases.size());
    if (y.order() != d) throw DimensionMismatch("cheap residual: order mismatch");
    ResidualNorms out;
    out.per_mode.resize(static_cast<size_t>(d), 0.0);
    double sq = 0.0;
    for (int i = 0; i < d; ++i) {
        if (!exact_modes.empty() && exact_modes[static_cast<size_t>(i)]) continue;
        const auto& basis = bases[static_cast<size_t>(i)];
        check_residual_preconditions(basis);
        if (y.dims()[static_cast<size_t>(i)] != basis.block_size * basis.steps()) {
            throw DimensionMismatch("cheap residual: core size does not match basis");
        }
        const Matrix s = residual_row(basis);
        const double term = frob_norm(tt_mode_multiply(y, s, i));
        out.per_mode[static_cast<size_t>(i)] = term;
        sq += term * term;
    }
    out.total = std::sqrt(sq);
    return out;
}

namespace {

DenseTensor operator_mode_apply(const LinearOperator& a, const DenseTensor& x, int mode) {
    Matrix u = a.apply(unfold(x, mode));
    auto shape = x.shape();
    shape[static_cast<size_t>(mode)] = u.rows();
    return fold(u, shape, mode);
}

/// Rank-2 operator-train application of sum_i (apply at mode i, identity
/// elsewhere); apply_mode(i, carriage) returns the carriage with its
/// physical index transformed.
template <typename ApplyFn>
TTTensor mpo_apply_generic(ApplyFn&& apply_mode, const TTTensor& y) {
    const int d = y.order();
    if (d == 1) {
        return TTTensor({apply_mode(0, y.carriage(0))});
    }
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        const DenseTensor& g = y.carriage(i);
        const DenseTensor ag = apply_mode(i, g);
        const Index rp = g.dim(0), n = g.dim(1), rn = g.dim(2);
        if (i == 0) {
            DenseTensor z({1, n, 2 * rn});
            for (Index j = 0; j < n; ++j) {
                slice(z, j).leftCols(rn) = slice(g, j);
                slice(z, j).rightCols(rn) = slice(ag, j);
            }
            cars.push_back(std::move(z));
        } else if (i == d - 1) {
            DenseTensor z({2 * rp, n, 1});
            for (Index j = 0; j < n; ++j) {
                slice(z, j).topRows(rp) = slice(ag, j);
                slice(z, j).bottomRows(rp) = slice(g, j);
            }
            cars.push_back(std::move(z));
        } else {
            DenseTensor z({2 * rp, n, 2 * rn});
            for (Index j = 0; j < n; ++j) {
                auto dst = slice(z, j);
                dst.topLeftCorner(rp, rn) = slice(g, j);
                dst.topRightCorner(rp, rn) = slice(ag, j);
                dst.bottomRightCorner(rp, rn) = slice(g, j);
            }
            cars.push_back(std::move(z));
        }
    }
    return TTTensor(std::move(cars));
}

TTTensor apply_operator_tt(const std::vector<OperatorPtr>& ops, const TTTensor& y) {
    return mpo_apply_generic(
        [&ops](int i, const DenseTensor& g) {
            return operator_mode_apply(*ops[static_cast<size_t>(i)], g, 1);
        },
        y);
}

}  // namespace

double explicit_residual_norm(const std::vector<OperatorPtr>& ops, const TuckerTensor& x,
                              const TuckerTensor& c, Index element_budget) {
    const int d = static_cast<int>(ops.size());
    if (x.order() != d || c.order() != d) {
        throw DimensionMismatch("explicit residual: order mismatch");
    }
    Index total = 1;
    bool dense_ok = true;
    for (int i = 0; i < d; ++i) {
        total *= x.factor(i).rows();
        if (total > element_budget) {
            dense_ok = false;
            break;
        }
    }
    if (dense_ok) {
        DenseTensor r = tucker_full(c);
        const DenseTensor xd = tucker_full(x);
        for (int i = 0; i < d; ++i) {
            r -= operator_mode_apply(*ops[static_cast<size_t>(i)], xd, i);
        }
        return r.norm();
    }

    // Format-aware path: residual as one concatenated Tucker tensor
    //   [c | -x xd_1 A_1 | ... ] with a Gram-based norm.
    std::vector<Matrix> factors(static_cast<size_t>(d));
    std::vector<Index> off_c(static_cast<size_t>(d)), off_v(static_cast<size_t>(d)),
        off_av(static_cast<size_t>(d)), widths(static_cast<size_t>(d));
    Index core_total = 1;
    for (int i = 0; i < d; ++i) {
        const Matrix& uc = c.factor(i);
        const Matrix& vx = x.factor(i);
        const Matrix av = ops[static_cast<size_t>(i)]->apply(vx);
        Matrix f(uc.rows(), uc.cols() + 2 * vx.cols());
        f << uc, vx, av;
        factors[static_cast<size_t>(i)] = std::move(f);
        off_c[static_cast<size_t>(i)] = 0;
        off_v[static_cast<size_t>(i)] = uc.cols();
        off_av[static_cast<size_t>(i)] = uc.cols() + vx.cols();
        widths[static_cast<size_t>(i)] = uc.cols() + 2 * vx.cols();
        core_total *= widths[static_cast<size_t>(i)];
        if (core_total > element_budget) {
            throw SizeOverflow("explicit residual: combined core exceeds element budget");
        }
    }
    DenseTensor core(widths);
    // embed c.core at the leading corner
    {
        const auto& g = c.core();
        std::vector<Index> idx(static_cast<size_t>(d), 0);
        for (Index pos = 0; pos < g.size(); ++pos) {
            core.at(idx) = g.data()(pos);
            for (int i = 0; i < d; ++i) {
                auto& cur = idx[static_cast<size_t>(i)];
                if (cur + 1 < g.dim(i)) {
                    ++cur;
                    break;
                }
                cur = 0;
            }
        }
    }
    // embed -x.core once per operator term
    for (int term = 0; term < d; ++term) {
        const auto& g = x.core();
        std::vector<Index> idx(static_cast<size_t>(d), 0);
        std::vector<Index> target(static_cast<size_t>(d));
        for (Index pos = 0; pos < g.size(); ++pos) {
            for (int i = 0; i < d; ++i) {
                const Index off =
                    (i == term) ? off_av[static_cast<size_t>(i)] : off_v[static_cast<size_t>(i)];
                target[static_cast<size_t>(i)] = off + idx[static_cast<size_t>(i)];
            }
            core.at(target) -= g.data()(pos);
            for (int i = 0; i < d; ++i) {
                auto& cur = idx[static_cast<size_t>(i)];
                if (cur + 1 < g.dim(i)) {
                    ++cur;
                    break;
                }
                cur = 0;
            }
        }
    }
    DenseTensor tmp = core;
    for (int i = 0; i < d; ++i) {
        const Matrix gram = factors[static_cast<size_t>(i)].adjoint() * factors[static_cast<size_t>(i)];
        tmp = mode_product(tmp, gram, i);
    }
    const double sq = std::real(core.data().dot(tmp.data()));
    return std::sqrt(std::max(sq, 0.0));
}

double explicit_residual_norm(const std::vector<OperatorPtr>& ops, const TTTensor& x,
                              const TTTensor& c) {
    if (x.order() != static_cast<int>(ops.size()) || c.order() != x.order()) {
        throw DimensionMismatch("explicit residual: order mismatch");
    }
    TTTensor lx = apply_operator_tt(ops, x);
    TTTensor r = tt_add(c, tt_scale(std::move(lx), Complex(-1.0)));
    return frob_norm(r);
}

DecompositionReport residual_decomposition_check(const std::vector<BlockKrylovBasis>& bases,
                                                 const std::vector<OperatorPtr>& ops,
                                                 const DenseTensor& y, const TuckerTensor& c,
                                                 Index element_budget) {
    const int d = static_cast<int>(ops.size());
    Index total = 1;
    for (int i = 0; i < d; ++i) {
        total *= ops[static_cast<size_t>(i)]->dim();
        if (total > element_budget) {
            throw SizeOverflow("residual decomposition check: dense size exceeds budget");
        }
    }

    std::vector<Matrix> vk(static_cast<size_t>(d));
    std::vector<Matrix> dense_ops(static_cast<size_t>(d));
    std::vector<Matrix> proj(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        const auto& basis = bases[static_cast<size_t>(i)];
        check_residual_preconditions(basis);
        vk[static_cast<size_t>(i)] = basis.galerkin_basis();
        dense_ops[static_cast<size_t>(i)] =
            ops[static_cast<size_t>(i)]->dense(element_budget * element_budget);
        proj[static_cast<size_t>(i)] = projected_matrix(basis, *ops[static_cast<size_t>(i)]);
    }

    const DenseTensor c_dense = tucker_full(c);
    const Vector cvec = c_dense.data();
    const Matrix big = assemble_kron_sum(dense_ops);
    const Vector xvec = kron_apply(vk, y.data());
    const Vector r = cvec - big * xvec;
    const double rnorm = r.norm();

    DecompositionReport rep;
    rep.rhs_norm = cvec.norm();
    rep.residual_norm = rnorm;

    // per-mode projections V_bar_i V_bar_i^H r
    std::vector<Vector> partials(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        std::vector<Matrix> down(static_cast<size_t>(d)), up(static_cast<size_t>(d));
        for (int j = 0; j < d; ++j) {
            if (j == i) {
                const Index nj = ops[static_cast<size_t>(j)]->dim();
                down[static_cast<size_t>(j)] = Matrix::Identity(nj, nj);
                up[static_cast<size_t>(j)] = Matrix::Identity(nj, nj);
            } else {
                down[static_cast<size_t>(j)] = vk[static_cast<size_t>(j)].adjoint();
                up[static_cast<size_t>(j)] = vk[static_cast<size_t>(j)];
            }
        }
        partials[static_cast<size_t>(i)] = kron_apply(up, kron_apply(down, r));
    }

    // remainder via the projector product, and via r minus the partial sum
    Vector chat = cvec;
    for (int i = 0; i < d; ++i) {
        std::vector<Matrix> down(static_cast<size_t>(d)), up(static_cast<size_t>(d));
        for (int j = 0; j < d; ++j) {
            if (j == i) {
                const Index nj = ops[static_cast<size_t>(j)]->dim();
                down[static_cast<size_t>(j)] = Matrix::Identity(nj, nj);
                up[static_cast<size_t>(j)] = Matrix::Identity(nj, nj);
            } else {
                down[static_cast<size_t>(j)] = vk[static_cast<size_t>(j)].adjoint();
                up[static_cast<size_t>(j)] = vk[static_cast<size_t>(j)];
            }
        }
        chat -= kron_apply(up, kron_apply(down, chat));
    }
    Vector chat2 = r;
    for (int i = 0; i < d; ++i) chat2 -= partials[static_cast<size_t>(i)];
    rep.remainder_norm = std::max(chat.norm(), chat2.norm());

    const double r2 = rnorm * rnorm;
    double cross = 0.0;
    double pyth = rep.remainder_norm * rep.remainder_norm;
    rep.partial_norms.resize(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        const double pn = partials[static_cast<size_t>(i)].norm();
        rep.partial_norms[static_cast<size_t>(i)] = pn;
        pyth += pn * pn;
        for (int j = i + 1; j < d; ++j) {
            cross = std::max(cross,
                             std::abs(partials[static_cast<size_t>(i)].dot(
                                 partials[static_cast<size_t>(j)])));
        }
        cross = std::max(cross, std::abs(partials[static_cast<size_t>(i)].dot(chat)));
    }
    rep.max_cross_orthogonality = r2 > 0.0 ? cross / r2 : 0.0;
    rep.pythagoras_error = r2 > 0.0 ? std::abs(r2 - pyth) / r2 : 0.0;

    // per-mode unfolded Sylvester residual, built independently
    double mismatch = 0.0;
    for (int i = 0; i < d; ++i) {
        // C_bar_i = C x_j V_j^H (j != i), Y_bar = Y x_i V_i
        DenseTensor cbar = c_dense;
        for (int j = 0; j < d; ++j) {
            if (j != i) cbar = mode_product(cbar, vk[static_cast<size_t>(j)].adjoint(), j);
        }
        DenseTensor ybar = mode_product(y, vk[static_cast<size_t>(i)], i);
        std::vector<Matrix> others;
        for (int j = 0; j < d; ++j) {
            if (j != i) others.push_back(proj[static_cast<size_t>(j)]);
        }
        const Matrix bi = assemble_kron_sum(others);
        const Matrix ri = unfold(cbar, i) -
                          dense_ops[static_cast<size_t>(i)] * unfold(ybar, i) -
                          unfold(ybar, i) * bi.transpose();
        mismatch = std::max(mismatch,
                            std::abs(ri.norm() - rep.partial_norms[static_cast<size_t>(i)]));
    }
    rep.max_unfolding_mismatch = rnorm > 0.0 ? mismatch / rnorm : mismatch;
    return rep;
}

// ---------------------------------------------------------------------------
// Outer Galerkin loop
// ---------------------------------------------------------------------------

namespace {

struct ModeState {
    BlockKrylovBasis core;
    BlockKrylovBasis ext;
    bool has_ext = false;
    bool invariant = false;  ///< span is A-invariant: zero residual share
    bool saturated = false;  ///< no further growth possible
    int iterations = 1;
    ConjugatePairScheduler scheduler;
    Vector ritz;  ///< eigenvalues of the current projected matrix
    Matrix projected;
};

struct OuterContext {
    const std::vector<OperatorPtr>& ops;
    const TbrkConfig& cfg;
    int d;
    bool shared;                 ///< one basis serves every mode
    std::vector<int> rep;        ///< mode -> owning state index
    std::vector<ModeState> st;   ///< one entry per unique mode
    FovSurrogate surrogate;
    bool adaptive;

    OuterContext(const std::vector<OperatorPtr>& ops_, const TbrkConfig& cfg_, int d_,
                 bool shared_)
        : ops(ops_),
          cfg(cfg_),
          d(d_),
          shared(shared_),
          rep(static_cast<size_t>(d_), 0),
          surrogate(d_),
          adaptive(cfg_.strategy.kind == PoleStrategyKind::det ||
                   cfg_.strategy.kind == PoleStrategyKind::det2) {
        if (!shared) {
            for (int i = 0; i < d; ++i) rep[static_cast<size_t>(i)] = i;
        }
        st.resize(shared ? 1 : static_cast<size_t>(d));
    }

    int unique_count() const { return static_cast<int>(st.size()); }
    const LinearOperator& op(int u) const { return *ops[static_cast<size_t>(u)]; }

    /// Pole for state u at outer iteration t (>= 2), before pairing.
    Pole request_pole(int u) {
        auto& s = st[static_cast<size_t>(u)];
        switch (cfg.strategy.kind) {
            case PoleStrategyKind::poly:
            case PoleStrategyKind::ext:
                return next_pole_static(cfg.strategy.kind,
                                        static_cast<Index>(s.core.poles.size()));
            case PoleStrategyKind::det:
                return next_pole_det(surrogate, u, s.core.poles, s.ritz, s.core.block_size,
                                     cfg.strategy.boundary_sample_count);
            case PoleStrategyKind::det2:
                return next_pole_det2(surrogate, u, s.core.poles, s.ritz, s.core.block_size,
                                      s.iterations, cfg.strategy.boundary_sample_count);
        }
        return Pole::inf();
    }

    /// Expand state u with the scheduled pole; returns the pole actually
    /// consumed, or nullopt when the mode deflated.
    std::optional<Pole> grow(int u) {
        auto& s = st[static_cast<size_t>(u)];
        Pole requested = request_pole(u);
        Pole pole = (cfg.real_mode && op(u).is_real()) ? s.scheduler.next(requested) : requested;
        try {
            if (pole.infinite && s.has_ext) {
                s.core = s.ext;  // the appended residual block is exactly this step
            } else {
                s.core = arnoldi_expand(s.core, op(u), pole);
            }
            s.has_ext = false;
            ++s.iterations;
            return pole;
        } catch (const DeflationError&) {
            s.saturated = true;
            return std::nullopt;
        }
    }

    /// Refresh the trailing-infinity extension, the projected matrix, the
    /// Ritz values (adaptive only), and the surrogate clouds. No-op when the
    /// state is unchanged since the previous round.
    void refresh(int u) {
        auto& s = st[static_cast<size_t>(u)];
        if (s.has_ext) return;
        try {
            s.ext = arnoldi_expand(s.core, op(u), Pole::inf());
            s.invariant = false;
            s.projected = projected_matrix(s.ext, op(u));
        } catch (const DeflationError&) {
            // Mode cannot host the residual block: either the span is
            // A-invariant (zero share) or it merely filled up, in which case
            // its share is evaluated explicitly by the driver.
            s.ext = s.core;
            s.saturated = true;
            const Matrix av = op(u).apply(s.core.v);
            Matrix proj = s.core.v.adjoint() * av;
            const double defect = (av - s.core.v * proj).norm();
            s.invariant = defect <= 1e-10 * std::max(av.norm(), 1e-300);
            if (op(u).is_hermitian()) proj = 0.5 * (proj + proj.adjoint()).eval();
            s.projected = std::move(proj);
        }
        s.has_ext = true;
        if (adaptive) {
            s.ritz = eig_dense(s.projected).values;
            for (int i = 0; i < d; ++i) {
                if (rep[static_cast<size_t>(i)] == u) {
                    surrogate.update_eigenvalues(i, -s.ritz);
                }
            }
        }
    }

    std::vector<BlockKrylovBasis> residual_bases() const {
        std::vector<BlockKrylovBasis> out;
        out.reserve(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) {
            const auto& s = st[static_cast<size_t>(rep[static_cast<size_t>(i)])];
            out.push_back(s.saturated ? s.core : s.ext);
        }
        return out;
    }

    /// Modes whose share the cheap pencil formula must skip (invariant ones
    /// contribute zero; merely saturated ones are added back explicitly).
    std::vector<bool> skipped_modes() const {
        std::vector<bool> out(static_cast<size_t>(d), false);
        for (int i = 0; i < d; ++i) {
            out[static_cast<size_t>(i)] =
                st[static_cast<size_t>(rep[static_cast<size_t>(i)])].saturated;
        }
        return out;
    }

    bool needs_explicit_share(int i) const {
        const auto& s = st[static_cast<size_t>(rep[static_cast<size_t>(i)])];
        return s.saturated && !s.invariant;
    }

    std::vector<Matrix> projected_coeffs() const {
        std::vector<Matrix> out;
        out.reserve(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) {
            out.push_back(st[static_cast<size_t>(rep[static_cast<size_t>(i)])].projected);
        }
        return out;
    }

    std::vector<int> mode_iterations() const {
        std::vector<int> out(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) {
            out[static_cast<size_t>(i)] =
                st[static_cast<size_t>(rep[static_cast<size_t>(i)])].iterations;
        }
        return out;
    }

    double mean_iteration() const {
        const auto k = mode_iterations();
        double m = 0.0;
        for (int v : k) m += v;
        return m / static_cast<double>(d);
    }
};

constexpr Index kSaturatedShareBudget = 4'000'000;

/// Residual share of a saturated (non-invariant) mode, evaluated from the
/// semi-projected equation directly: || C_bar_i - A_i-term - sum_j P_j-term ||.
double tucker_saturated_share(const OuterContext& ctx, const TuckerTensor& c,
                              const DenseTensor& y, int mode) {
    const auto& sm = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(mode)])];
    Index total = 1;
    for (int j = 0; j < ctx.d; ++j) {
        total *= (j == mode) ? ctx.ops[static_cast<size_t>(j)]->dim() : y.dim(j);
        if (total > kSaturatedShareBudget) {
            throw SizeOverflow("saturated mode: explicit residual share too large");
        }
    }
    DenseTensor cbar = c.core();
    for (int j = 0; j < ctx.d; ++j) {
        const auto& sj = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(j)])];
        const Matrix w = (j == mode) ? c.factor(j) : Matrix(sj.core.v.adjoint() * c.factor(j));
        cbar = mode_product(cbar, w, j);
    }
    const DenseTensor yb = mode_product(y, sm.core.v, mode);
    DenseTensor r = std::move(cbar);
    r -= operator_mode_apply(*ctx.ops[static_cast<size_t>(mode)], yb, mode);
    for (int j = 0; j < ctx.d; ++j) {
        if (j == mode) continue;
        const auto& sj = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(j)])];
        r -= mode_product(yb, sj.projected, j);
    }
    return r.norm();
}

double tt_saturated_share(const OuterContext& ctx, const TTTensor& c, const TTTensor& y,
                          int mode) {
    const auto& sm = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(mode)])];
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(ctx.d));
    for (int j = 0; j < ctx.d; ++j) {
        if (j == mode) {
            cars.push_back(c.carriage(j));
        } else {
            const auto& sj = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(j)])];
            cars.push_back(mode_product(c.carriage(j), sj.core.v.adjoint(), 1));
        }
    }
    TTTensor cbar(std::move(cars));
    const TTTensor yb = tt_mode_multiply(y, sm.core.v, mode);
    TTTensor l = mpo_apply_generic(
        [&](int j, const DenseTensor& g) {
            if (j == mode) {
                return operator_mode_apply(*ctx.ops[static_cast<size_t>(j)], g, 1);
            }
            const auto& sj = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(j)])];
            return mode_product(g, sj.projected, 1);
        },
        yb);
    return frob_norm(tt_add(cbar, tt_scale(std::move(l), Complex(-1.0))));
}

bool detect_shared(const std::vector<OperatorPtr>& ops, const std::vector<Matrix>& blocks) {
    for (size_t i = 1; i < ops.size(); ++i) {
        if (!ops[0]->structurally_equal(*ops[i])) return false;
        if (blocks[i].rows() != blocks[0].rows() || blocks[i].cols() != blocks[0].cols() ||
            !(blocks[i].array() == blocks[0].array()).all()) {
            return false;
        }
    }
    return true;
}

/// Range-revealing compression of a starting block (column-pivoted QR).
Matrix compress_block(const Matrix& c) {
    Eigen::ColPivHouseholderQR<Matrix> qr(c);
    const double thresh = qr_deflation_threshold(c);
    Index rank = 0;
    const auto& r = qr.matrixR();
    for (Index i = 0; i < std::min(r.rows(), r.cols()); ++i) {
        if (std::abs(r(i, i)) >= thresh) ++rank;
    }
    if (rank == 0) {
        throw DeflationExhausted("starting block vector is numerically zero");
    }
    Matrix q = qr.householderQ() * Matrix::Identity(c.rows(), rank);
    return q;
}

}  // namespace

SolveResult tuck_tbrk(const std::vector<OperatorPtr>& ops, const TuckerTensor& c,
                      const TbrkConfig& cfg) {
    const int d = static_cast<int>(ops.size());
    if (d < 2) throw DimensionMismatch("tuck_tbrk: need at least two modes");
    if (c.order() != d) throw DimensionMismatch("tuck_tbrk: rhs order mismatch");
    if (!(cfg.tolerance > 0.0 && cfg.tolerance < 1.0)) {
        throw PreconditionViolation("tuck_tbrk: tolerance must lie in (0,1)");
    }
    if (cfg.max_iterations < 1) {
        throw PreconditionViolation("tuck_tbrk: max_iterations must be positive");
    }
    for (int i = 0; i < d; ++i) {
        if (ops[static_cast<size_t>(i)]->dim() != c.factor(i).rows()) {
            throw DimensionMismatch("tuck_tbrk: operator/rhs size mismatch");
        }
    }

    const auto t0 = Clock::now();
    SolveResult result;
    const double normc = frob_norm(c);
    if (normc == 0.0) {
        result.solution = TuckerTensor::zero(c.shape());
        result.status = SolveStatus::converged;
        result.final_residual = 0.0;
        result.mode_iterations.assign(static_cast<size_t>(d), 1);
        TraceRow row;
        row.iteration = 1;
        row.mean_iteration = 1.0;
        row.rel_residual = 0.0;
        row.per_mode_norms.assign(static_cast<size_t>(d), 0.0);
        row.mode_iterations = result.mode_iterations;
        row.seconds = seconds_since(t0);
        result.trace.rows.push_back(row);
        if (cfg.trace_sink) cfg.trace_sink(row);
        return result;
    }

    std::vector<Matrix> blocks(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) blocks[static_cast<size_t>(i)] = c.factor(i);
    const bool shared = detect_shared(ops, blocks);
    OuterContext ctx(ops, cfg, d, shared);
    for (int u = 0; u < ctx.unique_count(); ++u) {
        ctx.st[static_cast<size_t>(u)].core = arnoldi_init(ctx.op(u), blocks[static_cast<size_t>(u)]);
    }

    DenseTensor y({1});
    double rel = std::numeric_limits<double>::infinity();
    ResidualNorms norms;
    result.status = SolveStatus::max_iterations;

    for (int t = 1; t <= cfg.max_iterations; ++t) {
        std::vector<Pole> consumed;
        if (t >= 2) {
            bool pending_any = false;
            for (const auto& s : ctx.st) pending_any |= s.scheduler.has_pending();
            bool grew = false;
            for (int u = 0; u < ctx.unique_count(); ++u) {
                auto& s = ctx.st[static_cast<size_t>(u)];
                if (s.saturated) continue;
                if (pending_any && !s.scheduler.has_pending()) continue;
                if (auto pole = ctx.grow(u)) {
                    consumed.push_back(*pole);
                    grew = true;
                }
            }
            if (!grew) {
                result.status = SolveStatus::deflated;
                break;
            }
        }

        // Trailing-infinity extensions, projections, surrogate, rhs, solve.
        // One retry with a radially perturbed latest pole on a singular
        // projected operator.
        bool solved = false;
        for (int attempt = 0; attempt < 2 && !solved; ++attempt) {
            for (int u = 0; u < ctx.unique_count(); ++u) ctx.refresh(u);

            DenseTensor rhs = c.core();
            for (int i = 0; i < d; ++i) {
                const auto& s = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(i)])];
                rhs = mode_product(rhs, s.core.v.adjoint() * c.factor(i), i);
            }
            try {
                ProjectedProblem p{ctx.projected_coeffs(), std::move(rhs)};
                try {
                    y = solve_dense_diag(p);
                } catch (const IllConditioned&) {
                    y = solve_dense_vectorized(p, std::max<Index>(cfg.dense_budget, 1));
                }
                solved = true;
            } catch (const SingularOperator&) {
                if (attempt == 1 || t < 2) throw;
                bool perturbed = false;
                for (auto& s : ctx.st) {
                    if (s.core.poles.back().infinite || s.core.steps() < 1) continue;
                    // rebuild the last step with a 10% radial perturbation
                    BlockKrylovBasis trimmed = s.core;
                    const Pole last = trimmed.poles.back();
                    const Index b = trimmed.block_size;
                    trimmed.v = trimmed.v.leftCols(trimmed.v.cols() - b).eval();
                    trimmed.h_under = trimmed.h_under
                                          .topLeftCorner(trimmed.v.cols(), trimmed.h_under.cols() - b)
                                          .eval();
                    trimmed.k_under = trimmed.k_under
                                          .topLeftCorner(trimmed.v.cols(), trimmed.k_under.cols() - b)
                                          .eval();
                    trimmed.poles.pop_back();
                    s.core = arnoldi_expand(trimmed, ctx.op(static_cast<int>(&s - ctx.st.data())),
                                            Pole::finite(last.value * 1.1));
                    s.has_ext = false;
                    perturbed = true;
                }
                if (!perturbed) throw;
            }
        }

        norms = cheap_residual_norm(ctx.residual_bases(), y, ctx.skipped_modes());
        double total_sq = norms.total * norms.total;
        for (int i = 0; i < d; ++i) {
            if (ctx.needs_explicit_share(i)) {
                const double term = tucker_saturated_share(ctx, c, y, i);
                norms.per_mode[static_cast<size_t>(i)] = term;
                total_sq += term * term;
            }
        }
        norms.total = std::sqrt(total_sq);
        rel = norms.total / normc;

        TraceRow row;
        row.iteration = t;
        row.mean_iteration = ctx.mean_iteration();
        row.rel_residual = rel;
        row.per_mode_norms = norms.per_mode;
        row.mode_iterations = ctx.mode_iterations();
        row.poles_used = consumed;
        row.seconds = seconds_since(t0);
        result.trace.rows.push_back(row);
        if (cfg.trace_sink) cfg.trace_sink(row);

        if (rel <= cfg.tolerance) {
            result.status = SolveStatus::converged;
            break;
        }
        bool all_saturated = true;
        for (const auto& s : ctx.st) all_saturated &= s.saturated;
        if (all_saturated) {
            result.status = SolveStatus::deflated;
            break;
        }
    }

    std::vector<Matrix> vfactors(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        vfactors[static_cast<size_t>(i)] =
            ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(i)])].core.v;
    }
    result.solution = TuckerTensor(y, std::move(vfactors));
    result.final_residual = rel;
    result.mode_iterations = ctx.mode_iterations();
    return result;
}

namespace {

/// Zero-pad the physical index of a TT core from m_old to m_new.
DenseTensor pad_carriage(const DenseTensor& car, Index m_new) {
    const Index rp = car.dim(0), m_old = car.dim(1), rn = car.dim(2);
    DenseTensor out({rp, m_new, rn});
    for (Index j = 0; j < m_old; ++j) slice(out, j) = slice(car, j);
    return out;
}

}  // namespace

SolveResult tt_tbrk(const std::vector<OperatorPtr>& ops, const TTTensor& c,
                    const TbrkConfig& cfg) {
    const int d = static_cast<int>(ops.size());
    if (d < 2) throw DimensionMismatch("tt_tbrk: need at least two modes");
    if (c.order() != d) throw DimensionMismatch("tt_tbrk: rhs order mismatch");
    if (!(cfg.tolerance > 0.0 && cfg.tolerance < 1.0)) {
        throw PreconditionViolation("tt_tbrk: tolerance must lie in (0,1)");
    }
    const auto dims = c.dims();
    for (int i = 0; i < d; ++i) {
        if (ops[static_cast<size_t>(i)]->dim() != dims[static_cast<size_t>(i)]) {
            throw DimensionMismatch("tt_tbrk: operator/rhs size mismatch");
        }
    }

    const auto t0 = Clock::now();
    SolveResult result;
    const double normc = frob_norm(c);
    if (normc == 0.0) {
        result.solution = TTTensor::zero(dims);
        result.status = SolveStatus::converged;
        result.final_residual = 0.0;
        result.mode_iterations.assign(static_cast<size_t>(d), 1);
        TraceRow row;
        row.iteration = 1;
        row.mean_iteration = 1.0;
        row.rel_residual = 0.0;
        row.per_mode_norms.assign(static_cast<size_t>(d), 0.0);
        row.mode_iterations = result.mode_iterations;
        row.seconds = seconds_since(t0);
        result.trace.rows.push_back(row);
        if (cfg.trace_sink) cfg.trace_sink(row);
        return result;
    }

    std::vector<Matrix> blocks(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        blocks[static_cast<size_t>(i)] = compress_block(block_vector_for_mode(c, i));
    }
    const bool shared = detect_shared(ops, blocks);
    OuterContext ctx(ops, cfg, d, shared);
    for (int u = 0; u < ctx.unique_count(); ++u) {
        ctx.st[static_cast<size_t>(u)].core = arnoldi_init(ctx.op(u), blocks[static_cast<size_t>(u)]);
    }

    TTTensor y = TTTensor::zero(dims);
    bool have_y = false;
    double rel = std::numeric_limits<double>::infinity();
    result.status = SolveStatus::max_iterations;

    for (int t = 1; t <= cfg.max_iterations; ++t) {
        std::vector<Pole> consumed;
        if (t >= 2) {
            bool pending_any = false;
            for (const auto& s : ctx.st) pending_any |= s.scheduler.has_pending();
            bool grew = false;
            for (int u = 0; u < ctx.unique_count(); ++u) {
                auto& s = ctx.st[static_cast<size_t>(u)];
                if (s.saturated) continue;
                if (pending_any && !s.scheduler.has_pending()) continue;
                if (auto pole = ctx.grow(u)) {
                    consumed.push_back(*pole);
                    grew = true;
                }
            }
            if (!grew) {
                result.status = SolveStatus::deflated;
                break;
            }
        }

        bool solved = false;
        bool stagnated = false;
        for (int attempt = 0; attempt < 2 && !solved; ++attempt) {
            for (int u = 0; u < ctx.unique_count(); ++u) ctx.refresh(u);

            // projected rhs: physical index of every carriage hit by V^H
            std::vector<DenseTensor> proj_cars;
            proj_cars.reserve(static_cast<size_t>(d));
            for (int i = 0; i < d; ++i) {
                const auto& s = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(i)])];
                proj_cars.push_back(
                    mode_product(c.carriage(i), s.core.v.adjoint(), 1));
            }
            TTTensor rhs_tt(std::move(proj_cars));
            const auto msizes = rhs_tt.dims();
            bool dense_ok = true;
            Index total = 1;
            for (Index m : msizes) {
                total *= m;
                if (total > cfg.dense_budget) {
                    dense_ok = false;
                    break;
                }
            }
            try {
                if (dense_ok) {
                    ProjectedProblem p{ctx.projected_coeffs(), tt_full(rhs_tt, cfg.dense_budget)};
                    DenseTensor yd;
                    try {
                        yd = solve_dense_diag(p);
                    } catch (const IllConditioned&) {
                        yd = solve_dense_vectorized(p, cfg.dense_budget);
                    }
                    y = tt_svd(yd, 1e-13);
                } else {
                    TTSolveOptions opt;
                    opt.tol = cfg.inner_tol_factor * cfg.tolerance;
                    opt.max_sweeps = cfg.inner_max_sweeps;
                    opt.enrich_rank = cfg.inner_enrich_rank;
                    ProjectedProblem p{ctx.projected_coeffs(), rhs_tt};
                    TTSolveReport rep;
                    TTTensor start = TTTensor::zero(msizes);
                    const TTTensor* warm = nullptr;
                    if (have_y && y.order() == d) {
                        std::vector<DenseTensor> padded;
                        padded.reserve(static_cast<size_t>(d));
                        bool ok = true;
                        const auto ydims = y.dims();
                        for (int i = 0; i < d && ok; ++i) {
                            if (ydims[static_cast<size_t>(i)] > msizes[static_cast<size_t>(i)]) {
                                ok = false;
                                break;
                            }
                            padded.push_back(
                                pad_carriage(y.carriage(i), msizes[static_cast<size_t>(i)]));
                        }
                        if (ok) {
                            start = TTTensor(std::move(padded));
                            warm = &start;
                        }
                    }
                    y = solve_tt_als(p, opt, &rep, warm);
                    stagnated = rep.stagnated;
                }
                have_y = true;
                solved = true;
            } catch (const SingularOperator&) {
                if (attempt == 1 || t < 2) throw;
                bool perturbed = false;
                for (auto& s : ctx.st) {
                    if (s.core.poles.back().infinite || s.core.steps() < 1) continue;
                    BlockKrylovBasis trimmed = s.core;
                    const Pole last = trimmed.poles.back();
                    const Index b = trimmed.block_size;
                    trimmed.v = trimmed.v.leftCols(trimmed.v.cols() - b).eval();
                    trimmed.h_under = trimmed.h_under
                                          .topLeftCorner(trimmed.v.cols(), trimmed.h_under.cols() - b)
                                          .eval();
                    trimmed.k_under = trimmed.k_under
                                          .topLeftCorner(trimmed.v.cols(), trimmed.k_under.cols() - b)
                                          .eval();
                    trimmed.poles.pop_back();
                    s.core = arnoldi_expand(trimmed, ctx.op(static_cast<int>(&s - ctx.st.data())),
                                            Pole::finite(last.value * 1.1));
                    s.has_ext = false;
                    perturbed = true;
                }
                if (!perturbed) throw;
            }
        }

        ResidualNorms norms = cheap_residual_norm(ctx.residual_bases(), y, ctx.skipped_modes());
        double total_sq = norms.total * norms.total;
        for (int i = 0; i < d; ++i) {
            if (ctx.needs_explicit_share(i)) {
                const double term = tt_saturated_share(ctx, c, y, i);
                norms.per_mode[static_cast<size_t>(i)] = term;
                total_sq += term * term;
            }
        }
        norms.total = std::sqrt(total_sq);
        rel = norms.total / normc;

        TraceRow row;
        row.iteration = t;
        row.mean_iteration = ctx.mean_iteration();
        row.rel_residual = rel;
        row.per_mode_norms = norms.per_mode;
        row.mode_iterations = ctx.mode_iterations();
        row.poles_used = consumed;
        row.inner_stagnation = stagnated;
        row.seconds = seconds_since(t0);
        result.trace.rows.push_back(row);
        if (cfg.trace_sink) cfg.trace_sink(row);

        if (rel <= cfg.tolerance) {
            result.status = SolveStatus::converged;
            break;
        }
        bool all_saturated = true;
        for (const auto& s : ctx.st) all_saturated &= s.saturated;
        if (all_saturated) {
            result.status = SolveStatus::deflated;
            break;
        }
    }

    // absorb the bases into the carriages
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        const auto& s = ctx.st[static_cast<size_t>(ctx.rep[static_cast<size_t>(i)])];
        cars.push_back(mode_product(y.carriage(i), s.core.v, 1));
    }
    result.solution = TTTensor(std::move(cars));
    result.final_residual = rel;
    result.mode_iterations = ctx.mode_iterations();
    return result;
}

}  // namespace tbrk
