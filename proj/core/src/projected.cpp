#include "tbrk/projected.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "tbrk/errors.hpp"
#include "tbrk/linalg.hpp"

namespace tbrk {

void ProjectedProblem::validate() const {
    if (coeffs.empty()) throw DimensionMismatch("projected problem: no coefficients");
    const auto dims = sizes();
    const auto check = [&](const auto& tensor) {
        if (static_cast<size_t>(tensor.order()) != coeffs.size()) {
            throw DimensionMismatch("projected problem: rhs order mismatch");
        }
        const auto rdims = [&] {
            if constexpr (std::is_same_v<std::decay_t<decltype(tensor)>, TTTensor>) {
                return tensor.dims();
            } else {
                return tensor.shape();
            }
        }();
        for (size_t i = 0; i < coeffs.size(); ++i) {
            if (coeffs[i].rows() != coeffs[i].cols()) {
                throw DimensionMismatch("projected problem: coefficients must be square");
            }
            if (rdims[i] != dims[i]) {
                throw DimensionMismatch("projected problem: rhs mode size mismatch");
            }
        }
    };
    std::visit(check, rhs);
}

std::vector<Index> ProjectedProblem::sizes() const {
    std::vector<Index> out;
    out.reserve(coeffs.size());
    for (const Matrix& a : coeffs) out.push_back(a.rows());
    return out;
}

DenseTensor apply_sylvester_operator(const std::vector<Matrix>& coeffs, const DenseTensor& y) {
    DenseTensor out(y.shape());
    for (size_t i = 0; i < coeffs.size(); ++i) {
        out += mode_product(y, coeffs[i], static_cast<int>(i));
    }
    return out;
}

namespace {

Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> slice(const DenseTensor& car, Index j) {
    const Index rp = car.dim(0), n = car.dim(1), rn = car.dim(2);
    return {car.data().data() + rp * j, rp, rn, Eigen::OuterStride<>(rp * n)};
}

Eigen::Map<Matrix, 0, Eigen::OuterStride<>> slice(DenseTensor& car, Index j) {
    const Index rp = car.dim(0), n = car.dim(1), rn = car.dim(2);
    return {car.data().data() + rp * j, rp, rn, Eigen::OuterStride<>(rp * n)};
}

}  // namespace

TTTensor apply_sylvester_operator(const std::vector<Matrix>& coeffs, const TTTensor& y) {
    const int d = y.order();
    if (static_cast<size_t>(d) != coeffs.size()) {
        throw DimensionMismatch("apply_sylvester_operator: arity mismatch");
    }
    if (d == 1) {
        return TTTensor({mode_product(y.carriage(0), coeffs[0], 1)});
    }
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        const DenseTensor& g = y.carriage(i);
        const DenseTensor ag = mode_product(g, coeffs[static_cast<size_t>(i)], 1);
        const Index rp = g.dim(0), n = g.dim(1), rn = g.dim(2);
        if (i == 0) {
            // outgoing states: [not applied | applied]
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

Matrix assemble_kron_sum(const std::vector<Matrix>& coeffs) {
    const int d = static_cast<int>(coeffs.size());
    Index total = 1;
    for (const Matrix& a : coeffs) total *= a.rows();
    Matrix out = Matrix::Zero(total, total);
    for (int i = 0; i < d; ++i) {
        Matrix term = (i == 0) ? coeffs[0] : Matrix(Matrix::Identity(coeffs[0].rows(), coeffs[0].rows()));
        for (int j = 1; j < d; ++j) {
            const Matrix& f = (j == i)
                                  ? coeffs[static_cast<size_t>(j)]
                                  : Matrix(Matrix::Identity(coeffs[static_cast<size_t>(j)].rows(),
                                                            coeffs[static_cast<size_t>(j)].rows()));
            term = kron_dense(f, term);
        }
        out += term;
    }
    return out;
}

namespace {

/// Eigendecomposition prepared for repeated inverse application.
struct ModeEig {
    Vector lam;
    Matrix w;
    bool hermitian = false;
    Eigen::PartialPivLU<Matrix> lu;  // of w when not Hermitian
    double cond = 1.0;

    static ModeEig make(const Matrix& a, bool estimate_cond) {
        ModeEig m;
        m.hermitian = is_hermitian(a);
        auto eig = eig_dense(a);
        m.lam = std::move(eig.values);
        m.w = std::move(eig.vectors);
        if (!m.hermitian) {
            m.lu = Eigen::PartialPivLU<Matrix>(m.w);
            if (estimate_cond) {
                auto svd = svd_thin(m.w);
                const double smin = svd.s(svd.s.size() - 1);
                m.cond = smin > 0.0 ? svd.s(0) / smin
                                    : std::numeric_limits<double>::infinity();
            }
        }
        return m;
    }

    Matrix from_eigen_basis(const Matrix& x) const { return w * x; }
    Matrix to_eigen_basis(const Matrix& x) const {
        return hermitian ? Matrix(w.adjoint() * x) : Matrix(lu.solve(x));
    }
};

DenseTensor transform(const DenseTensor& x, const std::vector<ModeEig>& eigs, bool inverse) {
    DenseTensor cur = x;
    for (size_t i = 0; i < eigs.size(); ++i) {
        const int mode = static_cast<int>(i);
        Matrix u = unfold(cur, mode);
        u = inverse ? eigs[i].to_eigen_basis(u) : eigs[i].from_eigen_basis(u);
        auto shape = cur.shape();
        shape[i] = u.rows();
        cur = fold(u, shape, mode);
    }
    return cur;
}

/// Entrywise division by the eigenvalue sums, with a singularity guard.
void divide_by_eigensums(DenseTensor& z, const std::vector<ModeEig>& eigs, double coeff_scale) {
    const int d = z.order();
    std::vector<Index> idx(static_cast<size_t>(d), 0);
    const double threshold = 1e-13 * coeff_scale;
    Vector& data = z.data();
    for (Index pos = 0; pos < data.size(); ++pos) {
        Complex den = 0.0;
        for (int i = 0; i < d; ++i) den += eigs[static_cast<size_t>(i)].lam(idx[static_cast<size_t>(i)]);
        if (std::abs(den) < threshold) {
            throw SingularOperator("projected equation: eigenvalue sum below threshold");
        }
        data(pos) /= den;
        for (int i = 0; i < d; ++i) {
            auto& cur = idx[static_cast<size_t>(i)];
            if (cur + 1 < z.dim(i)) {
                ++cur;
                break;
            }
            cur = 0;
        }
    }
}

}  // namespace

DenseTensor solve_dense_diag(const ProjectedProblem& p) {
    p.validate();
    if (!std::holds_alternative<DenseTensor>(p.rhs)) {
        throw DimensionMismatch("solve_dense_diag: dense rhs required");
    }
    const DenseTensor& c = std::get<DenseTensor>(p.rhs);
    if (c.norm() == 0.0) return DenseTensor(c.shape());

    double coeff_scale = 0.0;
    for (const Matrix& a : p.coeffs) coeff_scale = std::max(coeff_scale, a.norm());

    std::vector<ModeEig> eigs;
    eigs.reserve(p.coeffs.size());
    for (const Matrix& a : p.coeffs) {
        eigs.push_back(ModeEig::make(a, /*estimate_cond=*/true));
        if (eigs.back().cond > 1e8) {
            throw IllConditioned("solve_dense_diag: eigenvector basis too ill-conditioned");
        }
    }

    const auto inner_solve = [&](const DenseTensor& rhs) {
        DenseTensor z = transform(rhs, eigs, /*inverse=*/true);
        divide_by_eigensums(z, eigs, coeff_scale);
        return transform(z, eigs, /*inverse=*/false);
    };

    DenseTensor y = inner_solve(c);
    DenseTensor r = c - apply_sylvester_operator(p.coeffs, y);
    double rel = r.norm() / c.norm();
    if (rel > 1e-10) {
        y += inner_solve(r);
        r = c - apply_sylvester_operator(p.coeffs, y);
        rel = r.norm() / c.norm();
        if (rel > 1e-10) {
            throw IllConditioned("solve_dense_diag: residual check failed after refinement");
        }
    }
    return y;
}

DenseTensor solve_dense_vectorized(const ProjectedProblem& p, Index budget) {
    p.validate();
    if (!std::holds_alternative<DenseTensor>(p.rhs)) {
        throw DimensionMismatch("solve_dense_vectorized: dense rhs required");
    }
    const DenseTensor& c = std::get<DenseTensor>(p.rhs);
    if (c.size() > budget) {
        throw SizeOverflow("solve_dense_vectorized: unknown count exceeds budget");
    }
    if (c.norm() == 0.0) return DenseTensor(c.shape());

    const Matrix big = assemble_kron_sum(p.coeffs);
    Eigen::PartialPivLU<Matrix> lu(big);
    const auto diag = lu.matrixLU().diagonal();
    double max_piv = 0.0, min_piv = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < diag.size(); ++i) {
        const double a = std::abs(diag(i));
        max_piv = std::max(max_piv, a);
        min_piv = std::min(min_piv, a);
    }
    if (max_piv == 0.0 || min_piv <= 1e-14 * max_piv) {
        throw SingularMatrix("solve_dense_vectorized: singular Kronecker sum");
    }

    Vector x = lu.solve(c.data());
    Vector r = c.data() - big * x;
    if (r.norm() > 1e-13 * c.norm()) {
        x += lu.solve(r);
        r = c.data() - big * x;
    }
    if (r.norm() > 1e-12 * c.norm()) {
        throw IllConditioned("solve_dense_vectorized: residual check failed");
    }
    return DenseTensor(c.shape(), std::move(x));
}

namespace {

// --- one-site ALS machinery -------------------------------------------------

Matrix contract_env_down(const DenseTensor& g, const Matrix& env) {
    Matrix out = Matrix::Zero(g.dim(2), g.dim(2));
    for (Index j = 0; j < g.dim(1); ++j) {
        auto gj = slice(g, j);
        out.noalias() += gj.adjoint() * env * gj;
    }
    return out;
}

Matrix contract_op_down(const DenseTensor& g, const Matrix& a) {
    const DenseTensor ag = mode_product(g, a, 1);
    Matrix out = Matrix::Zero(g.dim(2), g.dim(2));
    for (Index j = 0; j < g.dim(1); ++j) {
        out.noalias() += slice(g, j).adjoint() * slice(ag, j);
    }
    return out;
}

Matrix contract_env_up(const DenseTensor& g, const Matrix& env) {
    Matrix out = Matrix::Zero(g.dim(0), g.dim(0));
    for (Index j = 0; j < g.dim(1); ++j) {
        auto gj = slice(g, j);
        out.noalias() += gj.conjugate() * env * gj.transpose();
    }
    return out;
}

Matrix contract_op_up(const DenseTensor& g, const Matrix& a) {
    const DenseTensor ag = mode_product(g, a, 1);
    Matrix out = Matrix::Zero(g.dim(0), g.dim(0));
    for (Index j = 0; j < g.dim(1); ++j) {
        out.noalias() += slice(g, j).conjugate() * slice(ag, j).transpose();
    }
    return out;
}

Matrix rhs_env_down(const DenseTensor& g, const Matrix& cl, const DenseTensor& ccar) {
    Matrix out = Matrix::Zero(g.dim(2), ccar.dim(2));
    for (Index j = 0; j < g.dim(1); ++j) {
        out.noalias() += slice(g, j).adjoint() * cl * slice(ccar, j);
    }
    return out;
}

Matrix rhs_env_up(const DenseTensor& g, const Matrix& cr, const DenseTensor& ccar) {
    Matrix out = Matrix::Zero(g.dim(0), ccar.dim(0));
    for (Index j = 0; j < g.dim(1); ++j) {
        out.noalias() += slice(g, j).conjugate() * cr * slice(ccar, j).transpose();
    }
    return out;
}

DenseTensor local_rhs(const Matrix& cl, const DenseTensor& ccar, const Matrix& cr) {
    DenseTensor out({cl.rows(), ccar.dim(1), cr.rows()});
    for (Index j = 0; j < ccar.dim(1); ++j) {
        slice(out, j) = cl * slice(ccar, j) * cr.transpose();
    }
    return out;
}

/// Solve core x0 P + core x1 A + core x2 S = b by diagonalization.
DenseTensor local_solve(const Matrix& p_env, const ModeEig& a_eig, const Matrix& s_env,
                        const DenseTensor& b, double coeff_scale) {
    std::vector<ModeEig> eigs;
    eigs.reserve(3);
    eigs.push_back(ModeEig::make(p_env, false));
    eigs.push_back(a_eig);
    eigs.push_back(ModeEig::make(s_env, false));
    DenseTensor z = transform(b, eigs, /*inverse=*/true);
    divide_by_eigensums(z, eigs, coeff_scale);
    return transform(z, eigs, /*inverse=*/false);
}

/// QR-push the core at site p to the left-orthonormal form, absorbing the
/// factor into site p+1.
void push_right(std::vector<DenseTensor>& cars, int p) {
    auto& g = cars[static_cast<size_t>(p)];
    const Index rp = g.dim(0), n = g.dim(1);
    Matrix c = Eigen::Map<const Matrix>(g.data().data(), rp * n, g.dim(2));
    auto qr = qr_compact(c);
    const Index q = qr.q.cols();
    g = DenseTensor({rp, n, q}, Vector(Eigen::Map<const Vector>(qr.q.data(), qr.q.size())));
    cars[static_cast<size_t>(p + 1)] = mode_product(cars[static_cast<size_t>(p + 1)], qr.r, 0);
}

/// LQ-push the core at site p to the right-orthonormal form, absorbing the
/// factor into site p-1.
void push_left(std::vector<DenseTensor>& cars, int p) {
    auto& g = cars[static_cast<size_t>(p)];
    const Index rp = g.dim(0), n = g.dim(1), rn = g.dim(2);
    Matrix m = Eigen::Map<const Matrix>(g.data().data(), rp, n * rn);
    auto qr = qr_compact(m.adjoint());
    const Index q = qr.q.cols();
    Matrix qt = qr.q.adjoint();  // q x (n*rn)
    g = DenseTensor({q, n, rn}, Vector(Eigen::Map<const Vector>(qt.data(), qt.size())));
    const Matrix l = qr.r.adjoint();  // rp x q
    cars[static_cast<size_t>(p - 1)] =
        mode_product(cars[static_cast<size_t>(p - 1)], l.transpose(), 2);
}

}  // namespace

TTTensor solve_tt_als(const ProjectedProblem& p, const TTSolveOptions& opt,
                      TTSolveReport* report, const TTTensor* warm_start) {
    p.validate();
    if (!std::holds_alternative<TTTensor>(p.rhs)) {
        throw DimensionMismatch("solve_tt_als: TT rhs required");
    }
    const TTTensor& c = std::get<TTTensor>(p.rhs);
    const int d = c.order();
    const double normc = frob_norm(c);
    TTSolveReport rep;

    if (normc == 0.0) {
        if (report != nullptr) *report = rep;
        return TTTensor::zero(c.dims());
    }
    if (d == 1) {
        const auto& car = c.carriage(0);
        Matrix rhs = Eigen::Map<const Matrix>(car.data().data(), car.dim(1), 1);
        Matrix y = solve_dense(p.coeffs[0], rhs);
        Vector data = Eigen::Map<const Vector>(y.data(), y.size());
        if (report != nullptr) *report = rep;
        return TTTensor({DenseTensor({1, car.dim(1), 1}, std::move(data))});
    }

    double coeff_scale = 0.0;
    for (const Matrix& a : p.coeffs) coeff_scale = std::max(coeff_scale, a.norm());

    std::vector<ModeEig> mode_eigs;
    mode_eigs.reserve(p.coeffs.size());
    for (const Matrix& a : p.coeffs) mode_eigs.push_back(ModeEig::make(a, false));

    // Iterate on the carriage list directly.
    const TTTensor& seed =
        (warm_start != nullptr && warm_start->dims() == c.dims() &&
         frob_norm(*warm_start) > 0.0)
            ? *warm_start
            : c;
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) cars.push_back(seed.carriage(i));

    const auto residual_of = [&](const TTTensor& y, TTTensor* out_res) {
        TTTensor ly = apply_sylvester_operator(p.coeffs, y);
        TTTensor res = tt_add(c, tt_scale(std::move(ly), Complex(-1.0)));
        const double rel = frob_norm(res) / normc;
        if (out_res != nullptr) *out_res = std::move(res);
        return rel;
    };

    TTTensor best = TTTensor(cars);
    double best_rel = residual_of(best, nullptr);
    int stall = 0;

    while (rep.sweeps < opt.max_sweeps) {
        // Right-orthogonalize and build the right-hand stacks.
        for (int i = d - 1; i >= 1; --i) push_left(cars, i);

        std::vector<Matrix> s_env(static_cast<size_t>(d));
        std::vector<Matrix> c_right(static_cast<size_t>(d));
        s_env[static_cast<size_t>(d - 1)] = Matrix::Zero(1, 1);
        c_right[static_cast<size_t>(d - 1)] = Matrix::Ones(1, 1);
        for (int i = d - 2; i >= 0; --i) {
            const auto& g = cars[static_cast<size_t>(i + 1)];
            s_env[static_cast<size_t>(i)] =
                contract_env_up(g, s_env[static_cast<size_t>(i + 1)]) +
                contract_op_up(g, p.coeffs[static_cast<size_t>(i + 1)]);
            c_right[static_cast<size_t>(i)] =
                rhs_env_up(g, c_right[static_cast<size_t>(i + 1)], c.carriage(i + 1));
        }

        std::vector<Matrix> p_env(static_cast<size_t>(d));
        std::vector<Matrix> c_left(static_cast<size_t>(d));
        p_env[0] = Matrix::Zero(1, 1);
        c_left[0] = Matrix::Ones(1, 1);

        // Left-to-right half sweep.
        for (int site = 0; site < d; ++site) {
            const DenseTensor b = local_rhs(c_left[static_cast<size_t>(site)], c.carriage(site),
                                            c_right[static_cast<size_t>(site)]);
            cars[static_cast<size_t>(site)] =
                local_solve(p_env[static_cast<size_t>(site)], mode_eigs[static_cast<size_t>(site)],
                            s_env[static_cast<size_t>(site)], b, coeff_scale);
            if (site + 1 < d) {
                push_right(cars, site);
                const auto& g = cars[static_cast<size_t>(site)];
                p_env[static_cast<size_t>(site + 1)] =
                    contract_env_down(g, p_env[static_cast<size_t>(site)]) +
                    contract_op_down(g, p.coeffs[static_cast<size_t>(site)]);
                c_left[static_cast<size_t>(site + 1)] =
                    rhs_env_down(g, c_left[static_cast<size_t>(site)], c.carriage(site));
            }
        }
        ++rep.sweeps;

        // Right-to-left half sweep, refreshing the right stacks as we go.
        if (rep.sweeps < opt.max_sweeps) {
            for (int site = d - 1; site >= 0; --site) {
                const DenseTensor b = local_rhs(c_left[static_cast<size_t>(site)],
                                                c.carriage(site),
                                                c_right[static_cast<size_t>(site)]);
                cars[static_cast<size_t>(site)] =
                    local_solve(p_env[static_cast<size_t>(site)],
                                mode_eigs[static_cast<size_t>(site)],
                                s_env[static_cast<size_t>(site)], b, coeff_scale);
                if (site > 0) {
                    push_left(cars, site);
                    const auto& g = cars[static_cast<size_t>(site)];
                    s_env[static_cast<size_t>(site - 1)] =
                        contract_env_up(g, s_env[static_cast<size_t>(site)]) +
                        contract_op_up(g, p.coeffs[static_cast<size_t>(site)]);
                    c_right[static_cast<size_t>(site - 1)] =
                        rhs_env_up(g, c_right[static_cast<size_t>(site)], c.carriage(site));
                }
            }
            ++rep.sweeps;
        }

        TTTensor y(cars);
        TTTensor res;
        const double rel = residual_of(y, &res);
        if (rel < best_rel * (1.0 - 1e-3)) {
            best = y;
            best_rel = rel;
            stall = 0;
        } else {
            if (rel < best_rel) {
                best = y;
                best_rel = rel;
            }
            ++stall;
        }
        if (best_rel <= opt.tol) break;
        if (stall >= 3) {
            rep.stagnated = true;
            break;
        }

        // Residual-based enrichment: append leading residual directions with
        // zero weight so the next sweep searches a larger space.
        Index max_bond = 1;
        for (Index r : y.ranks()) max_bond = std::max(max_bond, r);
        if (max_bond + opt.enrich_rank <= opt.max_rank) {
            TTTensor enrich = tt_round(res, 0.0, opt.enrich_rank);
            TTTensor grown = tt_add(y, tt_scale(std::move(enrich), Complex(0.0)));
            cars.clear();
            for (int i = 0; i < d; ++i) cars.push_back(grown.carriage(i));
        }
    }

    rep.achieved = best_rel;
    if (best_rel > opt.tol && !rep.stagnated && rep.sweeps >= opt.max_sweeps) {
        rep.stagnated = true;
    }
    if (report != nullptr) *report = rep;
    return best;
}

}  // namespace tbrk
