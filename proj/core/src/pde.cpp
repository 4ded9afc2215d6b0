#include "tbrk/pde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include <Eigen/LU>

#include "tbrk/io.hpp"

namespace tbrk {

void GridSpec::validate() const {
    if (n < 3) throw DimensionMismatch("grid: need at least 3 points per direction");
    if (d < 1) throw DimensionMismatch("grid: dimension must be positive");
}

std::shared_ptr<TridiagOperator> laplacian_1d(const GridSpec& g) {
    g.validate();
    const Index m = g.interior();
    const double h = g.spacing();
    const Complex off(-1.0 / (h * h), 0.0);
    const Complex dia(2.0 / (h * h), 0.0);
    return std::make_shared<TridiagOperator>(Vector::Constant(m - 1, off),
                                             Vector::Constant(m, dia),
                                             Vector::Constant(m - 1, off));
}

std::shared_ptr<TridiagOperator> convection_1d(const GridSpec& g) {
    g.validate();
    const Index m = g.interior();
    const double h = g.spacing();
    const Complex c(1.0 / (2.0 * h), 0.0);
    return std::make_shared<TridiagOperator>(Vector::Constant(m - 1, -c),
                                             Vector::Constant(m, Complex(0.0)),
                                             Vector::Constant(m - 1, c));
}

RealVector phi_diag(const std::function<double(double)>& phi, const GridSpec& g) {
    g.validate();
    RealVector out(g.interior());
    for (Index j = 0; j < out.size(); ++j) out(j) = phi(g.point(j));
    return out;
}

std::shared_ptr<TridiagOperator> convdiff_operator_1d(const GridSpec& g, double eps,
                                                      const std::function<double(double)>& phi) {
    if (!(eps > 0.0)) throw PreconditionViolation("convdiff: viscosity must be positive");
    const Index m = g.interior();
    const double h = g.spacing();
    const RealVector f = phi_diag(phi, g);
    Vector sub(m - 1), dia(m), sup(m - 1);
    for (Index j = 0; j < m; ++j) dia(j) = Complex(eps * 2.0 / (h * h), 0.0);
    for (Index j = 0; j + 1 < m; ++j) {
        // row scaling of the convection stencil: entry (j, j+1) carries phi(x_j),
        // entry (j+1, j) carries phi(x_{j+1})
        sup(j) = Complex(-eps / (h * h) + f(j) / (2.0 * h), 0.0);
        sub(j) = Complex(-eps / (h * h) - f(j + 1) / (2.0 * h), 0.0);
    }
    return std::make_shared<TridiagOperator>(std::move(sub), std::move(dia), std::move(sup));
}

std::function<double(double)> phi_profile(const std::string& name) {
    if (name == "zero" || name == "0") return [](double) { return 0.0; };
    if (name == "one" || name == "1") return [](double) { return 1.0; };
    if (name == "quad") return [](double x) { return 1.0 + (x + 1.0) * (x + 1.0) / 4.0; };
    if (name == "ramp") return [](double x) { return (1.0 + x) / 2.0; };
    throw UnsupportedExpression("unknown convection profile: " + name);
}

RhsSpec RhsSpec::parse(const std::string& text) {
    RhsSpec spec;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (head == "separable") {
        spec.kind = RhsKind::separable;
        spec.separable_id = tail.empty() ? "ones" : tail;
        if (spec.separable_id != "ones" && spec.separable_id != "sinpi") {
            throw UnsupportedExpression("unknown separable rhs: " + spec.separable_id);
        }
    } else if (head == "invsum") {
        spec.kind = RhsKind::inv_sum;
        if (!tail.empty()) spec.alpha = std::stod(tail);
    } else if (head == "prodinv") {
        spec.kind = RhsKind::prod_inv;
    } else if (head == "random-tt" || head == "random") {
        spec.kind = RhsKind::random_lowrank;
        if (!tail.empty()) spec.rank = static_cast<Index>(std::stoll(tail));
        if (spec.rank < 1) throw UnsupportedExpression("random rhs rank must be positive");
    } else if (head == "file") {
        spec.kind = RhsKind::file;
        if (tail.empty()) throw UnsupportedExpression("file rhs needs a path");
        spec.path = tail;
    } else {
        throw UnsupportedExpression("unknown rhs spec: " + text);
    }
    return spec;
}

double ExpSum::eval(double s) const {
    double v = 0.0;
    for (Index k = 0; k < weights.size(); ++k) {
        v += weights(k) * std::exp(-exponents(k) * s);
    }
    return v;
}

ExpSum fit_inverse_expsum(double smin, double smax, double tol) {
    if (!(smin > 0.0) || smax < smin) {
        throw PreconditionViolation("expsum: need 0 < smin <= smax");
    }
    if (!(tol > 0.0 && tol < 1.0)) {
        throw PreconditionViolation("expsum: tol must lie in (0,1)");
    }
    // Sinc quadrature of 1/s = int exp(u - s e^u) du on the normalized
    // interval [1, R], refined until the verification grid passes.
    const double r = smax / smin;
    double a = std::log(4.0 / tol);                      // left truncation
    double b = std::log(std::log(4.0 / tol) + 1.0) + 1.0;  // right truncation
    double step = 2.0 * std::acos(-1.0) / (std::log(1.0 / tol) + 6.0);

    for (int attempt = 0; attempt < 12; ++attempt) {
        const Index count = static_cast<Index>(std::ceil((a + b) / step)) + 1;
        RealVector w(count), t(count);
        for (Index j = 0; j < count; ++j) {
            const double u = -a + static_cast<double>(j) * step;
            t(j) = std::exp(u);
            w(j) = step * t(j);
        }
        // verify on a log grid over [1, R]
        double worst = 0.0;
        const int grid = 512;
        for (int i = 0; i <= grid; ++i) {
            const double s = std::exp(std::log(r) * i / grid);
            double v = 0.0;
            for (Index j = 0; j < count; ++j) v += w(j) * std::exp(-t(j) * s);
            worst = std::max(worst, std::abs(1.0 - s * v));
        }
        if (worst <= tol) {
            ExpSum out;
            out.weights = w / smin;
            out.exponents = t / smin;
            return out;
        }
        step *= 0.8;
        a += 1.0;
        b += 0.25;
    }
    throw Error("expsum: quadrature refinement failed to reach tolerance");
}

namespace {

constexpr Index kRhsVerifyBudget = 1'000'000;

RealVector sample_profile(const GridSpec& g, const std::function<double(double)>& f) {
    RealVector v(g.interior());
    for (Index j = 0; j < v.size(); ++j) v(j) = f(g.point(j));
    return v;
}

Matrix exp_factor(const GridSpec& g, const RealVector& exponents) {
    Matrix f(g.interior(), exponents.size());
    for (Index j = 0; j < f.rows(); ++j) {
        for (Index k = 0; k < f.cols(); ++k) {
            f(j, k) = Complex(std::exp(-exponents(k) * g.point(j)), 0.0);
        }
    }
    return f;
}

/// Orthonormal basis of the dominant column space; the discarded singular
/// tail stays below a fraction of tol in the Frobenius sense.
Matrix column_basis(const Matrix& f, double tol) {
    auto svd = svd_thin(f);
    const double delta = 0.3 * tol * svd.s.norm();
    Index r = svd.s.size();
    double tail = 0.0;
    while (r > 1) {
        const double next = tail + svd.s(r - 1) * svd.s(r - 1);
        if (std::sqrt(next) > delta) break;
        tail = next;
        --r;
    }
    return svd.u.leftCols(r);
}

/// TT cores from a CP sum  T = sum_k (outer product of factor columns),
/// compressed on the fly; per-mode factor matrices are m_i x K.
TTTensor tt_from_cp(const std::vector<Matrix>& factors, double tol) {
    const int d = static_cast<int>(factors.size());
    const Index terms = factors[0].cols();
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(d));

    Matrix cur = factors[0];  // (r_prev * m_i) x K with r_prev = 1
    Index r_prev = 1;
    const double split_tol = tol / std::sqrt(static_cast<double>(std::max(d - 1, 1)));
    for (int i = 0; i + 1 < d; ++i) {
        auto svd = svd_thin(cur);
        Index r = svd.s.size();
        double tail = 0.0;
        const double delta = split_tol * svd.s.norm();
        while (r > 1) {
            const double next = tail + svd.s(r - 1) * svd.s(r - 1);
            if (std::sqrt(next) > delta) break;
            tail = next;
            --r;
        }
        const Index m = factors[static_cast<size_t>(i)].rows();
        Vector data = Eigen::Map<const Vector>(svd.u.leftCols(r).data(), r_prev * m * r);
        cars.emplace_back(std::vector<Index>{r_prev, m, r}, std::move(data));
        Matrix w = svd.s.head(r).asDiagonal() * svd.v.leftCols(r).adjoint();  // r x K

        const Matrix& fn = factors[static_cast<size_t>(i + 1)];
        if (i + 2 < d) {
            Matrix next(r * fn.rows(), terms);
            for (Index k = 0; k < terms; ++k) {
                for (Index j = 0; j < fn.rows(); ++j) {
                    next.block(j * r, k, r, 1) = w.col(k) * fn(j, k);
                }
            }
            cur = std::move(next);
        } else {
            Matrix last = w * fn.transpose();  // r x m_d
            Vector ldata = Eigen::Map<const Vector>(last.data(), last.size());
            cars.emplace_back(std::vector<Index>{r, fn.rows(), Index(1)}, std::move(ldata));
        }
        r_prev = r;
    }
    return TTTensor(std::move(cars));
}

DenseTensor dense_sample(const GridSpec& g, const std::function<double(std::vector<double>&)>& f) {
    std::vector<Index> shape(static_cast<size_t>(g.d), g.interior());
    DenseTensor out(shape);
    std::vector<Index> idx(static_cast<size_t>(g.d), 0);
    std::vector<double> x(static_cast<size_t>(g.d), 0.0);
    for (Index pos = 0; pos < out.size(); ++pos) {
        for (int i = 0; i < g.d; ++i) x[static_cast<size_t>(i)] = g.point(idx[static_cast<size_t>(i)]);
        out.data()(pos) = Complex(f(x), 0.0);
        for (int i = 0; i < g.d; ++i) {
            auto& c = idx[static_cast<size_t>(i)];
            if (c + 1 < g.interior()) {
                ++c;
                break;
            }
            c = 0;
        }
    }
    return out;
}

Index dense_size_or_zero(const GridSpec& g) {
    Index total = 1;
    for (int i = 0; i < g.d; ++i) {
        total *= g.interior();
        if (total > kRhsVerifyBudget) return 0;
    }
    return total;
}

void verify_against_dense(const GridSpec& g, const std::function<double(std::vector<double>&)>& f,
                          const DenseTensor& approx, double tol) {
    const DenseTensor exact = dense_sample(g, f);
    const double err = (exact - approx).norm();
    if (err > tol * exact.norm()) {
        throw Error("rhs construction: dense verification failed");
    }
}

std::function<double(std::vector<double>&)> rhs_function(const RhsSpec& spec, int d) {
    switch (spec.kind) {
        case RhsKind::separable:
            if (spec.separable_id == "ones") {
                return [](std::vector<double>&) { return 1.0; };
            }
            return [](std::vector<double>& x) {
                double v = 1.0;
                for (double xi : x) v *= std::sin(std::acos(-1.0) * xi);
                return v;
            };
        case RhsKind::inv_sum:
            return [alpha = spec.alpha](std::vector<double>& x) {
                double s = alpha;
                for (double xi : x) s += xi;
                return 1.0 / s;
            };
        case RhsKind::prod_inv:
            if (d != 4) throw UnsupportedExpression("prodinv rhs is defined for d = 4");
            return [](std::vector<double>& x) {
                return 1.0 / ((1.0 + x[0] + x[1]) * (1.0 + x[2] + x[3]));
            };
        default:
            throw UnsupportedExpression("rhs family has no closed form");
    }
}

}  // namespace

TuckerTensor build_rhs_tucker(const RhsSpec& spec, const GridSpec& g, double tol) {
    g.validate();
    const int d = g.d;
    const Index m = g.interior();
    if (!(tol > 0.0 && tol < 1.0)) tol = 1e-8;

    switch (spec.kind) {
        case RhsKind::separable: {
            std::vector<Matrix> factors;
            DenseTensor core(std::vector<Index>(static_cast<size_t>(d), 1));
            Complex scale = 1.0;
            for (int i = 0; i < d; ++i) {
                RealVector v = spec.separable_id == "ones"
                                   ? RealVector(RealVector::Ones(m))
                                   : sample_profile(g, [](double x) {
                                         return std::sin(std::acos(-1.0) * x);
                                     });
                const double nrm = v.norm();
                scale *= nrm;
                factors.push_back((v / nrm).cast<Complex>());
            }
            core.data()(0) = scale;
            return TuckerTensor(std::move(core), std::move(factors));
        }
        case RhsKind::inv_sum: {
            const double smin = spec.alpha + d * g.point(0);
            const double smax = spec.alpha + d * g.point(m - 1);
            const ExpSum es = fit_inverse_expsum(smin, smax, tol / 2.0);
            const Matrix f = exp_factor(g, es.exponents);
            const Matrix basis = column_basis(f, tol);
            const Matrix coeff = basis.adjoint() * f;  // r x K
            const Index r = basis.cols();
            DenseTensor core(std::vector<Index>(static_cast<size_t>(d), r));
            std::vector<Index> idx(static_cast<size_t>(d));
            for (Index k = 0; k < es.weights.size(); ++k) {
                // rank-one update core += w_k e^{-t_k alpha} (coeff col k)^(x d)
                const double wk = es.weights(k) * std::exp(-es.exponents(k) * spec.alpha);
                std::fill(idx.begin(), idx.end(), 0);
                for (Index pos = 0; pos < core.size(); ++pos) {
                    Complex v = wk;
                    for (int i = 0; i < d; ++i) v *= coeff(idx[static_cast<size_t>(i)], k);
                    core.data()(pos) += v;
                    for (int i = 0; i < d; ++i) {
                        auto& c = idx[static_cast<size_t>(i)];
                        if (c + 1 < r) {
                            ++c;
                            break;
                        }
                        c = 0;
                    }
                }
            }
            std::vector<Matrix> factors(static_cast<size_t>(d), basis);
            TuckerTensor out = tucker_recompress(TuckerTensor(std::move(core), std::move(factors)), tol / 3.0);
            if (dense_size_or_zero(g) > 0) {
                auto fn = rhs_function(spec, d);
                verify_against_dense(g, fn, tucker_full(out), tol);
            }
            return out;
        }
        case RhsKind::prod_inv: {
            if (d != 4) throw UnsupportedExpression("prodinv rhs is defined for d = 4");
            const double smin = 1.0 + 2.0 * g.point(0);
            const double smax = 1.0 + 2.0 * g.point(m - 1);
            const ExpSum es = fit_inverse_expsum(smin, smax, tol / 2.0);
            const Matrix f = exp_factor(g, es.exponents);
            const Matrix basis = column_basis(f, tol);
            const Matrix coeff = basis.adjoint() * f;  // r x K
            const Index r = basis.cols();
            // pair factor M[s,t] = sum_k w_k e^{-t_k} coeff(s,k) coeff(t,k)
            Matrix pair = Matrix::Zero(r, r);
            for (Index k = 0; k < es.weights.size(); ++k) {
                const double wk = es.weights(k) * std::exp(-es.exponents(k));
                pair.noalias() += wk * coeff.col(k) * coeff.col(k).transpose();
            }
            DenseTensor core(std::vector<Index>(4, r));
            std::vector<Index> idx(4, 0);
            for (Index pos = 0; pos < core.size(); ++pos) {
                core.data()(pos) = pair(idx[0], idx[1]) * pair(idx[2], idx[3]);
                for (int i = 0; i < 4; ++i) {
                    auto& c = idx[static_cast<size_t>(i)];
                    if (c + 1 < r) {
                        ++c;
                        break;
                    }
                    c = 0;
                }
            }
            std::vector<Matrix> factors(4, basis);
            TuckerTensor out = tucker_recompress(TuckerTensor(std::move(core), std::move(factors)), tol / 3.0);
            if (dense_size_or_zero(g) > 0) {
                auto fn = rhs_function(spec, d);
                verify_against_dense(g, fn, tucker_full(out), tol);
            }
            return out;
        }
        case RhsKind::random_lowrank: {
            std::mt19937_64 rng(spec.seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            const Index r = std::min(spec.rank, m);
            DenseTensor core(std::vector<Index>(static_cast<size_t>(d), r));
            for (Index i = 0; i < core.size(); ++i) core.data()(i) = Complex(normal(rng), 0.0);
            std::vector<Matrix> factors;
            for (int i = 0; i < d; ++i) {
                Matrix f(m, r);
                for (Index c = 0; c < r; ++c) {
                    for (Index j = 0; j < m; ++j) f(j, c) = Complex(normal(rng), 0.0);
                }
                factors.push_back(thin_qr(f).q);
            }
            return TuckerTensor(std::move(core), std::move(factors));
        }
        case RhsKind::file: {
            TensorFile t = read_tensor_file(spec.path);
            if (auto* tucker = std::get_if<TuckerTensor>(&t)) return std::move(*tucker);
            if (auto* dense = std::get_if<DenseTensor>(&t)) return hosvd(*dense, tol);
            throw UnsupportedExpression("rhs file does not hold a Tucker or dense tensor");
        }
    }
    throw UnsupportedExpression("unhandled rhs kind");
}

TTTensor build_rhs_tt(const RhsSpec& spec, const GridSpec& g, double tol) {
    g.validate();
    const int d = g.d;
    const Index m = g.interior();
    if (!(tol > 0.0 && tol < 1.0)) tol = 1e-8;

    switch (spec.kind) {
        case RhsKind::separable: {
            std::vector<DenseTensor> cars;
            for (int i = 0; i < d; ++i) {
                RealVector v = spec.separable_id == "ones"
                                   ? RealVector(RealVector::Ones(m))
                                   : sample_profile(g, [](double x) {
                                         return std::sin(std::acos(-1.0) * x);
                                     });
                cars.emplace_back(std::vector<Index>{1, m, 1}, Vector(v.cast<Complex>()));
            }
            return TTTensor(std::move(cars));
        }
        case RhsKind::inv_sum: {
            const double smin = spec.alpha + d * g.point(0);
            const double smax = spec.alpha + d * g.point(m - 1);
            const ExpSum es = fit_inverse_expsum(smin, smax, tol / 2.0);
            Matrix f = exp_factor(g, es.exponents);
            std::vector<Matrix> factors(static_cast<size_t>(d), f);
            // fold the weights and the constant offset into the last mode
            for (Index k = 0; k < es.weights.size(); ++k) {
                factors.back().col(k) *=
                    es.weights(k) * std::exp(-es.exponents(k) * spec.alpha);
            }
            TTTensor out = tt_from_cp(factors, tol / 2.0);
            if (dense_size_or_zero(g) > 0) {
                auto fn = rhs_function(spec, d);
                verify_against_dense(g, fn, tt_full(out), tol);
            }
            return out;
        }
        case RhsKind::prod_inv: {
            if (d != 4) throw UnsupportedExpression("prodinv rhs is defined for d = 4");
            const double smin = 1.0 + 2.0 * g.point(0);
            const double smax = 1.0 + 2.0 * g.point(m - 1);
            const ExpSum es = fit_inverse_expsum(smin, smax, tol / 2.0);
            const Matrix f = exp_factor(g, es.exponents);
            const Index kk = es.exponents.size();
            std::vector<DenseTensor> cars;
            Matrix g1 = f;
            for (Index k = 0; k < kk; ++k) g1.col(k) *= es.weights(k) * std::exp(-es.exponents(k));
            cars.emplace_back(std::vector<Index>{1, m, kk},
                              Vector(Eigen::Map<const Vector>(g1.data(), g1.size())));
            Matrix g2t = f.transpose();  // kk x m
            cars.emplace_back(std::vector<Index>{kk, m, 1},
                              Vector(Eigen::Map<const Vector>(g2t.data(), g2t.size())));
            Matrix g3 = f;
            for (Index k = 0; k < kk; ++k) g3.col(k) *= es.weights(k) * std::exp(-es.exponents(k));
            cars.emplace_back(std::vector<Index>{1, m, kk},
                              Vector(Eigen::Map<const Vector>(g3.data(), g3.size())));
            Matrix g4t = f.transpose();
            cars.emplace_back(std::vector<Index>{kk, m, 1},
                              Vector(Eigen::Map<const Vector>(g4t.data(), g4t.size())));
            TTTensor out = tt_round(TTTensor(std::move(cars)), tol / 2.0);
            if (dense_size_or_zero(g) > 0) {
                auto fn = rhs_function(spec, d);
                verify_against_dense(g, fn, tt_full(out), tol);
            }
            return out;
        }
        case RhsKind::random_lowrank: {
            std::mt19937_64 rng(spec.seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            std::vector<DenseTensor> cars;
            for (int i = 0; i < d; ++i) {
                const Index rp = (i == 0) ? 1 : spec.rank;
                const Index rn = (i == d - 1) ? 1 : spec.rank;
                DenseTensor car({rp, m, rn});
                for (Index p = 0; p < car.size(); ++p) car.data()(p) = Complex(normal(rng), 0.0);
                cars.push_back(std::move(car));
            }
            return TTTensor(std::move(cars));
        }
        case RhsKind::file: {
            TensorFile t = read_tensor_file(spec.path);
            if (auto* tt = std::get_if<TTTensor>(&t)) return std::move(*tt);
            if (auto* dense = std::get_if<DenseTensor>(&t)) return tt_svd(*dense, tol);
            throw UnsupportedExpression("rhs file does not hold a TT or dense tensor");
        }
    }
    throw UnsupportedExpression("unhandled rhs kind");
}

DenseTensor oracle_solve_dense(const std::vector<OperatorPtr>& ops, const DenseTensor& c,
                               Index budget) {
    const int d = static_cast<int>(ops.size());
    if (c.order() != d) throw DimensionMismatch("oracle: order mismatch");
    Index total = 1;
    for (int i = 0; i < d; ++i) {
        total *= ops[static_cast<size_t>(i)]->dim();
        if (total > budget) throw SizeOverflow("oracle: unknown count exceeds budget");
    }
    if (c.size() != total) throw DimensionMismatch("oracle: rhs size mismatch");

    std::vector<Matrix> dense_ops;
    bool real = true;
    for (const auto& op : ops) {
        dense_ops.push_back(op->dense(budget * budget));
        real = real && op->is_real();
    }
    const Matrix big = assemble_kron_sum(dense_ops);
    for (Index i = 0; i < c.size() && real; ++i) {
        if (c.data()(i).imag() != 0.0) real = false;
    }

    Vector x;
    if (real) {
        const RealMatrix big_r = big.real();
        Eigen::PartialPivLU<RealMatrix> lu(big_r);
        const RealVector rhs = c.data().real();
        RealVector xr = lu.solve(rhs);
        RealVector res = rhs - big_r * xr;
        if (res.norm() > 1e-13 * rhs.norm()) {
            xr += lu.solve(res);
            res = rhs - big_r * xr;
        }
        if (res.norm() > 1e-12 * rhs.norm()) {
            throw IllConditioned("oracle: residual check failed");
        }
        x = xr.cast<Complex>();
    } else {
        Eigen::PartialPivLU<Matrix> lu(big);
        x = lu.solve(c.data());
        Vector res = c.data() - big * x;
        if (res.norm() > 1e-13 * c.norm()) {
            x += lu.solve(res);
            res = c.data() - big * x;
        }
        if (res.norm() > 1e-12 * c.norm()) {
            throw IllConditioned("oracle: residual check failed");
        }
    }
    return DenseTensor(c.shape(), std::move(x));
}

std::vector<OperatorPtr> build_operators(const ProblemSpec& problem, const GridSpec& g) {
    std::vector<OperatorPtr> ops;
    switch (problem.kind) {
        case ProblemKind::poisson: {
            const auto a = laplacian_1d(g);
            for (int i = 0; i < g.d; ++i) ops.push_back(a);  // one shared instance
            break;
        }
        case ProblemKind::convdiff: {
            for (int i = 0; i < g.d; ++i) {
                const std::string name = static_cast<size_t>(i) < problem.phi_names.size()
                                             ? problem.phi_names[static_cast<size_t>(i)]
                                             : std::string("zero");
                ops.push_back(convdiff_operator_1d(g, problem.epsilon, phi_profile(name)));
            }
            break;
        }
        case ProblemKind::files: {
            for (const auto& path : problem.operator_files) {
                ops.push_back(std::make_shared<DenseOperator>(read_matrix_file(path)));
            }
            break;
        }
    }
    return ops;
}

RunSummary run_solve(const RunConfig& cfg) {
    GridSpec g = cfg.grid;
    std::vector<OperatorPtr> ops = build_operators(cfg.problem, g);
    if (cfg.problem.kind == ProblemKind::files) {
        g.d = static_cast<int>(ops.size());
        if (ops.empty()) throw DimensionMismatch("files problem: no operators given");
        g.n = ops[0]->dim() + 2;
    }

    const double rhs_tol =
        cfg.rhs_tol > 0.0 ? cfg.rhs_tol
                          : std::max(1e-10, std::min(1e-6, 0.01 * cfg.solver.tolerance));

    RunSummary summary;
    summary.format = cfg.tt_format ? "tt" : "tucker";
    summary.poles = pole_strategy_name(cfg.solver.strategy.kind);
    summary.d = g.d;
    summary.n = g.n;
    switch (cfg.problem.kind) {
        case ProblemKind::poisson: summary.problem = "poisson"; break;
        case ProblemKind::convdiff: summary.problem = "convdiff"; break;
        case ProblemKind::files: summary.problem = "files"; break;
    }

    SolveResult result;
    if (cfg.tt_format) {
        TTTensor rhs = build_rhs_tt(cfg.problem.rhs, g, rhs_tol);
        result = tt_tbrk(ops, rhs, cfg.solver);
        if (!cfg.out_solution.empty()) {
            write_tensor_file(cfg.out_solution, TensorFile(result.tt()));
        }
    } else {
        TuckerTensor rhs = build_rhs_tucker(cfg.problem.rhs, g, rhs_tol);
        result = tuck_tbrk(ops, rhs, cfg.solver);
        if (!cfg.out_solution.empty()) {
            write_tensor_file(cfg.out_solution, TensorFile(result.tucker()));
        }
    }

    if (!cfg.out_dat.empty()) {
        write_dat(cfg.out_dat, result.trace);
    }

    summary.status = result.status;
    summary.final_residual = result.final_residual;
    summary.outer_iterations = static_cast<int>(result.trace.rows.size());
    summary.mode_iterations = result.mode_iterations;
    double mean = 0.0;
    for (int k : result.mode_iterations) mean += k;
    summary.mean_iterations = mean / static_cast<double>(result.mode_iterations.size());
    summary.seconds = result.trace.rows.empty() ? 0.0 : result.trace.rows.back().seconds;
    return summary;
}

std::string summary_to_json(const RunSummary& s) {
    nlohmann::json j;
    j["problem"] = s.problem;
    j["format"] = s.format;
    j["poles"] = s.poles;
    j["d"] = s.d;
    j["n"] = s.n;
    switch (s.status) {
        case SolveStatus::converged: j["status"] = "converged"; break;
        case SolveStatus::max_iterations: j["status"] = "max-iterations"; break;
        case SolveStatus::deflated: j["status"] = "deflated"; break;
    }
    j["final_residual"] = s.final_residual;
    j["seconds"] = s.seconds;
    j["outer_iterations"] = s.outer_iterations;
    j["mean_iterations"] = s.mean_iterations;
    j["iterations_per_mode"] = s.mode_iterations;
    return j.dump(2);
}

void write_dat(const std::string& path, const ConvergenceTrace& trace) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write dat file: " + path);
    f.precision(17);
    for (const auto& row : trace.rows) {
        f << row.mean_iteration << ' ' << row.rel_residual << '\n';
    }
}

std::vector<std::pair<double, double>> read_dat(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot read dat file: " + path);
    std::vector<std::pair<double, double>> rows;
    double a, b;
    while (f >> a >> b) rows.emplace_back(a, b);
    return rows;
}

}  // namespace tbrk
