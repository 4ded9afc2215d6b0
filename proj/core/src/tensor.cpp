#include "tbrk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tbrk {

namespace {

Index shape_product(const std::vector<Index>& shape) {
    Index p = 1;
    for (Index n : shape) p *= n;
    return p;
}

void check_shape(const std::vector<Index>& shape) {
    if (shape.empty()) {
        throw DimensionMismatch("tensor order must be at least 1");
    }
    for (Index n : shape) {
        if (n < 1) throw DimensionMismatch("tensor dimensions must be positive");
    }
}

/// Truncation rank: smallest k >= 1 whose discarded tail satisfies
/// sqrt(sum_{j>=k} s_j^2) <= delta.
Index rank_for_tail(const RealVector& s, double delta) {
    Index k = s.size();
    double tail = 0.0;
    while (k > 1) {
        const double next = tail + s(k - 1) * s(k - 1);
        if (std::sqrt(next) > delta) break;
        tail = next;
        --k;
    }
    return k;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<Index> shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = Vector::Zero(shape_product(shape_));
}

DenseTensor::DenseTensor(std::vector<Index> shape, Vector data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_product(shape_)) {
        throw DimensionMismatch("tensor data length does not match shape");
    }
}

Index DenseTensor::flat_index(const std::vector<Index>& idx) const {
    if (static_cast<int>(idx.size()) != order()) {
        throw DimensionMismatch("index arity does not match tensor order");
    }
    Index flat = 0, stride = 1;
    for (size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= shape_[k]) {
            throw DimensionMismatch("tensor index out of range");
        }
        flat += idx[k] * stride;
        stride *= shape_[k];
    }
    return flat;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
    if (shape_ != other.shape_) throw DimensionMismatch("tensor shape mismatch in +=");
    data_ += other.data_;
    return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
    if (shape_ != other.shape_) throw DimensionMismatch("tensor shape mismatch in -=");
    data_ -= other.data_;
    return *this;
}

DenseTensor& DenseTensor::operator*=(Complex alpha) {
    data_ *= alpha;
    return *this;
}

DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
DenseTensor operator*(Complex alpha, DenseTensor t) { return t *= alpha; }

Matrix unfold(const DenseTensor& x, int mode) {
    if (mode < 0 || mode >= x.order()) {
        throw DimensionMismatch("unfold: mode out of range");
    }
    const auto& shape = x.shape();
    Index s = 1;
    for (int m = 0; m < mode; ++m) s *= shape[m];
    const Index n = shape[mode];
    const Index t = x.size() / (s * n);

    Matrix out(n, s * t);
    const Complex* src = x.data().data();
    for (Index hi = 0; hi < t; ++hi) {
        for (Index i = 0; i < n; ++i) {
            out.row(i).segment(hi * s, s) =
                Eigen::Map<const Eigen::RowVectorXcd>(src + hi * s * n + i * s, s);
        }
    }
    return out;
}

DenseTensor fold(const Matrix& m, const std::vector<Index>& shape, int mode) {
    check_shape(shape);
    if (mode < 0 || mode >= static_cast<int>(shape.size())) {
        throw DimensionMismatch("fold: mode out of range");
    }
    const Index total = shape_product(shape);
    Index s = 1;
    for (int k = 0; k < mode; ++k) s *= shape[k];
    const Index n = shape[mode];
    const Index t = total / (s * n);
    if (m.rows() != n || m.cols() != s * t) {
        throw DimensionMismatch("fold: matrix shape does not match target");
    }

    DenseTensor out(shape);
    Complex* dst = out.data().data();
    for (Index hi = 0; hi < t; ++hi) {
        for (Index i = 0; i < n; ++i) {
            Eigen::Map<Eigen::RowVectorXcd>(dst + hi * s * n + i * s, s) =
                m.row(i).segment(hi * s, s);
        }
    }
    return out;
}

DenseTensor mode_product(const DenseTensor& x, const Matrix& m, int mode) {
    if (mode < 0 || mode >= x.order()) {
        throw DimensionMismatch("mode_product: mode out of range");
    }
    if (m.cols() != x.dim(mode)) {
        throw DimensionMismatch("mode_product: matrix columns must match tensor mode size");
    }
    Matrix prod = m * unfold(x, mode);
    std::vector<Index> shape = x.shape();
    shape[static_cast<size_t>(mode)] = m.rows();
    return fold(prod, shape, mode);
}

TuckerTensor::TuckerTensor(DenseTensor core, std::vector<Matrix> factors)
    : core_(std::move(core)), factors_(std::move(factors)) {
    if (static_cast<int>(factors_.size()) != core_.order()) {
        throw DimensionMismatch("Tucker: factor count must equal core order");
    }
    for (int i = 0; i < core_.order(); ++i) {
        Matrix& f = factors_[static_cast<size_t>(i)];
        if (f.cols() != core_.dim(i)) {
            throw DimensionMismatch("Tucker: factor columns must match core dimension");
        }
        if (f.rows() < f.cols()) {
            throw DimensionMismatch("Tucker: factor must be tall (rows >= cols)");
        }
        const Matrix gram = f.adjoint() * f;
        const double dev = (gram - Matrix::Identity(f.cols(), f.cols())).norm();
        if (dev > 1e-10) {
            auto qr = thin_qr(f);
            core_ = mode_product(core_, qr.r, i);
            f = std::move(qr.q);
        }
    }
}

TuckerTensor TuckerTensor::zero(const std::vector<Index>& shape) {
    check_shape(shape);
    std::vector<Index> ones(shape.size(), 1);
    std::vector<Matrix> factors;
    factors.reserve(shape.size());
    for (Index n : shape) {
        Matrix e = Matrix::Zero(n, 1);
        e(0, 0) = 1.0;
        factors.push_back(std::move(e));
    }
    return TuckerTensor(DenseTensor(ones), std::move(factors));
}

std::vector<Index> TuckerTensor::shape() const {
    std::vector<Index> s;
    s.reserve(factors_.size());
    for (const Matrix& f : factors_) s.push_back(f.rows());
    return s;
}

DenseTensor tucker_full(const TuckerTensor& t) {
    DenseTensor out = t.core();
    for (int i = 0; i < t.order(); ++i) {
        out = mode_product(out, t.factor(i), i);
    }
    return out;
}

namespace {

TuckerTensor hosvd_impl(const DenseTensor& x, const std::vector<Index>* ranks, double tol) {
    const int d = x.order();
    const double norm = x.norm();
    const double delta = tol * norm / std::sqrt(static_cast<double>(d));

    std::vector<Matrix> factors;
    factors.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        auto svd = svd_thin(unfold(x, i));
        Index k;
        if (ranks != nullptr) {
            k = std::min((*ranks)[static_cast<size_t>(i)], svd.s.size());
            if (k < 1) throw DimensionMismatch("hosvd: ranks must be positive");
        } else {
            k = rank_for_tail(svd.s, delta);
        }
        factors.push_back(svd.u.leftCols(k));
    }
    DenseTensor core = x;
    for (int i = 0; i < d; ++i) {
        core = mode_product(core, factors[static_cast<size_t>(i)].adjoint(), i);
    }
    return TuckerTensor(std::move(core), std::move(factors));
}

}  // namespace

TuckerTensor hosvd(const DenseTensor& x, double tol) {
    return hosvd_impl(x, nullptr, tol);
}

TuckerTensor hosvd(const DenseTensor& x, const std::vector<Index>& ranks) {
    if (static_cast<int>(ranks.size()) != x.order()) {
        throw DimensionMismatch("hosvd: rank vector arity mismatch");
    }
    return hosvd_impl(x, &ranks, 0.0);
}

TuckerTensor tucker_recompress(const TuckerTensor& t, double tol) {
    TuckerTensor inner = hosvd(t.core(), tol);
    std::vector<Matrix> factors;
    factors.reserve(static_cast<size_t>(t.order()));
    for (int i = 0; i < t.order(); ++i) {
        factors.push_back(t.factor(i) * inner.factor(i));
    }
    return TuckerTensor(inner.core(), std::move(factors));
}

TTTensor::TTTensor(std::vector<DenseTensor> carriages) : carriages_(std::move(carriages)) {
    if (carriages_.empty()) throw DimensionMismatch("TT: need at least one carriage");
    for (size_t i = 0; i < carriages_.size(); ++i) {
        if (carriages_[i].order() != 3) {
            throw DimensionMismatch("TT: carriages must be order-3 (r_prev, n, r_next)");
        }
    }
    if (carriages_.front().dim(0) != 1 || carriages_.back().dim(2) != 1) {
        throw DimensionMismatch("TT: boundary ranks must be 1");
    }
    for (size_t i = 0; i + 1 < carriages_.size(); ++i) {
        if (carriages_[i].dim(2) != carriages_[i + 1].dim(0)) {
            throw DimensionMismatch("TT: adjacent carriage ranks disagree");
        }
    }
}

TTTensor TTTensor::zero(const std::vector<Index>& dims) {
    check_shape(dims);
    std::vector<DenseTensor> cars;
    cars.reserve(dims.size());
    for (Index n : dims) cars.emplace_back(std::vector<Index>{1, n, 1});
    return TTTensor(std::move(cars));
}

std::vector<Index> TTTensor::dims() const {
    std::vector<Index> out;
    out.reserve(carriages_.size());
    for (const auto& c : carriages_) out.push_back(c.dim(1));
    return out;
}

std::vector<Index> TTTensor::ranks() const {
    std::vector<Index> out;
    for (size_t i = 0; i + 1 < carriages_.size(); ++i) out.push_back(carriages_[i].dim(2));
    return out;
}

Index TTTensor::rank(int bond) const {
    if (bond <= 0) return carriages_.front().dim(0);
    if (bond >= order()) return carriages_.back().dim(2);
    return carriages_[static_cast<size_t>(bond - 1)].dim(2);
}

namespace {

/// View of the (r_prev x r_next) slice of a carriage at physical index j.
Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> carriage_slice(const DenseTensor& car,
                                                                 Index j) {
    const Index rp = car.dim(0), n = car.dim(1), rn = car.dim(2);
    return {car.data().data() + rp * j, rp, rn, Eigen::OuterStride<>(rp * n)};
}

/// Free reshape of a carriage as (r_prev) x (n * r_next).
Eigen::Map<const Matrix> row_unfolding(const DenseTensor& car) {
    return {car.data().data(), car.dim(0), car.dim(1) * car.dim(2)};
}

/// Free reshape of a carriage as (r_prev * n) x (r_next).
Eigen::Map<const Matrix> col_unfolding(const DenseTensor& car) {
    return {car.data().data(), car.dim(0) * car.dim(1), car.dim(2)};
}

DenseTensor carriage_from_matrix(const Matrix& m, Index rp, Index n, Index rn) {
    Vector data = Eigen::Map<const Vector>(m.data(), m.size());
    return DenseTensor({rp, n, rn}, std::move(data));
}

/// Right-to-left sweep making carriages 1..d-1 row-orthonormal; afterwards
/// the tensor norm equals the norm of carriage 0.
void right_orthogonalize(std::vector<DenseTensor>& cars) {
    for (int i = static_cast<int>(cars.size()) - 1; i >= 1; --i) {
        const Index n = cars[i].dim(1), rn = cars[i].dim(2);
        Matrix m = row_unfolding(cars[i]);           // rp x (n*rn)
        auto qr = qr_compact(m.adjoint());           // (n*rn) x q, q x rp
        const Index q = qr.q.cols();
        Matrix qt = qr.q.adjoint();                  // q x (n*rn), orthonormal rows
        cars[i] = carriage_from_matrix(qt, q, n, rn);
        const Matrix l = qr.r.adjoint();             // rp x q
        cars[i - 1] = mode_product(cars[i - 1], l.transpose(), 2);
    }
}

}  // namespace

Complex TTTensor::entry(const std::vector<Index>& idx) const {
    if (static_cast<int>(idx.size()) != order()) {
        throw DimensionMismatch("TT entry: index arity mismatch");
    }
    Matrix v = Matrix::Ones(1, 1);
    for (int i = 0; i < order(); ++i) {
        const auto& car = carriages_[static_cast<size_t>(i)];
        if (idx[static_cast<size_t>(i)] < 0 || idx[static_cast<size_t>(i)] >= car.dim(1)) {
            throw DimensionMismatch("TT entry: index out of range");
        }
        v = v * carriage_slice(car, idx[static_cast<size_t>(i)]);
    }
    return v(0, 0);
}

Complex tt_entry(const TTTensor& t, const std::vector<Index>& idx) { return t.entry(idx); }

DenseTensor tt_full(const TTTensor& t, Index element_budget) {
    const auto dims = t.dims();
    Index total = 1;
    for (Index n : dims) {
        total *= n;
        if (total > element_budget) {
            throw SizeOverflow("tt_full: dense materialization exceeds element budget");
        }
    }
    // Contract left to right; cur is (prod of processed dims) x r_i.
    Matrix cur = Eigen::Map<const Matrix>(t.carriage(0).data().data(),
                                          t.carriage(0).dim(1), t.carriage(0).dim(2));
    for (int i = 1; i < t.order(); ++i) {
        const auto& car = t.carriage(i);
        const Index n = car.dim(1), rn = car.dim(2);
        Matrix next = cur * row_unfolding(car);  // N x (n*rn)
        cur = Eigen::Map<const Matrix>(next.data(), next.rows() * n, rn).eval();
    }
    Vector data = Eigen::Map<const Vector>(cur.data(), cur.size());
    return DenseTensor(dims, std::move(data));
}

TTTensor tt_svd(const DenseTensor& x, double tol) {
    const int d = x.order();
    const auto& dims = x.shape();
    const double norm = x.norm();
    const double delta = tol * norm / std::sqrt(static_cast<double>(std::max(d - 1, 1)));

    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(d));
    if (d == 1) {
        Matrix m = Eigen::Map<const Matrix>(x.data().data(), dims[0], 1);
        cars.push_back(carriage_from_matrix(m, 1, dims[0], 1));
        return TTTensor(std::move(cars));
    }

    Index r_prev = 1;
    Index rest = x.size() / dims[0];
    Matrix cur = Eigen::Map<const Matrix>(x.data().data(), dims[0], rest);
    for (int i = 0; i + 1 < d; ++i) {
        auto svd = svd_thin(cur);
        const Index k = rank_for_tail(svd.s, delta);
        cars.push_back(carriage_from_matrix(svd.u.leftCols(k), r_prev, dims[static_cast<size_t>(i)], k));
        Matrix w = svd.s.head(k).asDiagonal() * svd.v.leftCols(k).adjoint();  // k x rest
        const Index n_next = dims[static_cast<size_t>(i + 1)];
        rest = w.cols() / n_next;
        cur = Eigen::Map<const Matrix>(w.data(), k * n_next, rest).eval();
        r_prev = k;
    }
    cars.push_back(carriage_from_matrix(cur, r_prev, dims[static_cast<size_t>(d - 1)], 1));
    return TTTensor(std::move(cars));
}

TTTensor tt_round(TTTensor t, double tol) {
    return tt_round(std::move(t), tol, std::numeric_limits<Index>::max());
}

TTTensor tt_round(TTTensor t, double tol, Index max_rank) {
    const int d = t.order();
    if (d == 1) return t;
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) cars.push_back(t.carriage(i));

    right_orthogonalize(cars);
    const double norm = cars[0].norm();
    const double delta = tol * norm / std::sqrt(static_cast<double>(d - 1));

    for (int i = 0; i + 1 < d; ++i) {
        const Index rp = cars[static_cast<size_t>(i)].dim(0);
        const Index n = cars[static_cast<size_t>(i)].dim(1);
        Matrix c = col_unfolding(cars[static_cast<size_t>(i)]);  // (rp*n) x rn
        auto svd = svd_thin(c);
        const Index k = std::min(rank_for_tail(svd.s, delta), std::max<Index>(max_rank, 1));
        cars[static_cast<size_t>(i)] = carriage_from_matrix(svd.u.leftCols(k), rp, n, k);
        Matrix w = svd.s.head(k).asDiagonal() * svd.v.leftCols(k).adjoint();  // k x rn
        cars[static_cast<size_t>(i + 1)] =
            mode_product(cars[static_cast<size_t>(i + 1)], w, 0);
    }
    return TTTensor(std::move(cars));
}

TTTensor tt_add(const TTTensor& a, const TTTensor& b) {
    if (a.dims() != b.dims()) throw DimensionMismatch("tt_add: dimension mismatch");
    const int d = a.order();
    if (d == 1) {
        DenseTensor c = a.carriage(0);
        c += b.carriage(0);
        return TTTensor({c});
    }
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        const auto& ca = a.carriage(i);
        const auto& cb = b.carriage(i);
        const Index n = ca.dim(1);
        const Index rpa = ca.dim(0), rna = ca.dim(2);
        const Index rpb = cb.dim(0), rnb = cb.dim(2);
        const bool first = (i == 0), last = (i == d - 1);
        const Index rp = first ? 1 : rpa + rpb;
        const Index rn = last ? 1 : rna + rnb;
        DenseTensor c({rp, n, rn});
        for (Index j = 0; j < n; ++j) {
            auto sa = carriage_slice(ca, j);
            auto sb = carriage_slice(cb, j);
            Eigen::Map<Matrix, 0, Eigen::OuterStride<>> dst(
                c.data().data() + rp * j, rp, rn, Eigen::OuterStride<>(rp * n));
            if (first) {
                dst.leftCols(rna) = sa;
                dst.rightCols(rnb) = sb;
            } else if (last) {
                dst.topRows(rpa) = sa;
                dst.bottomRows(rpb) = sb;
            } else {
                dst.topLeftCorner(rpa, rna) = sa;
                dst.bottomRightCorner(rpb, rnb) = sb;
            }
        }
        cars.push_back(std::move(c));
    }
    return TTTensor(std::move(cars));
}

TTTensor tt_scale(TTTensor t, Complex alpha) {
    t.carriage(0) *= alpha;
    return t;
}

TTTensor tt_mode_multiply(const TTTensor& t, const Matrix& m, int mode) {
    if (mode < 0 || mode >= t.order()) {
        throw DimensionMismatch("tt_mode_multiply: mode out of range");
    }
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(t.order()));
    for (int i = 0; i < t.order(); ++i) {
        if (i == mode) {
            cars.push_back(mode_product(t.carriage(i), m, 1));
        } else {
            cars.push_back(t.carriage(i));
        }
    }
    return TTTensor(std::move(cars));
}

Complex tt_dot(const TTTensor& a, const TTTensor& b) {
    if (a.dims() != b.dims()) throw DimensionMismatch("tt_dot: dimension mismatch");
    Matrix e = Matrix::Ones(1, 1);
    for (int i = 0; i < a.order(); ++i) {
        const auto& ca = a.carriage(i);
        const auto& cb = b.carriage(i);
        Matrix next = Matrix::Zero(ca.dim(2), cb.dim(2));
        for (Index j = 0; j < ca.dim(1); ++j) {
            auto sa = carriage_slice(ca, j);
            auto sb = carriage_slice(cb, j);
            next.noalias() += sa.adjoint() * e * sb;
        }
        e = std::move(next);
    }
    return e(0, 0);
}

double frob_norm(const DenseTensor& t) { return t.norm(); }

double frob_norm(const TuckerTensor& t) { return t.core().norm(); }

double frob_norm(const TTTensor& t) {
    if (t.order() == 1) return t.carriage(0).norm();
    std::vector<DenseTensor> cars;
    cars.reserve(static_cast<size_t>(t.order()));
    for (int i = 0; i < t.order(); ++i) cars.push_back(t.carriage(i));
    right_orthogonalize(cars);
    return cars[0].norm();
}

Matrix block_vector_for_mode(const TuckerTensor& t, int mode) {
    if (mode < 0 || mode >= t.order()) {
        throw DimensionMismatch("block_vector_for_mode: mode out of range");
    }
    return t.factor(mode);
}

Matrix block_vector_for_mode(const TTTensor& t, int mode) {
    if (mode < 0 || mode >= t.order()) {
        throw DimensionMismatch("block_vector_for_mode: mode out of range");
    }
    const auto& car = t.carriage(mode);
    if (mode == 0) {
        return Eigen::Map<const Matrix>(car.data().data(), car.dim(1), car.dim(2));
    }
    return unfold(car, 1);
}

}  // namespace tbrk
