#pragma once

#include <vector>

#include "tbrk/linalg.hpp"
#include "tbrk/types.hpp"

namespace tbrk {

/// Dense d-way tensor. Entries are stored with the first index fastest,
/// so vec(X) coincides with data() and the mode-0 unfolding is a plain
/// column-major reshape.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(std::vector<Index> shape);
    DenseTensor(std::vector<Index> shape, Vector data);

    int order() const { return static_cast<int>(shape_.size()); }
    const std::vector<Index>& shape() const { return shape_; }
    Index dim(int mode) const { return shape_.at(static_cast<size_t>(mode)); }
    Index size() const { return data_.size(); }

    const Vector& data() const { return data_; }
    Vector& data() { return data_; }

    Complex at(const std::vector<Index>& idx) const { return data_(flat_index(idx)); }
    Complex& at(const std::vector<Index>& idx) { return data_(flat_index(idx)); }
    Index flat_index(const std::vector<Index>& idx) const;

    double norm() const { return data_.norm(); }

    DenseTensor& operator+=(const DenseTensor& other);
    DenseTensor& operator-=(const DenseTensor& other);
    DenseTensor& operator*=(Complex alpha);

private:
    std::vector<Index> shape_;
    Vector data_;
};

DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);
DenseTensor operator*(Complex alpha, DenseTensor t);

/// Mode-`mode` unfolding: dim(mode) rows; the remaining indices enumerate
/// the columns in their original order with the first remaining index
/// fastest.
Matrix unfold(const DenseTensor& x, int mode);

/// Exact inverse of unfold for the given shape.
DenseTensor fold(const Matrix& m, const std::vector<Index>& shape, int mode);

/// i-th mode product X x_i M: contracts dim(mode) with the columns of M,
/// so the result has M.rows() in that mode and (X x_i M)_(i) = M X_(i).
DenseTensor mode_product(const DenseTensor& x, const Matrix& m, int mode);

/// Tucker tensor: core of shape (k_1,...,k_d) with per-mode factors of
/// shape (n_i, k_i). Factors are kept orthonormal; a constructor argument
/// violating that beyond 1e-10 is re-orthonormalized with the triangular
/// part absorbed into the core.
class TuckerTensor {
public:
    TuckerTensor() = default;  ///< empty sentinel; not a valid tensor
    TuckerTensor(DenseTensor core, std::vector<Matrix> factors);

    static TuckerTensor zero(const std::vector<Index>& shape);

    int order() const { return core_.order(); }
    const DenseTensor& core() const { return core_; }
    const std::vector<Matrix>& factors() const { return factors_; }
    const Matrix& factor(int mode) const { return factors_.at(static_cast<size_t>(mode)); }
    std::vector<Index> shape() const;
    std::vector<Index> ranks() const { return core_.shape(); }

private:
    DenseTensor core_;
    std::vector<Matrix> factors_;
};

DenseTensor tucker_full(const TuckerTensor& t);

/// Truncated higher-order SVD with a global relative target; each mode
/// gets a tol/sqrt(d) share of the squared truncation budget.
TuckerTensor hosvd(const DenseTensor& x, double tol);
TuckerTensor hosvd(const DenseTensor& x, const std::vector<Index>& ranks);

/// Rank trim of an existing Tucker tensor: HOSVD of the core, absorbed
/// into the factors.
TuckerTensor tucker_recompress(const TuckerTensor& t, double tol);

/// Tensor train. Carriages are stored uniformly as order-3 tensors of
/// shape (r_{i-1}, n_i, r_i) with boundary ranks r_0 = r_d = 1.
class TTTensor {
public:
    TTTensor() = default;
    explicit TTTensor(std::vector<DenseTensor> carriages);

    static TTTensor zero(const std::vector<Index>& dims);

    int order() const { return static_cast<int>(carriages_.size()); }
    std::vector<Index> dims() const;
    std::vector<Index> ranks() const;
    Index rank(int bond) const;  ///< r_bond for bond in [0, d]; r_0 = r_d = 1

    const DenseTensor& carriage(int i) const { return carriages_.at(static_cast<size_t>(i)); }
    DenseTensor& carriage(int i) { return carriages_.at(static_cast<size_t>(i)); }

    Complex entry(const std::vector<Index>& idx) const;

private:
    std::vector<DenseTensor> carriages_;
};

inline constexpr Index kDefaultDenseBudget = 8'000'000;

DenseTensor tt_full(const TTTensor& t, Index element_budget = kDefaultDenseBudget);
Complex tt_entry(const TTTensor& t, const std::vector<Index>& idx);

TTTensor tt_svd(const DenseTensor& x, double tol);
/// Rank truncation with global relative tolerance; ranks never increase.
/// The overload with max_rank additionally caps every bond.
TTTensor tt_round(TTTensor t, double tol);
TTTensor tt_round(TTTensor t, double tol, Index max_rank);

TTTensor tt_add(const TTTensor& a, const TTTensor& b);
TTTensor tt_scale(TTTensor t, Complex alpha);
/// Multiply the physical index of carriage `mode` by M (mode product).
TTTensor tt_mode_multiply(const TTTensor& t, const Matrix& m, int mode);
Complex tt_dot(const TTTensor& a, const TTTensor& b);

double frob_norm(const DenseTensor& t);
double frob_norm(const TuckerTensor& t);
double frob_norm(const TTTensor& t);

/// Starting block for the mode-i Krylov space: the i-th Tucker factor, or
/// for tensor trains the first carriage (i = 0) / the physical-mode
/// unfolding of carriage i otherwise.
Matrix block_vector_for_mode(const TuckerTensor& t, int mode);
Matrix block_vector_for_mode(const TTTensor& t, int mode);

}  // namespace tbrk
