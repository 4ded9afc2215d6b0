#pragma once

#include <random>
#include <vector>

#include "tbrk/linalg.hpp"
#include "tbrk/operators.hpp"
#include "tbrk/tensor.hpp"

namespace tbrk::test {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, bool complex_entries = true) {
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            m(i, j) = Complex(normal(rng), complex_entries ? normal(rng) : 0.0);
        }
    }
    return m;
}

/// Hermitian positive definite with spectrum bounded away from zero.
inline Matrix random_spd(std::mt19937_64& rng, Index n, double shift = 0.0) {
    Matrix a = random_matrix(rng, n, n);
    a = (a * a.adjoint()).eval();
    a.diagonal().array() += (shift > 0.0 ? shift : static_cast<double>(n));
    return a;
}

/// General matrix shifted to keep its numerical range in the right half plane.
inline Matrix random_stable(std::mt19937_64& rng, Index n) {
    Matrix a = random_matrix(rng, n, n, false);
    a.diagonal().array() += 3.0 * static_cast<double>(n);
    return a;
}

inline DenseTensor random_tensor(std::mt19937_64& rng, const std::vector<Index>& shape,
                                 bool complex_entries = true) {
    DenseTensor t(shape);
    std::normal_distribution<double> normal;
    for (Index i = 0; i < t.size(); ++i) {
        t.data()(i) = Complex(normal(rng), complex_entries ? normal(rng) : 0.0);
    }
    return t;
}

inline TuckerTensor random_tucker(std::mt19937_64& rng, const std::vector<Index>& shape,
                                  Index rank, bool complex_entries = true) {
    std::vector<Matrix> factors;
    for (Index n : shape) {
        factors.push_back(thin_qr(random_matrix(rng, n, rank, complex_entries)).q);
    }
    return TuckerTensor(random_tensor(rng, std::vector<Index>(shape.size(), rank), complex_entries),
                        std::move(factors));
}

inline TTTensor random_tt(std::mt19937_64& rng, const std::vector<Index>& dims,
                          const std::vector<Index>& ranks, bool complex_entries = true) {
    std::vector<DenseTensor> cars;
    const int d = static_cast<int>(dims.size());
    for (int i = 0; i < d; ++i) {
        const Index rp = (i == 0) ? 1 : ranks[static_cast<size_t>(i - 1)];
        const Index rn = (i == d - 1) ? 1 : ranks[static_cast<size_t>(i)];
        cars.push_back(random_tensor(rng, {rp, dims[static_cast<size_t>(i)], rn}, complex_entries));
    }
    return TTTensor(std::move(cars));
}

/// Largest principal angle (radians) between the column spaces of two
/// orthonormal bases of equal dimension.
inline double max_principal_angle(const Matrix& q1, const Matrix& q2) {
    auto svd = svd_thin(Matrix(q1.adjoint() * q2));
    double worst = 0.0;
    for (Index i = 0; i < svd.s.size(); ++i) {
        worst = std::max(worst, std::acos(std::min(svd.s(i), 1.0)));
    }
    return worst;
}

/// Brute-force mode product straight from its defining sum.
inline DenseTensor mode_product_bruteforce(const DenseTensor& x, const Matrix& m, int mode) {
    std::vector<Index> shape = x.shape();
    shape[static_cast<size_t>(mode)] = m.rows();
    DenseTensor out(shape);
    std::vector<Index> idx(shape.size(), 0);
    for (Index pos = 0; pos < out.size(); ++pos) {
        Complex v = 0.0;
        std::vector<Index> src = idx;
        for (Index t = 0; t < x.dim(mode); ++t) {
            src[static_cast<size_t>(mode)] = t;
            v += x.at(src) * m(idx[static_cast<size_t>(mode)], t);
        }
        out.data()(pos) = v;
        for (size_t k = 0; k < shape.size(); ++k) {
            if (idx[k] + 1 < shape[k]) {
                ++idx[k];
                break;
            }
            idx[k] = 0;
        }
    }
    return out;
}

}  // namespace tbrk::test
