#include "tbrk/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "tbrk/errors.hpp"

namespace tbrk {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw Error(std::string("tensor/matrix file: ") + what);
}

double read_finite(std::istream& is, const char* what) {
    double v;
    if (!(is >> v) || !std::isfinite(v)) {
        throw Error(std::string("tensor/matrix file: bad or non-finite value in ") + what);
    }
    return v;
}

}  // namespace

void write_matrix(std::ostream& os, const Matrix& m) {
    os << m.rows() << ' ' << m.cols() << '\n';
    os << std::setprecision(17);
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            os << m(i, j).real() << ' ' << m(i, j).imag() << '\n';
        }
    }
}

Matrix read_matrix(std::istream& is) {
    long long rows, cols;
    require(static_cast<bool>(is >> rows >> cols), "missing matrix header");
    require(rows >= 0 && cols >= 0, "negative matrix dimensions");
    Matrix m(rows, cols);
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            const double re = read_finite(is, "matrix entries");
            const double im = read_finite(is, "matrix entries");
            m(i, j) = Complex(re, im);
        }
    }
    return m;
}

void write_tensor(std::ostream& os, const DenseTensor& t) {
    os << "DENSE " << t.order();
    for (Index n : t.shape()) os << ' ' << n;
    os << '\n' << std::setprecision(17);
    for (Index i = 0; i < t.size(); ++i) {
        os << t.data()(i).real() << ' ' << t.data()(i).imag() << '\n';
    }
}

void write_tensor(std::ostream& os, const TuckerTensor& t) {
    os << "TUCKER " << t.order() << '\n';
    const auto ranks = t.ranks();
    for (size_t i = 0; i < ranks.size(); ++i) os << (i ? " " : "") << ranks[i];
    os << '\n';
    write_matrix(os, unfold(t.core(), 0));
    for (int i = 0; i < t.order(); ++i) write_matrix(os, t.factor(i));
}

void write_tensor(std::ostream& os, const TTTensor& t) {
    os << "TT " << t.order() << '\n';
    const auto dims = t.dims();
    for (size_t i = 0; i < dims.size(); ++i) os << (i ? " " : "") << dims[i];
    os << '\n';
    const auto ranks = t.ranks();
    for (size_t i = 0; i < ranks.size(); ++i) os << (i ? " " : "") << ranks[i];
    os << '\n';
    for (int i = 0; i < t.order(); ++i) {
        const auto& car = t.carriage(i);
        Matrix block = Eigen::Map<const Matrix>(car.data().data(),
                                                car.dim(0) * car.dim(1), car.dim(2));
        write_matrix(os, block);
    }
}

TensorFile read_tensor(std::istream& is) {
    std::string kind;
    require(static_cast<bool>(is >> kind), "missing tensor header");
    long long d;
    require(static_cast<bool>(is >> d) && d >= 1, "bad tensor order");

    if (kind == "DENSE") {
        std::vector<Index> shape(static_cast<size_t>(d));
        Index total = 1;
        for (auto& n : shape) {
            long long v;
            require(static_cast<bool>(is >> v) && v >= 1, "bad dense shape");
            n = v;
            total *= n;
        }
        Vector data(total);
        for (Index i = 0; i < total; ++i) {
            const double re = read_finite(is, "dense entries");
            const double im = read_finite(is, "dense entries");
            data(i) = Complex(re, im);
        }
        return DenseTensor(std::move(shape), std::move(data));
    }

    if (kind == "TUCKER") {
        std::vector<Index> ranks(static_cast<size_t>(d));
        for (auto& k : ranks) {
            long long v;
            require(static_cast<bool>(is >> v) && v >= 1, "bad Tucker core shape");
            k = v;
        }
        Matrix core_unf = read_matrix(is);
        DenseTensor core = fold(core_unf, ranks, 0);
        std::vector<Matrix> factors;
        factors.reserve(static_cast<size_t>(d));
        for (long long i = 0; i < d; ++i) factors.push_back(read_matrix(is));
        return TuckerTensor(std::move(core), std::move(factors));
    }

    if (kind == "TT") {
        std::vector<Index> dims(static_cast<size_t>(d));
        for (auto& n : dims) {
            long long v;
            require(static_cast<bool>(is >> v) && v >= 1, "bad TT dims");
            n = v;
        }
        std::vector<Index> ranks(static_cast<size_t>(d) - 1);
        for (auto& r : ranks) {
            long long v;
            require(static_cast<bool>(is >> v) && v >= 1, "bad TT ranks");
            r = v;
        }
        std::vector<DenseTensor> cars;
        cars.reserve(static_cast<size_t>(d));
        for (long long i = 0; i < d; ++i) {
            const Index rp = (i == 0) ? 1 : ranks[static_cast<size_t>(i - 1)];
            const Index rn = (i == d - 1) ? 1 : ranks[static_cast<size_t>(i)];
            Matrix block = read_matrix(is);
            require(block.rows() == rp * dims[static_cast<size_t>(i)] && block.cols() == rn,
                    "TT carriage block shape mismatch");
            Vector data = Eigen::Map<const Vector>(block.data(), block.size());
            cars.emplace_back(std::vector<Index>{rp, dims[static_cast<size_t>(i)], rn},
                              std::move(data));
        }
        return TTTensor(std::move(cars));
    }

    throw Error("tensor file: unknown header '" + kind + "'");
}

TensorFile read_tensor_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open tensor file: " + path);
    return read_tensor(f);
}

void write_tensor_file(const std::string& path, const TensorFile& t) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write tensor file: " + path);
    std::visit([&f](const auto& tt) { write_tensor(f, tt); }, t);
}

Matrix read_matrix_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open matrix file: " + path);
    return read_matrix(f);
}

void write_matrix_file(const std::string& path, const Matrix& m) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write matrix file: " + path);
    write_matrix(f, m);
}

}  // namespace tbrk
