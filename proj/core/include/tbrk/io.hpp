#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "tbrk/tensor.hpp"
#include "tbrk/types.hpp"

namespace tbrk {

/// Matrix text format: first line `rows cols`, then one entry per line as
/// `re im`, in column-major order.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

/// Tensor text formats. Headers are `DENSE d n1 ... nd`,
/// `TUCKER d` + core shape line, and `TT d` + dims line + ranks line;
/// every payload block uses the matrix format above (the Tucker core is
/// stored as its mode-0 unfolding, TT carriages as (r_prev*n) x r_next).
void write_tensor(std::ostream& os, const DenseTensor& t);
void write_tensor(std::ostream& os, const TuckerTensor& t);
void write_tensor(std::ostream& os, const TTTensor& t);

using TensorFile = std::variant<DenseTensor, TuckerTensor, TTTensor>;
TensorFile read_tensor(std::istream& is);

TensorFile read_tensor_file(const std::string& path);
void write_tensor_file(const std::string& path, const TensorFile& t);
Matrix read_matrix_file(const std::string& path);
void write_matrix_file(const std::string& path, const Matrix& m);

}  // namespace tbrk
