#pragma once

#include <complex>

#include <Eigen/Dense>

namespace tbrk {

using Complex = std::complex<double>;
using Index = Eigen::Index;

/// Dense complex matrix, column-major. The scalar field is complex
/// throughout; real problems are carried with zero imaginary parts.
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

}  // namespace tbrk
