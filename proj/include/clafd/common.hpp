#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace clafd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when matrix or vector shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical precondition fails (singular or indefinite
/// matrix, non-finite objective, ...).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// log|M| for a symmetric positive definite matrix. Throws NumericError
/// when the Cholesky factorization fails.
double log_det_spd(const Matrix& m, const char* what);

}  // namespace clafd
