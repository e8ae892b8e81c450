#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace geomlr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input outside the mathematical domain of an operation (non-SPD argument,
// invalid metric parameters, degenerate hyperplane, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Iterative kernel failed to meet its residual contract.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

// Rotation logarithm requested within eps_pi of the antipodal branch.
class BranchError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Optimizer produced non-finite values.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

inline Matrix sym_part(const Matrix& X) { return 0.5 * (X + X.transpose()); }
inline Matrix skew_part(const Matrix& X) { return 0.5 * (X - X.transpose()); }

bool all_finite(const Matrix& X);

// Symmetric n x n matrix. Construction symmetrizes after checking the input
// is symmetric to within 1e-12 relative Frobenius.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(const Matrix& X);

  static SymmetricMatrix zero(Index n);
  static SymmetricMatrix identity(Index n);

  const Matrix& mat() const { return m_; }
  Index n() const { return m_.rows(); }

 protected:
  struct AlreadySymmetric {};
  SymmetricMatrix(const Matrix& X, AlreadySymmetric) : m_(X) {}

  Matrix m_;
};

// SPD guard floor used by construction checks and spd_project.
inline double eps_spd(double lambda_max) { return 1e-10 * (1.0 + lambda_max); }

// Symmetric positive definite matrix; smallest eigenvalue is checked against
// eps_spd(largest eigenvalue) on construction.
class SpdMatrix : public SymmetricMatrix {
 public:
  explicit SpdMatrix(const Matrix& X);
  explicit SpdMatrix(const SymmetricMatrix& X);

  static SpdMatrix identity(Index n);
};

// Lower-triangular matrix (tangent or factor). Strictly-upper entries must be
// zero; a positive diagonal is guaranteed only for factors produced by chol().
class LowerTriangular {
 public:
  explicit LowerTriangular(const Matrix& X);

  const Matrix& mat() const { return m_; }
  Index n() const { return m_.rows(); }

 private:
  Matrix m_;
};

class SkewMatrix {
 public:
  explicit SkewMatrix(const Matrix& X);

  static SkewMatrix zero(Index n);

  const Matrix& mat() const { return m_; }
  Index n() const { return m_.rows(); }

 private:
  Matrix m_;
};

class RotationMatrix {
 public:
  explicit RotationMatrix(const Matrix& X);

  static RotationMatrix identity(Index n);

  const Matrix& mat() const { return m_; }
  Index n() const { return m_.rows(); }

 private:
  Matrix m_;
};

// Eigendecomposition of a symmetric matrix, eigenvalues descending.
struct EigenPair {
  Matrix U;
  Vector sigma;

  Index n() const { return sigma.size(); }
};

}  // namespace geomlr
