#include "geomlr/types.hpp"

#include <cmath>
#include <sstream>

namespace geomlr {

bool all_finite(const Matrix& X) { return X.allFinite(); }

namespace {

void require_square(const Matrix& X, const char* what) {
  if (X.rows() != X.cols()) {
    std::ostringstream os;
    os << what << ": matrix is " << X.rows() << "x" << X.cols() << ", expected square";
    throw DimensionError(os.str());
  }
}

void require_finite(const Matrix& X, const char* what) {
  if (!X.allFinite()) throw DomainError(std::string(what) + ": non-finite entries");
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(const Matrix& X) : m_() {
  require_square(X, "SymmetricMatrix");
  require_finite(X, "SymmetricMatrix");
  const double asym = (X - X.transpose()).norm();
  if (asym > 1e-12 * (1.0 + X.norm())) {
    std::ostringstream os;
    os << "SymmetricMatrix: asymmetry " << asym << " exceeds 1e-12 relative";
    throw DomainError(os.str());
  }
  m_ = sym_part(X);
}

SymmetricMatrix SymmetricMatrix::zero(Index n) {
  return SymmetricMatrix(Matrix::Zero(n, n), AlreadySymmetric{});
}

SymmetricMatrix SymmetricMatrix::identity(Index n) {
  return SymmetricMatrix(Matrix::Identity(n, n), AlreadySymmetric{});
}

namespace {

void check_spd(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("SpdMatrix: eigenvalue check failed", -1.0);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= eps_spd(hi)) {
    std::ostringstream os;
    os << "SpdMatrix: smallest eigenvalue " << lo << " is not above the SPD guard "
       << eps_spd(hi);
    throw DomainError(os.str());
  }
}

}  // namespace

SpdMatrix::SpdMatrix(const Matrix& X) : SymmetricMatrix(X) { check_spd(m_); }

SpdMatrix::SpdMatrix(const SymmetricMatrix& X) : SymmetricMatrix(X) { check_spd(m_); }

SpdMatrix SpdMatrix::identity(Index n) { return SpdMatrix(Matrix::Identity(n, n)); }

LowerTriangular::LowerTriangular(const Matrix& X) : m_() {
  require_square(X, "LowerTriangular");
  require_finite(X, "LowerTriangular");
  const Matrix upper = X.triangularView<Eigen::StrictlyUpper>();
  if (upper.norm() > 1e-12 * (1.0 + X.norm())) {
    throw DomainError("LowerTriangular: strictly-upper part is not zero");
  }
  m_ = X.triangularView<Eigen::Lower>();
}

SkewMatrix::SkewMatrix(const Matrix& X) : m_() {
  require_square(X, "SkewMatrix");
  require_finite(X, "SkewMatrix");
  const double res = (X + X.transpose()).norm();
  if (res > 1e-12 * (1.0 + X.norm())) {
    std::ostringstream os;
    os << "SkewMatrix: symmetry residual " << res << " exceeds 1e-12";
    throw DomainError(os.str());
  }
  m_ = skew_part(X);
}

SkewMatrix SkewMatrix::zero(Index n) { return SkewMatrix(Matrix::Zero(n, n)); }

RotationMatrix::RotationMatrix(const Matrix& X) : m_() {
  require_square(X, "RotationMatrix");
  require_finite(X, "RotationMatrix");
  const double ortho = (X.transpose() * X - Matrix::Identity(X.rows(), X.cols())).norm();
  if (ortho > 1e-10 * std::sqrt(static_cast<double>(X.rows()))) {
    std::ostringstream os;
    os << "RotationMatrix: orthogonality residual " << ortho << " exceeds 1e-10";
    throw DomainError(os.str());
  }
  const double det = X.determinant();
  if (std::abs(det - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "RotationMatrix: determinant " << det << " is not +1 within 1e-8";
    throw DomainError(os.str());
  }
  m_ = X;
}

RotationMatrix RotationMatrix::identity(Index n) {
  return RotationMatrix(Matrix::Identity(n, n));
}

}  // namespace geomlr
