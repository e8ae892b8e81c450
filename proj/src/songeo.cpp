#include "geomlr/songeo.hpp"

#include <Eigen/QR>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace geomlr {

namespace {

double clamped_angle(const Matrix& R) {
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

void require_so3(const RotationMatrix& R, const char* op) {
  if (R.n() != 3) {
    std::ostringstream os;
    os << op << ": expected a 3x3 rotation, got n=" << R.n();
    throw DimensionError(os.str());
  }
}

}  // namespace

double euler_angle(const RotationMatrix& R) {
  require_so3(R, "euler_angle");
  return clamped_angle(R.mat());
}

Vector euler_axis(const RotationMatrix& R) {
  require_so3(R, "euler_axis");
  const double theta = clamped_angle(R.mat());
  const double s = std::sin(theta);
  if (theta < 1e-9 || theta > 3.14159265358979323846 - 1e-9 || s == 0.0) {
    std::ostringstream os;
    os << "euler_axis: axis undefined at angle " << theta;
    throw DomainError(os.str());
  }
  const auto& M = R.mat();
  Vector w(3);
  w << M(2, 1) - M(1, 2), M(0, 2) - M(2, 0), M(1, 0) - M(0, 1);
  return w / (2.0 * s);
}

SkewMatrix so3_log(const RotationMatrix& R) {
  require_so3(R, "so3_log");
  const Matrix half = 0.5 * (R.mat() - R.mat().transpose());
  // atan2 of the measured sine keeps the angle (and the 1/sin scale below)
  // well conditioned near pi, where acos of the trace loses digits.
  const double s = half.norm() / std::sqrt(2.0);
  const double c = std::clamp(0.5 * (R.mat().trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);
  const double pi = 3.14159265358979323846;
  if (theta > pi - eps_pi) {
    std::ostringstream os;
    os << "so3_log: rotation angle " << theta << " is within " << eps_pi
       << " of pi; the logarithm branch is ambiguous, perturb the input";
    throw BranchError(os.str());
  }
  if (theta < 1e-4) {
    return SkewMatrix(half * (1.0 + theta * theta / 6.0));
  }
  return SkewMatrix(half * (theta / s));
}

RotationMatrix so3_exp(const SkewMatrix& A) {
  if (A.n() != 3) throw DimensionError("so3_exp: expected a 3x3 skew matrix");
  const auto& K = A.mat();
  const double theta = std::sqrt(K(2, 1) * K(2, 1) + K(0, 2) * K(0, 2) + K(1, 0) * K(1, 0));
  double s, c;
  if (theta < 1e-8) {
    s = 1.0 - theta * theta / 6.0;
    c = 0.5 - theta * theta / 24.0;
  } else {
    s = std::sin(theta) / theta;
    c = (1.0 - std::cos(theta)) / (theta * theta);
  }
  const Matrix R = Matrix::Identity(3, 3) + s * K + c * (K * K);
  return RotationMatrix(R);
}

SkewMatrix so_log(const RotationMatrix& R, const RotationMatrix& S) {
  if (R.n() != S.n()) throw DimensionError("so_log: dimension mismatch");
  const RotationMatrix Q(R.mat().transpose() * S.mat());
  if (Q.n() == 3) return so3_log(Q);

  const Index n = Q.n();
  Eigen::RealSchur<Matrix> schur(Q.mat());
  if (schur.info() != Eigen::Success) {
    throw ConvergenceError("so_log: Schur decomposition did not converge", -1.0);
  }
  const Matrix U = schur.matrixU();
  const Matrix T = schur.matrixT();
  const double pi = 3.14159265358979323846;
  Matrix K = Matrix::Zero(n, n);
  Index i = 0;
  while (i < n) {
    if (i + 1 < n && std::abs(T(i + 1, i)) > 1e-12) {
      const double phi = std::atan2(T(i + 1, i), T(i, i));
      if (std::abs(phi) > pi - eps_pi) {
        throw BranchError("so_log: a rotation plane has angle within eps_pi of pi");
      }
      K(i, i + 1) = -phi;
      K(i + 1, i) = phi;
      i += 2;
    } else {
      if (T(i, i) < 0.0) {
        throw BranchError("so_log: -1 eigenvalue encountered (angle pi plane)");
      }
      i += 1;
    }
  }
  return SkewMatrix(skew_part(U * K * U.transpose()));
}

SkewMatrix so_project(const RotationMatrix& R, const Matrix& U) {
  if (U.rows() != R.n() || U.cols() != R.n()) {
    throw DimensionError("so_project: dimension mismatch");
  }
  return SkewMatrix(skew_part(R.mat().transpose() * U));
}

RotationMatrix orthonormalize_det1(const Matrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("orthonormalize_det1: matrix must be square");
  const Index n = M.rows();
  Eigen::HouseholderQR<Matrix> qr(M);
  Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix Rf = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (Rf(j, j) < 0.0) Q.col(j) *= -1.0;
  }
  if (Q.determinant() < 0.0) Q.col(n - 1) *= -1.0;
  return RotationMatrix(Q);
}

RotationMatrix so_retract(const RotationMatrix& R, const SkewMatrix& A) {
  if (R.n() != A.n()) throw DimensionError("so_retract: dimension mismatch");
  return orthonormalize_det1(R.mat() + R.mat() * A.mat());
}

RotationMatrix random_rotation(Rng& rng, Index n) {
  return orthonormalize_det1(gauss_matrix(rng, n, n, 1.0));
}

}  // namespace geomlr
