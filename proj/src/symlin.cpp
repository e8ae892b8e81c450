#include "geomlr/symlin.hpp"

#include <cmath>
#include <sstream>

namespace geomlr {

double ScalarFn::operator()(double x) const {
  switch (kind) {
    case Kind::Exp: return std::exp(x);
    case Kind::Log: return std::log(x);
    case Kind::Sqrt: return std::sqrt(x);
    case Kind::Pow: return std::pow(x, p);
  }
  return 0.0;
}

double ScalarFn::deriv(double x) const {
  switch (kind) {
    case Kind::Exp: return std::exp(x);
    case Kind::Log: return 1.0 / x;
    case Kind::Sqrt: return 0.5 / std::sqrt(x);
    case Kind::Pow: return p * std::pow(x, p - 1.0);
  }
  return 0.0;
}

bool ScalarFn::needs_positive() const {
  switch (kind) {
    case Kind::Exp: return false;
    case Kind::Log:
    case Kind::Sqrt: return true;
    case Kind::Pow: {
      const bool integer = p == std::floor(p);
      return !(integer && p >= 0.0);
    }
  }
  return true;
}

std::string ScalarFn::name() const {
  switch (kind) {
    case Kind::Exp: return "exp";
    case Kind::Log: return "log";
    case Kind::Sqrt: return "sqrt";
    case Kind::Pow: {
      std::ostringstream os;
      os << "pow(" << p << ")";
      return os.str();
    }
  }
  return "?";
}

EigenPair eig_sym(const SymmetricMatrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S.mat());
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("eig_sym: solver did not converge", -1.0);
  }
  const Index n = S.n();
  EigenPair ep;
  ep.sigma = es.eigenvalues().reverse();
  ep.U = es.eigenvectors().rowwise().reverse();
  const double scale = 1.0 + S.mat().norm();
  const double rec = (ep.U * ep.sigma.asDiagonal() * ep.U.transpose() - S.mat()).norm();
  const double orth = (ep.U.transpose() * ep.U - Matrix::Identity(n, n)).norm();
  if (rec > 1e-10 * scale || orth > 1e-10 * std::sqrt(static_cast<double>(n))) {
    std::ostringstream os;
    os << "eig_sym: residuals exceed contract (reconstruction " << rec << ", orthogonality "
       << orth << ")";
    throw ConvergenceError(os.str(), std::max(rec, orth));
  }
  return ep;
}

namespace {

void require_positive_spectrum(const EigenPair& es, const ScalarFn& f, const char* op) {
  if (!f.needs_positive()) return;
  const double lo = es.sigma(es.n() - 1);
  if (lo <= 0.0) {
    std::ostringstream os;
    os << op << ": " << f.name() << " requires a positive spectrum, offending eigenvalue "
       << lo;
    throw DomainError(os.str());
  }
}

// First divided differences f[sigma_i, sigma_j]; the midpoint derivative is
// used when |sigma_i - sigma_j| <= 1e-10 * spectral radius.
Matrix dk_kernel(const EigenPair& es, const ScalarFn& f) {
  const Index n = es.n();
  const double gap = 1e-10 * es.sigma.cwiseAbs().maxCoeff();
  Matrix K(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double si = es.sigma(i), sj = es.sigma(j);
      double k;
      if (std::abs(si - sj) <= gap) {
        k = f.deriv(0.5 * (si + sj));
      } else {
        k = (f(si) - f(sj)) / (si - sj);
      }
      K(i, j) = K(j, i) = k;
    }
  }
  return K;
}

SymmetricMatrix from_spectral(const Matrix& U, const Matrix& core) {
  return SymmetricMatrix(sym_part(U * core * U.transpose()));
}

}  // namespace

SymmetricMatrix funcm(const SymmetricMatrix& S, ScalarFn f) { return funcm(eig_sym(S), f); }

SymmetricMatrix funcm(const EigenPair& es, ScalarFn f) {
  require_positive_spectrum(es, f, "funcm");
  Vector fe(es.n());
  for (Index i = 0; i < es.n(); ++i) fe(i) = f(es.sigma(i));
  return from_spectral(es.U, fe.asDiagonal());
}

SymmetricMatrix funcm_diff(const SymmetricMatrix& S, ScalarFn f, const SymmetricMatrix& V) {
  return funcm_diff(eig_sym(S), f, V);
}

SymmetricMatrix funcm_diff(const EigenPair& es, ScalarFn f, const SymmetricMatrix& V) {
  require_positive_spectrum(es, f, "funcm_diff");
  const Matrix K = dk_kernel(es, f);
  const Matrix Vp = es.U.transpose() * V.mat() * es.U;
  return from_spectral(es.U, K.cwiseProduct(Vp));
}

SymmetricMatrix funcm_diff_solve(const EigenPair& es, ScalarFn f, const SymmetricMatrix& W) {
  require_positive_spectrum(es, f, "funcm_diff_solve");
  const Matrix K = dk_kernel(es, f);
  const double kmin = K.cwiseAbs().minCoeff();
  if (kmin < 1e-300) {
    throw DomainError("funcm_diff_solve: divided-difference kernel of " + f.name() +
                      " is singular on this spectrum");
  }
  const Matrix Wp = es.U.transpose() * W.mat() * es.U;
  return from_spectral(es.U, Wp.cwiseQuotient(K));
}

LowerTriangular chol_unchecked(const Matrix& P) {
  const Index n = P.rows();
  Matrix L = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = P(j, j);
    for (Index k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (d <= 0.0 || !std::isfinite(d)) {
      std::ostringstream os;
      os << "chol: pivot " << d << " at index " << j << " is not positive";
      throw DomainError(os.str());
    }
    L(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i) {
      double s = P(i, j);
      for (Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return LowerTriangular(L);
}

LowerTriangular chol(const SpdMatrix& P) { return chol_unchecked(P.mat()); }

Matrix half_lower(const Matrix& X) {
  Matrix H = X.triangularView<Eigen::StrictlyLower>();
  H.diagonal() = 0.5 * X.diagonal();
  return H;
}

Matrix chol_diff(const SpdMatrix& P, const SymmetricMatrix& V) {
  return chol_diff(chol(P), V);
}

Matrix chol_diff(const LowerTriangular& L, const SymmetricMatrix& V) {
  const auto& Lm = L.mat();
  const Matrix M = Lm.triangularView<Eigen::Lower>().solve(
      Lm.triangularView<Eigen::Lower>().solve(V.mat()).transpose());
  return Lm * half_lower(M);
}

SymmetricMatrix chol_inv_diff(const LowerTriangular& L, const Matrix& X) {
  const Matrix R = X * L.mat().transpose();
  return SymmetricMatrix(R + R.transpose());
}

SymmetricMatrix lyap_solve(const SpdMatrix& P, const SymmetricMatrix& V) {
  return lyap_solve(eig_sym(P), V);
}

SymmetricMatrix lyap_solve(const EigenPair& es, const SymmetricMatrix& V) {
  const Index n = es.n();
  if (es.sigma(n - 1) <= 0.0) {
    std::ostringstream os;
    os << "lyap_solve: base matrix is not SPD (eigenvalue " << es.sigma(n - 1) << ")";
    throw DomainError(os.str());
  }
  const Matrix Vp = es.U.transpose() * V.mat() * es.U;
  Matrix X(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) X(i, j) = Vp(i, j) / (es.sigma(i) + es.sigma(j));
  return from_spectral(es.U, X);
}

LyapVjp lyap_vjp(const SpdMatrix& P, const SymmetricMatrix& X, const SymmetricMatrix& G) {
  return lyap_vjp(eig_sym(P), X, G);
}

LyapVjp lyap_vjp(const EigenPair& es, const SymmetricMatrix& X, const SymmetricMatrix& G) {
  SymmetricMatrix dV = lyap_solve(es, G);
  const Matrix dP = -X.mat() * dV.mat() - dV.mat() * X.mat();
  return {std::move(dV), SymmetricMatrix(sym_part(dP))};
}

ProdSqrt prod_sqrt(const SpdMatrix& B, const SpdMatrix& A) {
  const EigenPair eb = eig_sym(B);
  const Matrix Bh = funcm(eb, fn::sqrt()).mat();
  const Matrix Bmh = funcm(eb, fn::pow(-0.5)).mat();
  const Matrix core = funcm(SpdMatrix(Bh * A.mat() * Bh), fn::sqrt()).mat();
  ProdSqrt out;
  out.ba = Bh * core * Bmh;
  out.ab = out.ba.transpose();
  return out;
}

SpdMatrix spd_project(const Matrix& S, double eps_floor) {
  if (!(eps_floor > 0.0)) throw DomainError("spd_project: eps_floor must be positive");
  const SymmetricMatrix sym(sym_part(S));
  const EigenPair es = eig_sym(sym);
  Vector clamped = es.sigma.cwiseMax(eps_floor);
  return SpdMatrix(sym_part(es.U * clamped.asDiagonal() * es.U.transpose()));
}

}  // namespace geomlr
