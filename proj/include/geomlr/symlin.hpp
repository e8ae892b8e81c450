#pragma once

#include <utility>

#include "geomlr/types.hpp"

namespace geomlr {

// Scalar function applied through the spectral calculus. Pow with a
// non-integer exponent, log, and sqrt require positive spectrum.
struct ScalarFn {
  enum class Kind { Exp, Log, Sqrt, Pow };

  Kind kind = Kind::Exp;
  double p = 1.0;

  double operator()(double x) const;
  double deriv(double x) const;
  bool needs_positive() const;
  std::string name() const;
};

namespace fn {
inline ScalarFn exp() { return {ScalarFn::Kind::Exp, 0.0}; }
inline ScalarFn log() { return {ScalarFn::Kind::Log, 0.0}; }
inline ScalarFn sqrt() { return {ScalarFn::Kind::Sqrt, 0.0}; }
inline ScalarFn pow(double p) { return {ScalarFn::Kind::Pow, p}; }
}  // namespace fn

// Eigendecomposition with descending eigenvalues; reconstruction and
// orthogonality residuals are verified (ConvergenceError on failure).
EigenPair eig_sym(const SymmetricMatrix& S);

// U f(Sigma) U^T.
SymmetricMatrix funcm(const SymmetricMatrix& S, ScalarFn f);
SymmetricMatrix funcm(const EigenPair& es, ScalarFn f);

// First-order differential of funcm at S applied to V (Daleckii-Krein first
// divided differences; near-coincident eigenvalues fall back to the midpoint
// derivative, gap threshold 1e-10 relative to the spectral radius).
SymmetricMatrix funcm_diff(const SymmetricMatrix& S, ScalarFn f, const SymmetricMatrix& V);
SymmetricMatrix funcm_diff(const EigenPair& es, ScalarFn f, const SymmetricMatrix& V);

// Inverse of the map V -> funcm_diff(S, f, V); requires the divided
// differences of f to be bounded away from zero on the spectrum.
SymmetricMatrix funcm_diff_solve(const EigenPair& es, ScalarFn f, const SymmetricMatrix& W);

// Cholesky factor with positive diagonal; reports the pivot index on failure.
LowerTriangular chol(const SpdMatrix& P);
LowerTriangular chol_unchecked(const Matrix& P);

// half(X) = strictly-lower part + half the diagonal.
Matrix half_lower(const Matrix& X);

// Differential of chol at P applied to V: L half(L^-1 V L^-T).
Matrix chol_diff(const SpdMatrix& P, const SymmetricMatrix& V);
Matrix chol_diff(const LowerTriangular& L, const SymmetricMatrix& V);

// Differential of L -> L L^T at L applied to a lower-triangular tangent X:
// X L^T + L X^T.
SymmetricMatrix chol_inv_diff(const LowerTriangular& L, const Matrix& X);

// Unique symmetric X with X P + P X = V.
SymmetricMatrix lyap_solve(const SpdMatrix& P, const SymmetricMatrix& V);
SymmetricMatrix lyap_solve(const EigenPair& es, const SymmetricMatrix& V);

struct LyapVjp {
  SymmetricMatrix dV;
  SymmetricMatrix dP;
};

// Adjoints of lyap_solve given the forward solution X and the cotangent G:
// dV = lyap_solve(P, G), dP = -X dV - dV X.
LyapVjp lyap_vjp(const SpdMatrix& P, const SymmetricMatrix& X, const SymmetricMatrix& G);
LyapVjp lyap_vjp(const EigenPair& es, const SymmetricMatrix& X, const SymmetricMatrix& G);

struct ProdSqrt {
  Matrix ba;  // (B A)^{1/2}
  Matrix ab;  // (A B)^{1/2} = (B A)^{1/2 T}
};

// Square roots of the (similar-to-SPD) products BA and AB:
// (BA)^{1/2} = B^{1/2} (B^{1/2} A B^{1/2})^{1/2} B^{-1/2}.
ProdSqrt prod_sqrt(const SpdMatrix& B, const SpdMatrix& A);

// Symmetrize and clamp eigenvalues from below at eps_floor.
SpdMatrix spd_project(const Matrix& S, double eps_floor);

}  // namespace geomlr
