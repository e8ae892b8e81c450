#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "geomlr/mlr.hpp"

namespace geomlr {

SymmetricMatrix vjp_funcm(const SymmetricMatrix& S, ScalarFn f, const Matrix& G);
SymmetricMatrix vjp_funcm(const EigenPair& es, ScalarFn f, const Matrix& G);

// G_L is a cotangent on the lower-triangular factor; entries above the
// diagonal are ignored.
SymmetricMatrix vjp_chol(const LowerTriangular& L, const Matrix& G_L);

inline LyapVjp vjp_lyap(const SpdMatrix& P, const SymmetricMatrix& X, const SymmetricMatrix& G) {
  return lyap_vjp(P, X, G);
}

struct GradBundle {
  bool has_dS = false;
  std::vector<Matrix> dS;                   // per input block (single block for SPD)
  std::vector<std::vector<Matrix>> dP;      // [class][block]
  std::vector<std::vector<Matrix>> dA;      // [class][block]
  double norm() const;
  void scale(double s);
  void axpy(double s, const GradBundle& other);  // this += s * other
};

struct SpdClassRecord {
  EigenPair esP;
  Matrix logP;     // LEM
  Matrix G;        // AIM: P^{-theta/2}
  Matrix X;        // AIM: sym(G S^theta G)
  EigenPair esX;
  Matrix M;        // AIM: log X
  Matrix D;        // EM: S^theta - P^theta
  Matrix Ltil;     // LCM: chol(P^theta), raw lower factor
  EigenPair esPp;  // BWM: eigen pair of P^{2 theta}
  Matrix Pp;       // BWM: P^{2 theta}
  Matrix Lbar;     // BWM: chol(P^{2 theta})
  Matrix W;        // BWM: Lbar A Lbar^T
  Matrix Xl;       // BWM: lyap_solve(P^{2 theta}, W)
  Matrix Bh, Bmh;  // BWM: (P^{2 theta})^{+-1/2}
  Matrix Mk;       // BWM: sym(Bh S^{2 theta} Bh)
  EigenPair esM;
  Matrix Rk;       // BWM: Mk^{1/2}
  Matrix Z1;       // BWM: Bh Rk Bmh
  Matrix T;        // BWM: sym(Z1 + Z1^T - 2 P^{2 theta})
};

struct LieBlockRecord {
  Matrix Q;  // P^T S
  Matrix M;  // so3 log of Q
  double angle = 0.0;
};

struct Tape {
  bool lie = false;
  MetricParams mp;
  int label = 0;
  double loss = 0.0;
  Vector logits;
  Vector probs;
  // SPD path
  SpdMlrLayer spd_layer;
  Matrix S;
  EigenPair esS;
  Matrix logS;  // LEM
  Matrix Sp;    // S^power, equals S when power == 1
  Matrix Ktil;  // LCM: chol(S^theta), raw lower factor
  std::vector<SpdClassRecord> cls;
  // Lie path
  LieMlrLayer lie_layer;
  std::vector<Matrix> S_blocks;
  std::vector<std::vector<LieBlockRecord>> lie_cls;
};

double spd_forward(const MetricParams& mp, const SpdMatrix& S, const SpdMlrLayer& layer,
                   int label, Tape& tape);
GradBundle spd_backward(const Tape& tape);

double lie_forward(const std::vector<RotationMatrix>& S, const LieMlrLayer& layer, int label,
                   Tape& tape);
GradBundle lie_backward(const Tape& tape);

std::pair<double, GradBundle> grad_spd_mlr(const MetricParams& mp, const SpdMatrix& S,
                                           const SpdMlrLayer& layer, int label);
std::pair<double, GradBundle> grad_lie_mlr(const std::vector<RotationMatrix>& S,
                                           const LieMlrLayer& layer, int label);

enum class PerturbSpace { Euclidean, Symmetric, SpdRetraction, RotationRetraction };

// Central-difference check of an analytic gradient over a basis of the
// perturbation space; returns the worst coordinate error relative to
// max(1, |analytic|, |numeric|).
double fd_check(const std::function<double(const Matrix&)>& f, const Matrix& x, double h,
                const Matrix& grad, PerturbSpace space = PerturbSpace::Euclidean);

}  // namespace geomlr
