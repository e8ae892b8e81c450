#pragma once

#include <vector>

#include "geomlr/rng.hpp"
#include "geomlr/songeo.hpp"
#include "geomlr/spdgeo.hpp"

namespace geomlr {

using Logits = Vector;

struct SpdMlrLayer {
  MetricParams mp;
  std::vector<SpdMatrix> P;
  std::vector<SymmetricMatrix> A;
  Index classes() const { return static_cast<Index>(P.size()); }
  Index n() const { return P.empty() ? 0 : P.front().n(); }
};

struct LieMlrLayer {
  Index blocks = 1;
  std::vector<std::vector<RotationMatrix>> P;  // [class][block], each 3x3
  std::vector<std::vector<SkewMatrix>> A;
  Index classes() const { return static_cast<Index>(P.size()); }
};

struct LogEigLayer {
  Index dim = 0;  // matrix dimension d; inputs flatten to d(d+1)/2
  Matrix weight;  // classes x d(d+1)/2
  Vector bias;    // classes
  Index classes() const { return weight.rows(); }
};

SpdMlrLayer init_spd_mlr(const MetricParams& mp, Index n, Index classes, Rng& rng);
LieMlrLayer init_lie_mlr(Index blocks, Index classes, Rng& rng);
LogEigLayer init_logeig(Index n, Index classes, Rng& rng);

// Upper-triangular flattening with sqrt(2)-scaled off-diagonals, so the
// Euclidean inner product of flattened vectors equals the Frobenius product.
Vector sym_flatten(const Matrix& X);
Matrix sym_unflatten(const Vector& v, Index n);

double margin_distance(const MetricParams& mp, const SpdMatrix& S, const SpdMatrix& P,
                       const SymmetricMatrix& Atil);

SymmetricMatrix make_tilde_A_pt(const MetricParams& mp, const SpdMatrix& P,
                                const SymmetricMatrix& A);
SymmetricMatrix make_tilde_A_lt(const SpdMatrix& P, const SymmetricMatrix& A);
// Cholesky-translation parameter map composed with the power deformation;
// this is the tilde-A the generic pipeline uses for BWM layers.
SymmetricMatrix make_tilde_A_lt_deformed(const MetricParams& mp, const SpdMatrix& P,
                                         const SymmetricMatrix& A);

Logits rmlr_logits_generic(const MetricParams& mp, const SpdMatrix& S, const SpdMlrLayer& layer);
Logits spd_mlr_logits(const MetricParams& mp, const SpdMatrix& S, const SpdMlrLayer& layer);

enum class LiePath { Transport, Translation };
Logits lie_mlr_logits(const std::vector<RotationMatrix>& S, const LieMlrLayer& layer);
Logits lie_mlr_logits_via(const std::vector<RotationMatrix>& S, const LieMlrLayer& layer,
                          LiePath path);

Logits logeig_logits(const SpdMatrix& S, const LogEigLayer& layer);

struct XentResult {
  double loss;
  Vector dlogits;
};
XentResult softmax_xent(const Logits& logits, int label);

struct LogEigGrad {
  double loss;
  Matrix dweight;
  Vector dbias;
};
LogEigGrad grad_logeig(const SpdMatrix& S, const LogEigLayer& layer, int label);

}  // namespace geomlr
