#include "geomlr/mlr.hpp"

#include <cmath>
#include <sstream>

namespace geomlr {

namespace {

void require_layer(const SpdMlrLayer& layer, const SpdMatrix& S) {
  if (layer.classes() == 0) throw DomainError("spd mlr layer has no classes");
  if (layer.n() != S.n()) throw DimensionError("spd mlr: sample dimension mismatch");
  for (const auto& A : layer.A) {
    if (!(A.mat().norm() > 0.0)) {
      throw DomainError("spd mlr layer: tangent parameter A_k has zero norm");
    }
  }
}

}  // namespace

SpdMlrLayer init_spd_mlr(const MetricParams& mp, Index n, Index classes, Rng& rng) {
  mp.require_ab(n);
  SpdMlrLayer layer;
  layer.mp = mp;
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  for (Index k = 0; k < classes; ++k) {
    layer.P.push_back(SpdMatrix::identity(n));
    layer.A.push_back(SymmetricMatrix(sym_part(gauss_matrix(rng, n, n, scale))));
  }
  return layer;
}

LieMlrLayer init_lie_mlr(Index blocks, Index classes, Rng& rng) {
  LieMlrLayer layer;
  layer.blocks = blocks;
  const double scale = std::sqrt(2.0 / 3.0);
  for (Index k = 0; k < classes; ++k) {
    std::vector<RotationMatrix> Pk;
    std::vector<SkewMatrix> Ak;
    for (Index b = 0; b < blocks; ++b) {
      Pk.push_back(RotationMatrix::identity(3));
      Ak.push_back(SkewMatrix(skew_part(gauss_matrix(rng, 3, 3, scale))));
    }
    layer.P.push_back(std::move(Pk));
    layer.A.push_back(std::move(Ak));
  }
  return layer;
}

LogEigLayer init_logeig(Index n, Index classes, Rng& rng) {
  LogEigLayer layer;
  layer.dim = n;
  const Index D = n * (n + 1) / 2;
  const double scale = std::sqrt(2.0 / static_cast<double>(D));
  layer.weight = gauss_matrix(rng, classes, D, scale);
  layer.bias = Vector::Zero(classes);
  return layer;
}

Vector sym_flatten(const Matrix& X) {
  const Index n = X.rows();
  Vector v(n * (n + 1) / 2);
  const double r2 = std::sqrt(2.0);
  Index t = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      v(t++) = i == j ? X(i, j) : r2 * X(i, j);
    }
  }
  return v;
}

Matrix sym_unflatten(const Vector& v, Index n) {
  if (v.size() != n * (n + 1) / 2) throw DimensionError("sym_unflatten: size mismatch");
  Matrix X(n, n);
  const double inv_r2 = 1.0 / std::sqrt(2.0);
  Index t = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const double x = v(t++);
      if (i == j) {
        X(i, i) = x;
      } else {
        X(i, j) = X(j, i) = inv_r2 * x;
      }
    }
  }
  return X;
}

double margin_distance(const MetricParams& mp, const SpdMatrix& S, const SpdMatrix& P,
                       const SymmetricMatrix& Atil) {
  const double nn = metric(mp, P, Atil, Atil);
  if (!(nn > 1e-300)) {
    throw DomainError("margin_distance: degenerate hyperplane, tangent parameter has zero norm");
  }
  const double num = metric(mp, P, rielog(mp, P, S), Atil);
  return std::abs(num) / std::sqrt(nn);
}

SymmetricMatrix make_tilde_A_pt(const MetricParams& mp, const SpdMatrix& P,
                                const SymmetricMatrix& A) {
  if (mp.family == Family::Bwm) {
    throw DomainError("make_tilde_A_pt: BWM layers use the Cholesky translation path");
  }
  return ptransport(mp, SpdMatrix::identity(P.n()), P, A);
}

SymmetricMatrix make_tilde_A_lt(const SpdMatrix& P, const SymmetricMatrix& A) {
  const Matrix L = chol(P).mat();
  return SymmetricMatrix(sym_part(L * A.mat() * L.transpose()));
}

SymmetricMatrix make_tilde_A_lt_deformed(const MetricParams& mp, const SpdMatrix& P,
                                         const SymmetricMatrix& A) {
  const double p = mp.power();
  if (p == 1.0) return make_tilde_A_lt(P, A);
  const EigenPair esP = eig_sym(P);
  const SpdMatrix Pp(funcm(esP, fn::pow(p)).mat());
  const SymmetricMatrix base = make_tilde_A_lt(Pp, A);
  return funcm_diff_solve(esP, fn::pow(p), SymmetricMatrix(p * base.mat()));
}

Logits rmlr_logits_generic(const MetricParams& mp, const SpdMatrix& S, const SpdMlrLayer& layer) {
  require_layer(layer, S);
  const Index C = layer.classes();
  Logits out(C);
  for (Index k = 0; k < C; ++k) {
    const SymmetricMatrix Atil = mp.family == Family::Bwm
                                     ? make_tilde_A_lt_deformed(mp, layer.P[k], layer.A[k])
                                     : make_tilde_A_pt(mp, layer.P[k], layer.A[k]);
    out(k) = metric(mp, layer.P[k], rielog(mp, layer.P[k], S), Atil);
  }
  return out;
}

Logits spd_mlr_logits(const MetricParams& mp, const SpdMatrix& S, const SpdMlrLayer& layer) {
  require_layer(layer, S);
  mp.require_ab(S.n());
  const Index C = layer.classes();
  const Index n = S.n();
  const double th = mp.theta;
  Logits out(C);

  switch (mp.family) {
    case Family::Lem: {
      const Matrix logS = funcm(S, fn::log()).mat();
      for (Index k = 0; k < C; ++k) {
        const Matrix M = logS - funcm(layer.P[k], fn::log()).mat();
        out(k) = oi_inner(SymmetricMatrix(sym_part(M)), layer.A[k], mp.alpha, mp.beta);
      }
      break;
    }
    case Family::Aim: {
      const Matrix St = funcm(S, fn::pow(th)).mat();
      for (Index k = 0; k < C; ++k) {
        const Matrix G = funcm(layer.P[k], fn::pow(-th / 2.0)).mat();
        const SpdMatrix X(sym_part(G * St * G));
        const Matrix M = funcm(X, fn::log()).mat();
        out(k) = oi_inner(SymmetricMatrix(sym_part(M)), layer.A[k], mp.alpha, mp.beta) / th;
      }
      break;
    }
    case Family::Em: {
      const Matrix St = funcm(S, fn::pow(th)).mat();
      for (Index k = 0; k < C; ++k) {
        const Matrix D = St - funcm(layer.P[k], fn::pow(th)).mat();
        out(k) = oi_inner(SymmetricMatrix(sym_part(D)), layer.A[k], mp.alpha, mp.beta) / th;
      }
      break;
    }
    case Family::Lcm: {
      const LowerTriangular Kt = chol_unchecked(funcm(S, fn::pow(th)).mat());
      for (Index k = 0; k < C; ++k) {
        const LowerTriangular Lt = chol_unchecked(funcm(layer.P[k], fn::pow(th)).mat());
        const auto& Km = Kt.mat();
        const auto& Lm = Lt.mat();
        const auto& Am = layer.A[k].mat();
        double acc = 0.0;
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < i; ++j) acc += (Km(i, j) - Lm(i, j)) * Am(i, j);
          acc += (std::log(Km(i, i)) - std::log(Lm(i, i))) * 0.5 * Am(i, i);
        }
        out(k) = acc / th;
      }
      break;
    }
    case Family::Bwm: {
      const double p = 2.0 * th;
      const SpdMatrix Sp(funcm(S, fn::pow(p)).mat());
      for (Index k = 0; k < C; ++k) {
        const EigenPair esP = eig_sym(layer.P[k]);
        const SpdMatrix Pp(funcm(esP, fn::pow(p)).mat());
        const Matrix Lb = chol(Pp).mat();
        const SymmetricMatrix W(sym_part(Lb * layer.A[k].mat() * Lb.transpose()));
        const SymmetricMatrix X = lyap_solve(Pp, W);
        const ProdSqrt ps = prod_sqrt(Pp, Sp);
        const Matrix T = ps.ba + ps.ab - 2.0 * Pp.mat();
        out(k) = T.cwiseProduct(X.mat()).sum() / (4.0 * th);
      }
      break;
    }
  }
  if (!all_finite(out)) throw DomainError("spd_mlr_logits: non-finite score");
  return out;
}

Logits lie_mlr_logits(const std::vector<RotationMatrix>& S, const LieMlrLayer& layer) {
  const Index C = layer.classes();
  if (C == 0) throw DomainError("lie mlr layer has no classes");
  if (static_cast<Index>(S.size()) != layer.blocks) {
    throw DimensionError("lie mlr: sample block count mismatch");
  }
  Logits out = Vector::Zero(C);
  for (Index k = 0; k < C; ++k) {
    for (Index b = 0; b < layer.blocks; ++b) {
      const SkewMatrix M = so_log(layer.P[k][b], S[b]);
      out(k) += M.mat().cwiseProduct(layer.A[k][b].mat()).sum();
    }
  }
  return out;
}

Logits lie_mlr_logits_via(const std::vector<RotationMatrix>& S, const LieMlrLayer& layer,
                          LiePath path) {
  const Index C = layer.classes();
  Logits out = Vector::Zero(C);
  const Matrix Q = Matrix::Identity(3, 3);  // tangent-parameter origin
  for (Index k = 0; k < C; ++k) {
    for (Index b = 0; b < layer.blocks; ++b) {
      const Matrix H = Q * layer.A[k][b].mat();  // ambient tangent at Q
      const auto& P = layer.P[k][b].mat();
      const Matrix Atil = path == LiePath::Transport ? Matrix(P * Q.transpose() * H)
                                                     : Matrix(P * Q.inverse() * H);
      const Matrix amb_log = P * so_log(layer.P[k][b], S[b]).mat();
      out(k) += amb_log.cwiseProduct(Atil).sum();
    }
  }
  return out;
}

Logits logeig_logits(const SpdMatrix& S, const LogEigLayer& layer) {
  if (S.n() != layer.dim) throw DimensionError("logeig: sample dimension mismatch");
  const Vector z = sym_flatten(funcm(S, fn::log()).mat());
  return layer.weight * z + layer.bias;
}

XentResult softmax_xent(const Logits& logits, int label) {
  const Index C = logits.size();
  if (label < 0 || label >= C) throw DomainError("softmax_xent: label out of range");
  const double m = logits.maxCoeff();
  const Vector e = (logits.array() - m).exp();
  const double Z = e.sum();
  XentResult r;
  r.loss = m + std::log(Z) - logits(label);
  r.dlogits = e / Z;
  r.dlogits(label) -= 1.0;
  return r;
}

LogEigGrad grad_logeig(const SpdMatrix& S, const LogEigLayer& layer, int label) {
  const Vector z = sym_flatten(funcm(S, fn::log()).mat());
  const Logits logits = layer.weight * z + layer.bias;
  const XentResult x = softmax_xent(logits, label);
  LogEigGrad g;
  g.loss = x.loss;
  g.dweight = x.dlogits * z.transpose();
  g.dbias = x.dlogits;
  return g;
}

}  // namespace geomlr
