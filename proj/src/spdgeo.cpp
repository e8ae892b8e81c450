#include "geomlr/spdgeo.hpp"

#include <cmath>
#include <sstream>

namespace geomlr {

std::string family_name(Family f) {
  switch (f) {
    case Family::Lem: return "lem";
    case Family::Aim: return "aim";
    case Family::Em: return "em";
    case Family::Lcm: return "lcm";
    case Family::Bwm: return "bwm";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  if (name == "lem") return Family::Lem;
  if (name == "aim") return Family::Aim;
  if (name == "em") return Family::Em;
  if (name == "lcm") return Family::Lcm;
  if (name == "bwm") return Family::Bwm;
  throw UsageError("unknown metric family: " + name);
}

MetricParams::MetricParams(Family f, double theta_in, double alpha_in, double beta_in)
    : family(f), theta(theta_in), alpha(alpha_in), beta(beta_in) {
  if (theta == 0.0 || !std::isfinite(theta)) {
    throw DomainError("MetricParams: theta must be finite and nonzero");
  }
  if (family == Family::Lcm || family == Family::Bwm) {
    alpha = 1.0;
    beta = 0.0;
  }
}

void MetricParams::require_ab(Index n) const {
  if (family == Family::Lcm || family == Family::Bwm) return;
  const double lo = std::min(alpha, alpha + static_cast<double>(n) * beta);
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os << "MetricParams: min(alpha, alpha + n*beta) = " << lo << " must be positive at n=" << n;
    throw DomainError(os.str());
  }
}

double oi_inner(const SymmetricMatrix& V, const SymmetricMatrix& W, double alpha, double beta) {
  const Index n = V.n();
  if (W.n() != n) throw DimensionError("oi_inner: dimension mismatch");
  const double lo = std::min(alpha, alpha + static_cast<double>(n) * beta);
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os << "oi_inner: min(alpha, alpha + n*beta) = " << lo << " must be positive";
    throw DomainError(os.str());
  }
  return alpha * V.mat().cwiseProduct(W.mat()).sum() + beta * V.mat().trace() * W.mat().trace();
}

namespace {

// EigenPair of P^p reusing the eigenvectors of P.
EigenPair eig_pow(const EigenPair& es, double p) {
  EigenPair out;
  out.U = es.U;
  out.sigma = es.sigma.array().pow(p).matrix();
  return out;
}

SymmetricMatrix push_pow(const EigenPair& es, double p, const SymmetricMatrix& V) {
  return funcm_diff(es, fn::pow(p), V);
}

SymmetricMatrix pull_pow(const EigenPair& es, double p, const SymmetricMatrix& W) {
  return funcm_diff_solve(es, fn::pow(p), W);
}

double lcm_base_metric(const LowerTriangular& L, const Matrix& Vt, const Matrix& Wt) {
  const Index n = L.n();
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < i; ++j) acc += Vt(i, j) * Wt(i, j);
    const double d = L.mat()(i, i);
    acc += Vt(i, i) * Wt(i, i) / (d * d);
  }
  return acc;
}

// Base LCM log as a lower-triangular tangent at L = chol(X), K = chol(Y).
Matrix lcm_base_log_lower(const LowerTriangular& L, const LowerTriangular& K) {
  const Index n = L.n();
  Matrix W = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < i; ++j) W(i, j) = K.mat()(i, j) - L.mat()(i, j);
    W(i, i) = L.mat()(i, i) * std::log(K.mat()(i, i) / L.mat()(i, i));
  }
  return W;
}

}  // namespace

double metric(const MetricParams& mp, const SpdMatrix& P, const SymmetricMatrix& V,
              const SymmetricMatrix& W) {
  const Index n = P.n();
  if (V.n() != n || W.n() != n) throw DimensionError("metric: dimension mismatch");
  mp.require_ab(n);
  const double p = mp.power();
  const EigenPair esP = eig_sym(P);

  switch (mp.family) {
    case Family::Lem: {
      const SymmetricMatrix Lv = funcm_diff(esP, fn::log(), V);
      const SymmetricMatrix Lw = funcm_diff(esP, fn::log(), W);
      return oi_inner(Lv, Lw, mp.alpha, mp.beta);
    }
    case Family::Aim: {
      const SymmetricMatrix Dv = p == 1.0 ? V : push_pow(esP, p, V);
      const SymmetricMatrix Dw = p == 1.0 ? W : push_pow(esP, p, W);
      const Matrix Pinv = funcm(esP, fn::pow(-p)).mat();
      const Matrix Zv = Pinv * Dv.mat();
      const Matrix Zw = Pinv * Dw.mat();
      const double base = mp.alpha * (Zv * Zw).trace() + mp.beta * Zv.trace() * Zw.trace();
      return base / (p * p);
    }
    case Family::Em: {
      const SymmetricMatrix Dv = p == 1.0 ? V : push_pow(esP, p, V);
      const SymmetricMatrix Dw = p == 1.0 ? W : push_pow(esP, p, W);
      return oi_inner(Dv, Dw, mp.alpha, mp.beta) / (p * p);
    }
    case Family::Lcm: {
      const SymmetricMatrix Dv = p == 1.0 ? V : push_pow(esP, p, V);
      const SymmetricMatrix Dw = p == 1.0 ? W : push_pow(esP, p, W);
      const LowerTriangular L = chol_unchecked(funcm(esP, fn::pow(p)).mat());
      const Matrix Vt = chol_diff(L, Dv);
      const Matrix Wt = chol_diff(L, Dw);
      return lcm_base_metric(L, Vt, Wt) / (p * p);
    }
    case Family::Bwm: {
      const SymmetricMatrix Dv = p == 1.0 ? V : push_pow(esP, p, V);
      const SymmetricMatrix Dw = p == 1.0 ? W : push_pow(esP, p, W);
      const SymmetricMatrix X = lyap_solve(eig_pow(esP, p), Dv);
      return 0.5 * X.mat().cwiseProduct(Dw.mat()).sum() / (p * p);
    }
  }
  return 0.0;
}

SymmetricMatrix rielog(const MetricParams& mp, const SpdMatrix& P, const SpdMatrix& Q) {
  if (P.n() != Q.n()) throw DimensionError("rielog: dimension mismatch");
  const double p = mp.power();
  const EigenPair esP = eig_sym(P);

  switch (mp.family) {
    case Family::Lem: {
      const Matrix D = funcm(eig_sym(Q), fn::log()).mat() - funcm(esP, fn::log()).mat();
      return funcm_diff_solve(esP, fn::log(), SymmetricMatrix(sym_part(D)));
    }
    case Family::Aim: {
      const Matrix Ph = funcm(esP, fn::pow(p / 2.0)).mat();
      const Matrix Pmh = funcm(esP, fn::pow(-p / 2.0)).mat();
      const Matrix Qp = funcm(eig_sym(Q), fn::pow(p)).mat();
      const SpdMatrix X(sym_part(Pmh * Qp * Pmh));
      const Matrix base = Ph * funcm(X, fn::log()).mat() * Ph;
      const SymmetricMatrix B(sym_part(base));
      return p == 1.0 ? B : pull_pow(esP, p, B);
    }
    case Family::Em: {
      const Matrix D =
          funcm(eig_sym(Q), fn::pow(p)).mat() - funcm(esP, fn::pow(p)).mat();
      const SymmetricMatrix B(sym_part(D));
      return p == 1.0 ? B : pull_pow(esP, p, B);
    }
    case Family::Lcm: {
      const LowerTriangular L = chol_unchecked(funcm(esP, fn::pow(p)).mat());
      const LowerTriangular K = chol_unchecked(funcm(eig_sym(Q), fn::pow(p)).mat());
      const SymmetricMatrix B = chol_inv_diff(L, lcm_base_log_lower(L, K));
      return p == 1.0 ? B : pull_pow(esP, p, B);
    }
    case Family::Bwm: {
      const SpdMatrix Pp(funcm(esP, fn::pow(p)).mat());
      const SpdMatrix Qp(funcm(eig_sym(Q), fn::pow(p)).mat());
      const ProdSqrt ps = prod_sqrt(Pp, Qp);
      const SymmetricMatrix B(sym_part(ps.ba + ps.ab - 2.0 * Pp.mat()));
      return p == 1.0 ? B : pull_pow(esP, p, B);
    }
  }
  return SymmetricMatrix::zero(P.n());
}

SpdMatrix riexp_aim(const SpdMatrix& P, const SymmetricMatrix& V) {
  if (P.n() != V.n()) throw DimensionError("riexp_aim: dimension mismatch");
  const EigenPair esP = eig_sym(P);
  const Matrix Ph = funcm(esP, fn::sqrt()).mat();
  const Matrix Pmh = funcm(esP, fn::pow(-0.5)).mat();
  const SymmetricMatrix E(sym_part(Pmh * V.mat() * Pmh));
  const Matrix out = Ph * funcm(E, fn::exp()).mat() * Ph;
  return SpdMatrix(sym_part(out));
}

SymmetricMatrix ptransport(const MetricParams& mp, const SpdMatrix& P, const SpdMatrix& Q,
                           const SymmetricMatrix& V) {
  const Index n = P.n();
  if (Q.n() != n || V.n() != n) throw DimensionError("ptransport: dimension mismatch");
  const double p = mp.power();

  switch (mp.family) {
    case Family::Lem: {
      return funcm_diff_solve(eig_sym(Q), fn::log(), funcm_diff(eig_sym(P), fn::log(), V));
    }
    case Family::Aim: {
      const EigenPair esP = eig_sym(P);
      const EigenPair esQ = eig_sym(Q);
      const SymmetricMatrix Vp = p == 1.0 ? V : push_pow(esP, p, V);
      const SpdMatrix Qp(funcm(esQ, fn::pow(p)).mat());
      const SpdMatrix Ppinv(funcm(esP, fn::pow(-p)).mat());
      const ProdSqrt ps = prod_sqrt(Qp, Ppinv);
      const SymmetricMatrix B(sym_part(ps.ba * Vp.mat() * ps.ab));
      return p == 1.0 ? B : pull_pow(esQ, p, B);
    }
    case Family::Em: {
      if (p == 1.0) return V;
      return pull_pow(eig_sym(Q), p, push_pow(eig_sym(P), p, V));
    }
    case Family::Lcm: {
      const EigenPair esP = eig_sym(P);
      const EigenPair esQ = eig_sym(Q);
      const SymmetricMatrix Vp = p == 1.0 ? V : push_pow(esP, p, V);
      const LowerTriangular L = chol_unchecked(funcm(esP, fn::pow(p)).mat());
      const LowerTriangular K = chol_unchecked(funcm(esQ, fn::pow(p)).mat());
      const Matrix Vt = chol_diff(L, Vp);
      Matrix W = Matrix::Zero(n, n);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < i; ++j) W(i, j) = Vt(i, j);
        W(i, i) = K.mat()(i, i) / L.mat()(i, i) * Vt(i, i);
      }
      const SymmetricMatrix B = chol_inv_diff(K, W);
      return p == 1.0 ? B : pull_pow(esQ, p, B);
    }
    case Family::Bwm: {
      if ((P.mat() - Matrix::Identity(n, n)).norm() > 1e-12 * static_cast<double>(n)) {
        throw DomainError("ptransport: BWM transport is only available from the identity origin");
      }
      const EigenPair esQ = eig_sym(Q);
      const EigenPair esQp = eig_pow(esQ, p);
      const Matrix Vp = esQp.U.transpose() * (p * V.mat()) * esQp.U;
      Matrix core(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          core(i, j) = std::sqrt(0.5 * (esQp.sigma(i) + esQp.sigma(j))) * Vp(i, j);
      const SymmetricMatrix B(sym_part(esQp.U * core * esQp.U.transpose()));
      return p == 1.0 ? B : pull_pow(esQ, p, B);
    }
  }
  return V;
}

SpdMatrix chol_group_op(const SpdMatrix& S1, const SpdMatrix& S2) {
  if (S1.n() != S2.n()) throw DimensionError("chol_group_op: dimension mismatch");
  const Matrix L1 = chol(S1).mat();
  return SpdMatrix(sym_part(L1 * S2.mat() * L1.transpose()));
}

}  // namespace geomlr
