#include "geomlr/grad.hpp"

#include <cmath>

namespace geomlr {

SymmetricMatrix vjp_funcm(const SymmetricMatrix& S, ScalarFn f, const Matrix& G) {
  return vjp_funcm(eig_sym(S), f, G);
}

SymmetricMatrix vjp_funcm(const EigenPair& es, ScalarFn f, const Matrix& G) {
  return funcm_diff(es, f, SymmetricMatrix(sym_part(G)));
}

namespace {

Matrix half_adjoint(const Matrix& N) {
  Matrix S = N.triangularView<Eigen::StrictlyLower>();
  Matrix out = 0.5 * (S + S.transpose());
  out.diagonal() += 0.5 * N.diagonal();
  return out;
}

Matrix oi_bilinear(const Matrix& A, double alpha, double beta) {
  return alpha * A + beta * A.trace() * Matrix::Identity(A.rows(), A.cols());
}

EigenPair eig_pow(const EigenPair& es, double p) {
  EigenPair out;
  out.U = es.U;
  out.sigma = es.sigma.array().pow(p).matrix();
  return out;
}

}  // namespace

SymmetricMatrix vjp_chol(const LowerTriangular& L, const Matrix& G_L) {
  const Index n = L.n();
  if (G_L.rows() != n || G_L.cols() != n) throw DimensionError("vjp_chol: dimension mismatch");
  const Matrix G = G_L.triangularView<Eigen::Lower>();
  const Matrix H = half_adjoint(L.mat().transpose() * G);
  const Matrix Linv = L.mat().triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  return SymmetricMatrix(sym_part(Linv.transpose() * H * Linv));
}

double GradBundle::norm() const {
  double acc = 0.0;
  if (has_dS) {
    for (const auto& g : dS) acc += g.squaredNorm();
  }
  for (const auto& per_class : dP)
    for (const auto& g : per_class) acc += g.squaredNorm();
  for (const auto& per_class : dA)
    for (const auto& g : per_class) acc += g.squaredNorm();
  return std::sqrt(acc);
}

void GradBundle::scale(double s) {
  for (auto& g : dS) g *= s;
  for (auto& per_class : dP)
    for (auto& g : per_class) g *= s;
  for (auto& per_class : dA)
    for (auto& g : per_class) g *= s;
}

void GradBundle::axpy(double s, const GradBundle& other) {
  if (has_dS && other.has_dS) {
    for (std::size_t b = 0; b < dS.size(); ++b) dS[b] += s * other.dS[b];
  }
  for (std::size_t k = 0; k < dP.size(); ++k)
    for (std::size_t b = 0; b < dP[k].size(); ++b) dP[k][b] += s * other.dP[k][b];
  for (std::size_t k = 0; k < dA.size(); ++k)
    for (std::size_t b = 0; b < dA[k].size(); ++b) dA[k][b] += s * other.dA[k][b];
}

double spd_forward(const MetricParams& mp, const SpdMatrix& S, const SpdMlrLayer& layer,
                   int label, Tape& tape) {
  const Index C = layer.classes();
  const Index n = S.n();
  if (layer.n() != n) throw DimensionError("spd_forward: dimension mismatch");
  mp.require_ab(n);
  const double th = mp.theta;
  const double p = mp.power();

  tape = Tape{};
  tape.mp = mp;
  tape.label = label;
  tape.spd_layer = layer;
  tape.S = S.mat();
  tape.esS = eig_sym(S);
  tape.cls.resize(static_cast<std::size_t>(C));
  Vector logits(C);

  switch (mp.family) {
    case Family::Lem: {
      tape.logS = funcm(tape.esS, fn::log()).mat();
      for (Index k = 0; k < C; ++k) {
        auto& r = tape.cls[static_cast<std::size_t>(k)];
        r.esP = eig_sym(layer.P[k]);
        r.logP = funcm(r.esP, fn::log()).mat();
        const Matrix M = tape.logS - r.logP;
        logits(k) = oi_bilinear(M, mp.alpha, mp.beta).cwiseProduct(layer.A[k].mat()).sum();
      }
      break;
    }
    case Family::Em: {
      tape.Sp = p == 1.0 ? tape.S : funcm(tape.esS, fn::pow(p)).mat();
      for (Index k = 0; k < C; ++k) {
        auto& r = tape.cls[static_cast<std::size_t>(k)];
        r.esP = eig_sym(layer.P[k]);
        const Matrix Pp = p == 1.0 ? layer.P[k].mat() : funcm(r.esP, fn::pow(p)).mat();
        r.D = tape.Sp - Pp;
        logits(k) =
            oi_bilinear(r.D, mp.alpha, mp.beta).cwiseProduct(layer.A[k].mat()).sum() / th;
      }
      break;
    }
    case Family::Aim: {
      tape.Sp = p == 1.0 ? tape.S : funcm(tape.esS, fn::pow(p)).mat();
      for (Index k = 0; k < C; ++k) {
        auto& r = tape.cls[static_cast<std::size_t>(k)];
        r.esP = eig_sym(layer.P[k]);
        r.G = funcm(r.esP, fn::pow(-p / 2.0)).mat();
        r.X = sym_part(r.G * tape.Sp * r.G);
        r.esX = eig_sym(SymmetricMatrix(r.X));
        r.M = funcm(r.esX, fn::log()).mat();
        logits(k) =
            oi_bilinear(r.M, mp.alpha, mp.beta).cwiseProduct(layer.A[k].mat()).sum() / th;
      }
      break;
    }
    case Family::Lcm: {
      tape.Sp = p == 1.0 ? tape.S : funcm(tape.esS, fn::pow(p)).mat();
      tape.Ktil = chol_unchecked(tape.Sp).mat();
      for (Index k = 0; k < C; ++k) {
        auto& r = tape.cls[static_cast<std::size_t>(k)];
        r.esP = eig_sym(layer.P[k]);
        const Matrix Pp = p == 1.0 ? layer.P[k].mat() : funcm(r.esP, fn::pow(p)).mat();
        r.Ltil = chol_unchecked(Pp).mat();
        const auto& Am = layer.A[k].mat();
        double acc = 0.0;
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < i; ++j) acc += (tape.Ktil(i, j) - r.Ltil(i, j)) * Am(i, j);
          acc += (std::log(tape.Ktil(i, i)) - std::log(r.Ltil(i, i))) * 0.5 * Am(i, i);
        }
        logits(k) = acc / th;
      }
      break;
    }
    case Family::Bwm: {
      tape.Sp = p == 1.0 ? tape.S : funcm(tape.esS, fn::pow(p)).mat();
      for (Index k = 0; k < C; ++k) {
        auto& r = tape.cls[static_cast<std::size_t>(k)];
        r.esP = eig_sym(layer.P[k]);
        r.esPp = eig_pow(r.esP, p);
        r.Pp = p == 1.0 ? layer.P[k].mat() : funcm(r.esP, fn::pow(p)).mat();
        r.Lbar = chol_unchecked(r.Pp).mat();
        r.W = sym_part(r.Lbar * layer.A[k].mat() * r.Lbar.transpose());
        r.Xl = lyap_solve(r.esPp, SymmetricMatrix(r.W)).mat();
        r.Bh = funcm(r.esP, fn::pow(p / 2.0)).mat();
        r.Bmh = funcm(r.esP, fn::pow(-p / 2.0)).mat();
        r.Mk = sym_part(r.Bh * tape.Sp * r.Bh);
        r.esM = eig_sym(SymmetricMatrix(r.Mk));
        r.Rk = funcm(r.esM, fn::sqrt()).mat();
        r.Z1 = r.Bh * r.Rk * r.Bmh;
        r.T = sym_part(r.Z1 + r.Z1.transpose() - 2.0 * r.Pp);
        logits(k) = r.T.cwiseProduct(r.Xl).sum() / (4.0 * th);
      }
      break;
    }
  }

  if (!all_finite(logits)) throw DomainError("spd_forward: non-finite score");
  const XentResult x = softmax_xent(logits, label);
  tape.logits = logits;
  tape.probs = x.dlogits;
  tape.probs(label) += 1.0;
  tape.loss = x.loss;
  return x.loss;
}

GradBundle spd_backward(const Tape& tape) {
  const MetricParams& mp = tape.mp;
  const SpdMlrLayer& layer = tape.spd_layer;
  const Index C = layer.classes();
  const Index n = layer.n();
  const double th = mp.theta;
  const double p = mp.power();

  Vector g = tape.probs;
  g(tape.label) -= 1.0;  // softmax - onehot

  GradBundle out;
  out.has_dS = true;
  out.dS.assign(1, Matrix::Zero(n, n));
  out.dP.assign(static_cast<std::size_t>(C), {Matrix::Zero(n, n)});
  out.dA.assign(static_cast<std::size_t>(C), {Matrix::Zero(n, n)});

  switch (mp.family) {
    case Family::Lem: {
      Matrix cot_logS = Matrix::Zero(n, n);
      for (Index k = 0; k < C; ++k) {
        const auto& r = tape.cls[static_cast<std::size_t>(k)];
        const Matrix B = oi_bilinear(layer.A[k].mat(), mp.alpha, mp.beta);
        const Matrix M = tape.logS - r.logP;
        out.dA[k][0] = g(k) * oi_bilinear(M, mp.alpha, mp.beta);
        out.dP[k][0] = -g(k) * vjp_funcm(r.esP, fn::log(), B).mat();
        cot_logS += g(k) * B;
      }
      out.dS[0] = vjp_funcm(tape.esS, fn::log(), cot_logS).mat();
      break;
    }
    case Family::Em: {
      Matrix cot_Sp = Matrix::Zero(n, n);
      for (Index k = 0; k < C; ++k) {
        const auto& r = tape.cls[static_cast<std::size_t>(k)];
        const Matrix B = oi_bilinear(layer.A[k].mat(), mp.alpha, mp.beta) / th;
        out.dA[k][0] = (g(k) / th) * oi_bilinear(r.D, mp.alpha, mp.beta);
        out.dP[k][0] = p == 1.0 ? Matrix(-g(k) * B)
                                : Matrix(-g(k) * vjp_funcm(r.esP, fn::pow(p), B).mat());
        cot_Sp += g(k) * B;
      }
      out.dS[0] =
          p == 1.0 ? cot_Sp : vjp_funcm(tape.esS, fn::pow(p), cot_Sp).mat();
      break;
    }
    case Family::Aim: {
      Matrix cot_Sp = Matrix::Zero(n, n);
      for (Index k = 0; k < C; ++k) {
        const auto& r = tape.cls[static_cast<std::size_t>(k)];
        const Matrix dM = (g(k) / th) * oi_bilinear(layer.A[k].mat(), mp.alpha, mp.beta);
        const Matrix dX = vjp_funcm(r.esX, fn::log(), dM).mat();
        cot_Sp += r.G * dX * r.G;
        const Matrix dG = dX * r.G * tape.Sp + tape.Sp * r.G * dX;
        out.dP[k][0] = vjp_funcm(r.esP, fn::pow(-p / 2.0), sym_part(dG)).mat();
        out.dA[k][0] = (g(k) / th) * oi_bilinear(r.M, mp.alpha, mp.beta);
      }
      out.dS[0] = p == 1.0 ? sym_part(cot_Sp)
                           : vjp_funcm(tape.esS, fn::pow(p), sym_part(cot_Sp)).mat();
      break;
    }
    case Family::Lcm: {
      Matrix GK = Matrix::Zero(n, n);
      for (Index k = 0; k < C; ++k) {
        const auto& r = tape.cls[static_cast<std::size_t>(k)];
        const auto& Am = layer.A[k].mat();
        Matrix Z = Matrix::Zero(n, n);
        Matrix GL = Matrix::Zero(n, n);
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < i; ++j) {
            Z(i, j) = tape.Ktil(i, j) - r.Ltil(i, j);
            GL(i, j) = -(g(k) / th) * Am(i, j);
            GK(i, j) += (g(k) / th) * Am(i, j);
          }
          Z(i, i) = std::log(tape.Ktil(i, i)) - std::log(r.Ltil(i, i));
          GL(i, i) = -(g(k) / th) * 0.5 * Am(i, i) / r.Ltil(i, i);
          GK(i, i) += (g(k) / th) * 0.5 * Am(i, i) / tape.Ktil(i, i);
        }
        out.dA[k][0] = (g(k) / th) * half_adjoint(Z);
        const Matrix dPp = vjp_chol(LowerTriangular(r.Ltil), GL).mat();
        out.dP[k][0] =
            p == 1.0 ? dPp : vjp_funcm(r.esP, fn::pow(p), dPp).mat();
      }
      const Matrix dSp = vjp_chol(LowerTriangular(tape.Ktil), GK).mat();
      out.dS[0] = p == 1.0 ? dSp : vjp_funcm(tape.esS, fn::pow(p), dSp).mat();
      break;
    }
    case Family::Bwm: {
      Matrix cot_Sp = Matrix::Zero(n, n);
      for (Index k = 0; k < C; ++k) {
        const auto& r = tape.cls[static_cast<std::size_t>(k)];
        const double s4 = g(k) / (4.0 * th);
        const Matrix dW = lyap_solve(r.esPp, SymmetricMatrix(sym_part(s4 * r.T))).mat();
        out.dA[k][0] = sym_part(r.Lbar.transpose() * dW * r.Lbar);
        Matrix dPp = -r.Xl * dW - dW * r.Xl;
        const Matrix GLbar = 2.0 * dW * r.Lbar * layer.A[k].mat();
        dPp += vjp_chol(LowerTriangular(r.Lbar), GLbar).mat();
        const Matrix Gt = s4 * r.Xl;
        const Matrix dZ1 = 2.0 * Gt;
        dPp += -2.0 * Gt;
        const Matrix dR = r.Bh * dZ1 * r.Bmh;
        const Matrix dM = vjp_funcm(r.esM, fn::sqrt(), sym_part(dR)).mat();
        Matrix dBh = dZ1 * r.Bmh * r.Rk + tape.Sp * r.Bh * dM + dM * r.Bh * tape.Sp;
        const Matrix dBmh = r.Rk * r.Bh * dZ1;
        dPp += vjp_funcm(r.esPp, fn::sqrt(), sym_part(dBh)).mat();
        dPp += vjp_funcm(r.esPp, fn::pow(-0.5), sym_part(dBmh)).mat();
        cot_Sp += r.Bh * dM * r.Bh;
        out.dP[k][0] = p == 1.0 ? sym_part(dPp)
                                : vjp_funcm(r.esP, fn::pow(p), sym_part(dPp)).mat();
      }
      out.dS[0] = p == 1.0 ? sym_part(cot_Sp)
                           : vjp_funcm(tape.esS, fn::pow(p), sym_part(cot_Sp)).mat();
      break;
    }
  }

  for (const auto& per_class : out.dP)
    for (const auto& m : per_class)
      if (!all_finite(m)) throw DomainError("spd_backward: non-finite gradient");
  if (!all_finite(out.dS[0])) throw DomainError("spd_backward: non-finite gradient");
  return out;
}

double lie_forward(const std::vector<RotationMatrix>& S, const LieMlrLayer& layer, int label,
                   Tape& tape) {
  const Index C = layer.classes();
  if (static_cast<Index>(S.size()) != layer.blocks) {
    throw DimensionError("lie_forward: sample block count mismatch");
  }
  tape = Tape{};
  tape.lie = true;
  tape.label = label;
  tape.lie_layer = layer;
  tape.S_blocks.clear();
  for (const auto& B : S) tape.S_blocks.push_back(B.mat());
  tape.lie_cls.assign(static_cast<std::size_t>(C), {});
  Vector logits = Vector::Zero(C);
  for (Index k = 0; k < C; ++k) {
    auto& row = tape.lie_cls[static_cast<std::size_t>(k)];
    row.resize(static_cast<std::size_t>(layer.blocks));
    for (Index b = 0; b < layer.blocks; ++b) {
      auto& r = row[static_cast<std::size_t>(b)];
      r.Q = layer.P[k][b].mat().transpose() * S[b].mat();
      const RotationMatrix Qr(r.Q);
      r.angle = euler_angle(Qr);
      r.M = so3_log(Qr).mat();
      logits(k) += r.M.cwiseProduct(layer.A[k][b].mat()).sum();
    }
  }
  const XentResult x = softmax_xent(logits, label);
  tape.logits = logits;
  tape.probs = x.dlogits;
  tape.probs(label) += 1.0;
  tape.loss = x.loss;
  return x.loss;
}

GradBundle lie_backward(const Tape& tape) {
  const LieMlrLayer& layer = tape.lie_layer;
  const Index C = layer.classes();
  const Index m = layer.blocks;

  Vector g = tape.probs;
  g(tape.label) -= 1.0;

  GradBundle out;
  out.has_dS = true;
  out.dS.assign(static_cast<std::size_t>(m), Matrix::Zero(3, 3));
  out.dP.assign(static_cast<std::size_t>(C),
                std::vector<Matrix>(static_cast<std::size_t>(m), Matrix::Zero(3, 3)));
  out.dA = out.dP;

  std::vector<Matrix> dS_amb(static_cast<std::size_t>(m), Matrix::Zero(3, 3));
  for (Index k = 0; k < C; ++k) {
    for (Index b = 0; b < m; ++b) {
      const auto& r = tape.lie_cls[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)];
      const Matrix G = g(k) * layer.A[k][b].mat();
      const double t = r.angle;
      double a, kcoef;
      if (t < 1e-4) {
        a = 0.5 * (1.0 + t * t / 6.0);
        kcoef = 1.0 / 12.0;
      } else {
        const double s = std::sin(t);
        a = t / (2.0 * s);
        kcoef = (s - t * std::cos(t)) / (2.0 * s * s) / (2.0 * s);
      }
      const double kappa = -G.cwiseProduct(r.Q - r.Q.transpose()).sum() * kcoef;
      const Matrix Qbar = 2.0 * a * G + kappa * Matrix::Identity(3, 3);
      dS_amb[static_cast<std::size_t>(b)] += layer.P[k][b].mat() * Qbar;
      out.dP[k][b] = skew_part(layer.P[k][b].mat().transpose() *
                               (tape.S_blocks[static_cast<std::size_t>(b)] * Qbar.transpose()));
      out.dA[k][b] = g(k) * r.M;
    }
  }
  for (Index b = 0; b < m; ++b) {
    out.dS[static_cast<std::size_t>(b)] = skew_part(
        tape.S_blocks[static_cast<std::size_t>(b)].transpose() * dS_amb[static_cast<std::size_t>(b)]);
  }
  return out;
}

std::pair<double, GradBundle> grad_spd_mlr(const MetricParams& mp, const SpdMatrix& S,
                                           const SpdMlrLayer& layer, int label) {
  Tape tape;
  const double loss = spd_forward(mp, S, layer, label, tape);
  return {loss, spd_backward(tape)};
}

std::pair<double, GradBundle> grad_lie_mlr(const std::vector<RotationMatrix>& S,
                                           const LieMlrLayer& layer, int label) {
  Tape tape;
  const double loss = lie_forward(S, layer, label, tape);
  return {loss, lie_backward(tape)};
}

double fd_check(const std::function<double(const Matrix&)>& f, const Matrix& x, double h,
                const Matrix& grad, PerturbSpace space) {
  const Index rows = x.rows(), cols = x.cols();
  std::vector<Matrix> basis;
  if (space == PerturbSpace::Euclidean) {
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) {
        Matrix E = Matrix::Zero(rows, cols);
        E(i, j) = 1.0;
        basis.push_back(E);
      }
  } else if (space == PerturbSpace::Symmetric || space == PerturbSpace::SpdRetraction) {
    for (Index i = 0; i < rows; ++i)
      for (Index j = i; j < cols; ++j) {
        Matrix E = Matrix::Zero(rows, cols);
        E(i, j) = 1.0;
        E(j, i) = 1.0;
        if (i == j) E(i, i) = 1.0;
        basis.push_back(E);
      }
  } else {
    for (Index i = 0; i < rows; ++i)
      for (Index j = i + 1; j < cols; ++j) {
        Matrix E = Matrix::Zero(rows, cols);
        E(i, j) = 1.0;
        E(j, i) = -1.0;
        basis.push_back(E);
      }
  }

  double worst = 0.0;
  for (const auto& E : basis) {
    double fp, fm;
    switch (space) {
      case PerturbSpace::SpdRetraction: {
        const SpdMatrix P(x);
        fp = f(riexp_aim(P, SymmetricMatrix(h * E)).mat());
        fm = f(riexp_aim(P, SymmetricMatrix(-h * E)).mat());
        break;
      }
      case PerturbSpace::RotationRetraction: {
        const RotationMatrix R(x);
        fp = f(so_retract(R, SkewMatrix(h * E)).mat());
        fm = f(so_retract(R, SkewMatrix(-h * E)).mat());
        break;
      }
      default:
        fp = f(x + h * E);
        fm = f(x - h * E);
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double an = grad.cwiseProduct(E).sum();
    const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace geomlr
