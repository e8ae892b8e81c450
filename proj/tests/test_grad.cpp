#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>

#include "doctest.h"
#include "geomlr/grad.hpp"
#include "geomlr/rng.hpp"

using namespace geomlr;

namespace {

bool bits_eq(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool bundle_bits_eq(const GradBundle& a, const GradBundle& b) {
  if (a.has_dS != b.has_dS || a.dS.size() != b.dS.size()) return false;
  for (std::size_t i = 0; i < a.dS.size(); ++i)
    if (!bits_eq(a.dS[i], b.dS[i])) return false;
  if (a.dP.size() != b.dP.size() || a.dA.size() != b.dA.size()) return false;
  for (std::size_t k = 0; k < a.dP.size(); ++k) {
    if (a.dP[k].size() != b.dP[k].size() || a.dA[k].size() != b.dA[k].size()) return false;
    for (std::size_t j = 0; j < a.dP[k].size(); ++j)
      if (!bits_eq(a.dP[k][j], b.dP[k][j])) return false;
    for (std::size_t j = 0; j < a.dA[k].size(); ++j)
      if (!bits_eq(a.dA[k][j], b.dA[k][j])) return false;
  }
  return true;
}

SpdMlrLayer random_layer(Rng& rng, const MetricParams& mp, Index n, Index classes) {
  SpdMlrLayer layer;
  layer.mp = mp;
  for (Index k = 0; k < classes; ++k) {
    layer.P.push_back(random_spd(rng, n, 0.4));
    layer.A.push_back(sym_gauss(rng, n, 1.0));
  }
  return layer;
}

LieMlrLayer random_lie_layer(Rng& rng, Index classes, Index blocks) {
  LieMlrLayer layer;
  layer.blocks = blocks;
  for (Index k = 0; k < classes; ++k) {
    std::vector<RotationMatrix> ps;
    std::vector<SkewMatrix> as;
    for (Index b = 0; b < blocks; ++b) {
      Matrix K = skew_gauss(rng, 3, 0.4).mat();
      const double t = std::sqrt(0.5) * K.norm();
      if (t > 1.2) K *= 1.2 / t;
      ps.push_back(so3_exp(SkewMatrix(K)));
      as.push_back(skew_gauss(rng, 3, 1.0));
    }
    layer.P.push_back(std::move(ps));
    layer.A.push_back(std::move(as));
  }
  return layer;
}

}  // namespace

TEST_CASE("fd_check agrees with an exact gradient") {
  Rng rng(2);
  const Matrix x = gauss_matrix(rng, 3, 3, 1.0);
  const auto f = [](const Matrix& m) { return 0.5 * m.squaredNorm(); };
  CHECK(fd_check(f, x, 1e-6, x, PerturbSpace::Euclidean) < 1e-9);
}

TEST_CASE("vjp_funcm closed cases and finite differences") {
  Rng rng(4);
  const SymmetricMatrix I2(Matrix::Identity(2, 2));
  const Matrix G = gauss_matrix(rng, 2, 2, 1.0);
  const Matrix symG = sym_part(G);
  CHECK((vjp_funcm(I2, fn::log(), G).mat() - symG).norm() < 1e-12);

  const SpdMatrix P = random_spd(rng, 3, 0.6);
  const Matrix G3 = gauss_matrix(rng, 3, 3, 1.0);
  CHECK((vjp_funcm(SymmetricMatrix(P.mat()), fn::pow(1.0), G3).mat() - sym_part(G3))
            .norm() < 1e-12);

  for (ScalarFn f : {fn::log(), fn::pow(0.5)}) {
    const SpdMatrix S = random_spd(rng, 4, 0.6);
    const SymmetricMatrix W = sym_gauss(rng, 4, 1.0);
    const auto loss = [&](const Matrix& m) {
      return funcm(SymmetricMatrix(m), f).mat().cwiseProduct(W.mat()).sum();
    };
    const Matrix grad = vjp_funcm(SymmetricMatrix(S.mat()), f, W.mat()).mat();
    CHECK(fd_check(loss, S.mat(), 1e-6, grad, PerturbSpace::Symmetric) < 1e-5);
  }
}

TEST_CASE("vjp_chol closed cases and finite differences") {
  const LowerTriangular Lid = chol(SpdMatrix(Matrix::Identity(3, 3)));
  Matrix Gd = Matrix::Zero(3, 3);
  Gd(0, 0) = 2.0;
  Gd(2, 2) = -4.0;
  CHECK((vjp_chol(Lid, Gd).mat() - 0.5 * Gd).norm() < 1e-14);
  CHECK(vjp_chol(Lid, Matrix::Zero(3, 3)).mat().norm() == 0.0);

  Rng rng(6);
  const SpdMatrix P = random_spd(rng, 5, 0.6);
  const Matrix GL = gauss_matrix(rng, 5, 5, 1.0);
  const auto loss = [&](const Matrix& m) {
    Matrix low = Matrix(GL.triangularView<Eigen::Lower>());
    return chol(SpdMatrix(m)).mat().cwiseProduct(low).sum();
  };
  const Matrix grad = vjp_chol(chol(P), GL).mat();
  CHECK(fd_check(loss, P.mat(), 1e-6, grad, PerturbSpace::Symmetric) < 1e-5);
}

TEST_CASE("vjp_lyap at the identity") {
  Rng rng(8);
  const SpdMatrix I3(Matrix::Identity(3, 3));
  const SymmetricMatrix V = sym_gauss(rng, 3, 1.0);
  const SymmetricMatrix X = lyap_solve(I3, V);
  const SymmetricMatrix G = sym_gauss(rng, 3, 1.0);
  const LyapVjp out = vjp_lyap(I3, X, G);
  CHECK((out.dV.mat() - 0.5 * G.mat()).norm() < 1e-13);
}

TEST_CASE("euclidean-power gradients have closed form") {
  Rng rng(10);
  const MetricParams mp(Family::Em, 1.0, 1.0, 0.0);
  const SpdMatrix S = random_spd(rng, 3, 0.5);

  SpdMlrLayer layer = random_layer(rng, mp, 3, 3);
  const int label = 2;
  const auto [loss, g] = grad_spd_mlr(mp, S, layer, label);
  const Vector gbar = softmax_xent(spd_mlr_logits(mp, S, layer), label).dlogits;
  CHECK(loss == doctest::Approx(softmax_xent(spd_mlr_logits(mp, S, layer), label).loss));

  Matrix dS_expect = Matrix::Zero(3, 3);
  for (int k = 0; k < 3; ++k) dS_expect += gbar(k) * layer.A[k].mat();
  REQUIRE(g.has_dS);
  CHECK((g.dS[0] - dS_expect).norm() < 1e-13);

  SpdMlrLayer at_id = layer;
  for (int k = 0; k < 3; ++k) at_id.P[k] = SpdMatrix(Matrix::Identity(3, 3));
  const auto [loss2, g2] = grad_spd_mlr(mp, S, at_id, label);
  const Vector gbar2 = softmax_xent(spd_mlr_logits(mp, S, at_id), label).dlogits;
  const Matrix diff = S.mat() - Matrix::Identity(3, 3);
  (void)loss2;
  for (int k = 0; k < 3; ++k) CHECK((g2.dA[k][0] - gbar2(k) * diff).norm() < 1e-13);
}

TEST_CASE("log-metric prototype gradient passes finite differences") {
  Rng rng(12);
  const MetricParams mp(Family::Lem, 1.0, 1.0, 0.1);
  const SpdMatrix S = random_spd(rng, 3, 0.5);
  SpdMlrLayer layer = random_layer(rng, mp, 3, 3);
  const int label = 0;
  const auto [loss, g] = grad_spd_mlr(mp, S, layer, label);
  (void)loss;

  const auto loss_at_p0 = [&](const Matrix& pm) {
    SpdMlrLayer l2 = layer;
    l2.P[0] = SpdMatrix(pm);
    return softmax_xent(spd_mlr_logits(mp, S, l2), label).loss;
  };
  CHECK(fd_check(loss_at_p0, layer.P[0].mat(), 1e-5, g.dP[0][0],
                 PerturbSpace::SpdRetraction) < 1e-4);

  const auto loss_at_s = [&](const Matrix& sm) {
    return softmax_xent(spd_mlr_logits(mp, SpdMatrix(sm), layer), label).loss;
  };
  CHECK(fd_check(loss_at_s, S.mat(), 1e-5, g.dS[0], PerturbSpace::SpdRetraction) < 1e-4);
}

TEST_CASE("rotation gradients have closed form in the hyperplane slot") {
  Rng rng(14);
  LieMlrLayer layer = random_lie_layer(rng, 3, 2);
  const std::vector<RotationMatrix> S = layer.P[1];
  const int label = 0;
  const auto [loss, g] = grad_lie_mlr(S, layer, label);
  (void)loss;

  const Vector gbar = softmax_xent(lie_mlr_logits(S, layer), label).dlogits;
  for (int k = 0; k < 3; ++k) {
    for (int b = 0; b < 2; ++b) {
      const SkewMatrix M = so_log(layer.P[k][b], S[b]);
      CHECK((g.dA[k][b] - gbar(k) * M.mat()).norm() < 1e-12);
    }
  }
  CHECK(g.dA[1][0].norm() < 1e-12);
  CHECK(g.dA[1][1].norm() < 1e-12);
}

TEST_CASE("backward replay from one tape is bit-identical") {
  Rng rng(16);
  const MetricParams mp(Family::Aim, 0.5, 1.0, 0.1);
  const SpdMatrix S = random_spd(rng, 3, 0.5);
  const SpdMlrLayer layer = random_layer(rng, mp, 3, 3);
  Tape tape;
  const double loss = spd_forward(mp, S, layer, 1, tape);
  CHECK(std::isfinite(loss));
  const GradBundle g1 = spd_backward(tape);
  const GradBundle g2 = spd_backward(tape);
  CHECK(bundle_bits_eq(g1, g2));
}

TEST_CASE("gradients stay finite under near-degenerate spectra") {
  Rng rng(18);
  Vector ev(4);
  ev << 2.0, 1.0 + 1e-8, 1.0, 0.5;
  const Matrix U = random_rotation(rng, 4).mat();
  const SpdMatrix S(U * ev.asDiagonal() * U.transpose());
  for (Family f : {Family::Lem, Family::Aim, Family::Em, Family::Lcm, Family::Bwm}) {
    const MetricParams mp(f, f == Family::Bwm ? 0.5 : 1.0);
    SpdMlrLayer layer = random_layer(rng, mp, 4, 2);
    const auto [loss, g] = grad_spd_mlr(mp, S, layer, 0);
    CHECK(std::isfinite(loss));
    REQUIRE(g.has_dS);
    CHECK(all_finite(g.dS[0]));
    for (const auto& row : g.dP)
      for (const auto& m : row) CHECK(all_finite(m));
    for (const auto& row : g.dA)
      for (const auto& m : row) CHECK(all_finite(m));
  }
}
