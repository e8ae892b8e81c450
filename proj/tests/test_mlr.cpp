#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>

#include "doctest.h"
#include "geomlr/mlr.hpp"
#include "geomlr/rng.hpp"

using namespace geomlr;

namespace {

constexpr double kPi = 3.14159265358979323846;

Matrix m2(double a, double b, double c, double d) {
  Matrix M(2, 2);
  M << a, b, c, d;
  return M;
}

Matrix diag2(double a, double b) { return m2(a, 0, 0, b); }

Matrix rz(double t) {
  Matrix R = Matrix::Identity(3, 3);
  R(0, 0) = std::cos(t);
  R(0, 1) = -std::sin(t);
  R(1, 0) = std::sin(t);
  R(1, 1) = std::cos(t);
  return R;
}

LieMlrLayer small_lie_layer(Rng& rng, Index classes, Index blocks, double cap) {
  LieMlrLayer layer;
  layer.blocks = blocks;
  for (Index k = 0; k < classes; ++k) {
    std::vector<RotationMatrix> ps;
    std::vector<SkewMatrix> as;
    for (Index b = 0; b < blocks; ++b) {
      Matrix K = skew_gauss(rng, 3, 0.5).mat();
      const double t = std::sqrt(0.5) * K.norm();
      if (t > cap) K *= cap / t;
      ps.push_back(so3_exp(SkewMatrix(K)));
      as.push_back(skew_gauss(rng, 3, 1.0));
    }
    layer.P.push_back(std::move(ps));
    layer.A.push_back(std::move(as));
  }
  return layer;
}

}  // namespace

TEST_CASE("margin_distance closed cases") {
  const MetricParams em(Family::Em, 1.0, 1.0, 0.0);
  const SpdMatrix P(Matrix::Identity(2, 2));
  Matrix e11 = Matrix::Zero(2, 2);
  e11(0, 0) = 1.0;
  CHECK(margin_distance(em, P, P, SymmetricMatrix(e11)) == doctest::Approx(0.0));
  CHECK(margin_distance(em, SpdMatrix(diag2(4, 5)), P, SymmetricMatrix(e11)) ==
        doctest::Approx(3.0));
  CHECK_THROWS_AS(margin_distance(em, P, P, SymmetricMatrix(Matrix::Zero(2, 2))),
                  DomainError);
}

TEST_CASE("make_tilde_A_pt transports from identity") {
  Rng rng(3);
  const SymmetricMatrix A = sym_gauss(rng, 2, 1.0);
  const SpdMatrix I2(Matrix::Identity(2, 2));
  const MetricParams aim(Family::Aim, 1.0);
  CHECK((make_tilde_A_pt(aim, I2, A).mat() - A.mat()).norm() < 1e-12);
  CHECK((make_tilde_A_pt(MetricParams(Family::Em, 1.0), random_spd(rng, 2, 0.5), A).mat() -
         A.mat())
            .norm() == 0.0);

  Matrix e11 = Matrix::Zero(2, 2);
  e11(0, 0) = 1.0;
  const SpdMatrix P(diag2(4, 1));
  const SymmetricMatrix At = make_tilde_A_pt(aim, P, SymmetricMatrix(e11));
  CHECK((At.mat() - diag2(4, 0)).norm() < 1e-12);
  CHECK(metric(aim, P, At, At) == doctest::Approx(e11.squaredNorm()));

  CHECK_THROWS_AS(make_tilde_A_pt(MetricParams(Family::Bwm, 0.5), P, A), DomainError);
}

TEST_CASE("make_tilde_A_lt is the group translation differential") {
  Rng rng(5);
  const SymmetricMatrix A = sym_gauss(rng, 3, 1.0);
  const SpdMatrix I3(Matrix::Identity(3, 3));
  CHECK((make_tilde_A_lt(I3, A).mat() - A.mat()).norm() < 1e-12);
  CHECK((make_tilde_A_lt(SpdMatrix(diag2(4, 9)), SymmetricMatrix(Matrix::Identity(2, 2)))
             .mat() -
         diag2(4, 9))
            .norm() < 1e-12);

  const SpdMatrix P = random_spd(rng, 3, 0.5);
  const double h = 1e-6;
  const Matrix plus = chol_group_op(P, SpdMatrix(Matrix::Identity(3, 3) + h * A.mat())).mat();
  const Matrix minus = chol_group_op(P, SpdMatrix(Matrix::Identity(3, 3) - h * A.mat())).mat();
  const Matrix fd = (plus - minus) / (2.0 * h);
  CHECK((make_tilde_A_lt(P, A).mat() - fd).norm() < 1e-8);
}

TEST_CASE("deformed translation map reduces at power one") {
  Rng rng(7);
  const SpdMatrix P = random_spd(rng, 3, 0.5);
  const SymmetricMatrix A = sym_gauss(rng, 3, 1.0);
  const MetricParams bwm(Family::Bwm, 0.5);  // power 1
  CHECK((make_tilde_A_lt_deformed(bwm, P, A).mat() - make_tilde_A_lt(P, A).mat()).norm() ==
        0.0);
}

TEST_CASE("generic logits zero at the base point") {
  Rng rng(9);
  for (Family f : {Family::Lem, Family::Aim, Family::Em, Family::Lcm, Family::Bwm}) {
    const MetricParams mp(f, f == Family::Bwm ? 0.5 : 1.0);
    const SpdMatrix P = random_spd(rng, 3, 0.5);
    SpdMlrLayer layer;
    layer.mp = mp;
    for (int k = 0; k < 3; ++k) {
      layer.P.push_back(P);
      layer.A.push_back(sym_gauss(rng, 3, 1.0));
    }
    const Logits z = rmlr_logits_generic(mp, P, layer);
    CHECK(z.cwiseAbs().maxCoeff() < 1e-9);
    const Logits zc = spd_mlr_logits(mp, P, layer);
    CHECK(zc.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("closed-form scores: hand values") {
  Matrix e11 = Matrix::Zero(2, 2);
  e11(0, 0) = 1.0;

  SpdMlrLayer em_layer;
  em_layer.mp = MetricParams(Family::Em, 1.0, 1.0, 0.0);
  em_layer.P.emplace_back(Matrix::Identity(2, 2));
  em_layer.A.emplace_back(e11);
  CHECK(spd_mlr_logits(em_layer.mp, SpdMatrix(diag2(3, 1)), em_layer)(0) ==
        doctest::Approx(2.0));

  SpdMlrLayer bwm_layer;
  bwm_layer.mp = MetricParams(Family::Bwm, 0.5);
  bwm_layer.P.emplace_back(Matrix::Identity(2, 2));
  bwm_layer.A.emplace_back(Matrix::Identity(2, 2));
  const SpdMatrix S(diag2(4, 1));
  CHECK(spd_mlr_logits(bwm_layer.mp, S, bwm_layer)(0) == doctest::Approx(0.5));
  CHECK(rmlr_logits_generic(bwm_layer.mp, S, bwm_layer)(0) == doctest::Approx(0.5));
}

TEST_CASE("closed form equals generic pipeline") {
  Rng rng(11);
  for (Family f : {Family::Lem, Family::Aim, Family::Em, Family::Lcm, Family::Bwm}) {
    const MetricParams mp = f == Family::Bwm ? MetricParams(f, 0.25)
                                             : MetricParams(f, 1.5, 1.0, 0.1);
    SpdMlrLayer layer;
    layer.mp = mp;
    for (int k = 0; k < 4; ++k) {
      layer.P.push_back(random_spd(rng, 3, 0.5));
      layer.A.push_back(sym_gauss(rng, 3, 1.0));
    }
    const SpdMatrix S = random_spd(rng, 3, 0.5);
    const Logits a = spd_mlr_logits(mp, S, layer);
    const Logits b = rmlr_logits_generic(mp, S, layer);
    for (int k = 0; k < 4; ++k)
      CHECK(std::abs(a(k) - b(k)) <= 1e-9 * std::max({1.0, std::abs(a(k)), std::abs(b(k))}));
  }
}

TEST_CASE("lie logits closed cases") {
  Rng rng(13);
  LieMlrLayer layer = small_lie_layer(rng, 3, 2, 1.2);
  const Logits z = lie_mlr_logits(layer.P[1], layer);
  CHECK(z(1) == doctest::Approx(0.0));

  LieMlrLayer single;
  single.blocks = 1;
  single.P.push_back({RotationMatrix(Matrix::Identity(3, 3))});
  Matrix zhat = Matrix::Zero(3, 3);
  zhat(0, 1) = -1.0;
  zhat(1, 0) = 1.0;
  single.A.push_back({SkewMatrix(zhat)});
  std::vector<RotationMatrix> S = {RotationMatrix(rz(kPi / 2))};
  CHECK(lie_mlr_logits(S, single)(0) == doctest::Approx(kPi));

  single.A[0][0] = SkewMatrix(2.0 * zhat);
  CHECK(lie_mlr_logits(S, single)(0) == doctest::Approx(2.0 * kPi));
}

TEST_CASE("lie transport and translation paths are bit-identical") {
  Rng rng(15);
  const LieMlrLayer layer = small_lie_layer(rng, 3, 2, 1.2);
  std::vector<RotationMatrix> S;
  for (int b = 0; b < 2; ++b) {
    Matrix K = skew_gauss(rng, 3, 0.5).mat();
    const double t = std::sqrt(0.5) * K.norm();
    if (t > 1.2) K *= 1.2 / t;
    S.push_back(so3_exp(SkewMatrix(K)));
  }
  const Logits a = lie_mlr_logits_via(S, layer, LiePath::Transport);
  const Logits b = lie_mlr_logits_via(S, layer, LiePath::Translation);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  const Logits c = lie_mlr_logits(S, layer);
  CHECK((a - c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("logeig logits") {
  Rng rng(17);
  LogEigLayer layer = init_logeig(3, 2, rng);
  const Logits at_id = logeig_logits(SpdMatrix(Matrix::Identity(3, 3)), layer);
  CHECK((at_id - layer.bias).norm() < 1e-12);

  layer.weight.setZero();
  const Logits zw = logeig_logits(random_spd(rng, 3, 0.5), layer);
  CHECK((zw - layer.bias).norm() < 1e-12);

  LogEigLayer diag_layer;
  diag_layer.dim = 2;
  diag_layer.weight = Matrix::Zero(1, 3);
  diag_layer.weight.row(0) = sym_flatten(diag2(0.5, -2.0)).transpose();
  diag_layer.bias = Vector::Constant(1, 0.25);
  const Logits zd = logeig_logits(SpdMatrix(diag2(4, 9)), diag_layer);
  CHECK(zd(0) == doctest::Approx(0.5 * std::log(4.0) - 2.0 * std::log(9.0) + 0.25));
}

TEST_CASE("flattening preserves the Frobenius product") {
  Rng rng(19);
  const Matrix A = sym_gauss(rng, 4, 1.0).mat();
  const Matrix B = sym_gauss(rng, 4, 1.0).mat();
  CHECK(sym_flatten(A).dot(sym_flatten(B)) ==
        doctest::Approx(A.cwiseProduct(B).sum()).epsilon(1e-12));
  CHECK((sym_unflatten(sym_flatten(A), 4) - A).norm() < 1e-14);
}

TEST_CASE("softmax cross entropy") {
  const XentResult u = softmax_xent(Vector::Zero(3), 1);
  CHECK(u.loss == doctest::Approx(std::log(3.0)));
  CHECK(u.dlogits(0) == doctest::Approx(1.0 / 3.0));
  CHECK(u.dlogits(1) == doctest::Approx(1.0 / 3.0 - 1.0));

  CHECK(softmax_xent(Vector::Constant(1, 7.0), 0).loss == doctest::Approx(0.0));

  Vector z(3);
  z << 2.0, 0.0, 0.0;
  CHECK(softmax_xent(z, 0).loss ==
        doctest::Approx(std::log(std::exp(2.0) + 2.0) - 2.0));
}

TEST_CASE("layer initialization") {
  Rng rng(21);
  const SpdMlrLayer layer = init_spd_mlr(MetricParams(Family::Aim, 1.0), 4, 3, rng);
  CHECK(layer.classes() == 3);
  CHECK(layer.n() == 4);
  for (int k = 0; k < 3; ++k) {
    CHECK((layer.P[k].mat() - Matrix::Identity(4, 4)).norm() == 0.0);
    CHECK(layer.A[k].mat().norm() > 0.0);
  }
  const Logits z = spd_mlr_logits(layer.mp, SpdMatrix(Matrix::Identity(4, 4)), layer);
  CHECK(z.cwiseAbs().maxCoeff() < 1e-14);
}
