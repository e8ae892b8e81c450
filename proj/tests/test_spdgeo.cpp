#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "geomlr/rng.hpp"
#include "geomlr/spdgeo.hpp"

using namespace geomlr;

namespace {

Matrix m2(double a, double b, double c, double d) {
  Matrix M(2, 2);
  M << a, b, c, d;
  return M;
}

Matrix diag2(double a, double b) { return m2(a, 0, 0, b); }

}  // namespace

TEST_CASE("metric params validation") {
  CHECK_THROWS_AS(MetricParams(Family::Aim, 0.0), DomainError);
  const MetricParams lcm(Family::Lcm, 1.0, 3.0, -2.0);
  CHECK(lcm.alpha == 1.0);
  CHECK(lcm.beta == 0.0);
  CHECK(MetricParams(Family::Bwm, 0.5).power() == doctest::Approx(1.0));
  CHECK_THROWS_AS(MetricParams(Family::Em, 1.0, 1.0, -1.0).require_ab(2), DomainError);
}

TEST_CASE("oi_inner closed cases") {
  const SymmetricMatrix I2(Matrix::Identity(2, 2));
  CHECK(oi_inner(I2, I2, 1.0, 0.0) == doctest::Approx(2.0));
  CHECK(oi_inner(I2, I2, 1.0, 1.0) == doctest::Approx(6.0));
  CHECK(oi_inner(SymmetricMatrix(diag2(1, -1)), I2, 1.0, 5.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(oi_inner(I2, I2, 1.0, -1.0), DomainError);
}

TEST_CASE("metric closed cases") {
  Rng rng(3);
  const SymmetricMatrix V = sym_gauss(rng, 3, 1.0);
  const SpdMatrix I3(Matrix::Identity(3, 3));
  const double vf = V.mat().squaredNorm();
  CHECK(metric(MetricParams(Family::Aim, 1.0), I3, V, V) == doctest::Approx(vf));
  CHECK(metric(MetricParams(Family::Bwm, 0.5), I3, V, V) == doctest::Approx(0.25 * vf));

  const SpdMatrix P = SpdMatrix(funcm(sym_gauss(rng, 3, 0.5), fn::exp()).mat());
  const double em = metric(MetricParams(Family::Em, 1e-4), P, V, V);
  const double lem = metric(MetricParams(Family::Lem, 1.0), P, V, V);
  CHECK(std::abs(em - lem) / lem < 1e-3);
}

TEST_CASE("rielog closed cases") {
  Rng rng(5);
  const SpdMatrix I2(Matrix::Identity(2, 2));
  const SpdMatrix Q = SpdMatrix(funcm(sym_gauss(rng, 2, 0.5), fn::exp()).mat());
  CHECK((rielog(MetricParams(Family::Aim, 1.0), I2, Q).mat() - funcm(Q, fn::log()).mat())
            .norm() < 1e-10);
  CHECK((rielog(MetricParams(Family::Bwm, 0.5), I2, SpdMatrix(diag2(4, 9))).mat() -
         diag2(2, 4))
            .norm() < 1e-10);
  const double e2 = std::exp(2.0);
  CHECK((rielog(MetricParams(Family::Lcm, 1.0), I2, SpdMatrix(diag2(e2, 1))).mat() -
         diag2(2, 0))
            .norm() < 1e-10);
  for (Family f : {Family::Lem, Family::Aim, Family::Em, Family::Lcm, Family::Bwm}) {
    const MetricParams mp(f, f == Family::Bwm ? 0.75 : 1.5);
    CHECK(rielog(mp, Q, Q).mat().norm() < 1e-9);
  }
}

TEST_CASE("riexp_aim closed cases and log round trip") {
  Rng rng(7);
  const SpdMatrix I3(Matrix::Identity(3, 3));
  const SymmetricMatrix V = sym_gauss(rng, 3, 0.5);
  CHECK((riexp_aim(I3, SymmetricMatrix(Matrix::Zero(3, 3))).mat() - I3.mat()).norm() <
        1e-14);
  CHECK((riexp_aim(I3, V).mat() - funcm(V, fn::exp()).mat()).norm() < 1e-12);

  const SpdMatrix P(diag2(4, 1));
  const SymmetricMatrix W(diag2(4.0 * std::log(2.0), 0));
  const SpdMatrix E = riexp_aim(P, W);
  CHECK((E.mat() - diag2(8, 1)).norm() < 1e-10);
  CHECK((rielog(MetricParams(Family::Aim, 1.0), P, E).mat() - W.mat()).norm() < 1e-10);

  const SpdMatrix Pr = SpdMatrix(funcm(sym_gauss(rng, 5, 0.5), fn::exp()).mat());
  const SymmetricMatrix Vr = sym_gauss(rng, 5, 0.7);
  CHECK((rielog(MetricParams(Family::Aim, 1.0), Pr, riexp_aim(Pr, Vr)).mat() - Vr.mat())
            .norm() < 1e-8);
}

TEST_CASE("ptransport closed cases") {
  Rng rng(9);
  const SpdMatrix P = SpdMatrix(funcm(sym_gauss(rng, 3, 0.5), fn::exp()).mat());
  const SpdMatrix Q = SpdMatrix(funcm(sym_gauss(rng, 3, 0.5), fn::exp()).mat());
  const SymmetricMatrix V = sym_gauss(rng, 3, 1.0);

  for (Family f : {Family::Lem, Family::Aim, Family::Em, Family::Lcm}) {
    const MetricParams mp(f, 1.0);
    CHECK((ptransport(mp, P, P, V).mat() - V.mat()).norm() < 1e-9);
  }
  CHECK((ptransport(MetricParams(Family::Em, 1.0), P, Q, V).mat() - V.mat()).norm() == 0.0);

  const SpdMatrix I2(Matrix::Identity(2, 2));
  Matrix e11 = Matrix::Zero(2, 2);
  e11(0, 0) = 1.0;
  CHECK((ptransport(MetricParams(Family::Bwm, 0.5), I2, SpdMatrix(diag2(1, 3)),
                    SymmetricMatrix(e11))
             .mat() -
         e11)
            .norm() < 1e-12);
  CHECK_THROWS_AS(ptransport(MetricParams(Family::Bwm, 0.5), SpdMatrix(diag2(2, 1)),
                             SpdMatrix(diag2(1, 3)), SymmetricMatrix(e11)),
                  DomainError);
}

TEST_CASE("transport isometry spot checks") {
  Rng rng(11);
  const SpdMatrix P = SpdMatrix(funcm(sym_gauss(rng, 4, 0.5), fn::exp()).mat());
  const SpdMatrix Q = SpdMatrix(funcm(sym_gauss(rng, 4, 0.5), fn::exp()).mat());
  const SymmetricMatrix V = sym_gauss(rng, 4, 1.0);
  for (Family f : {Family::Lem, Family::Aim, Family::Em, Family::Lcm}) {
    const MetricParams mp(f, 1.5, 1.0, 0.1);
    const double before = metric(mp, P, V, V);
    const SymmetricMatrix W = ptransport(mp, P, Q, V);
    CHECK(std::abs(metric(mp, Q, W, W) - before) / before < 1e-8);
  }
  const MetricParams bwm(Family::Bwm, 0.75);
  const SpdMatrix I4(Matrix::Identity(4, 4));
  const double before = metric(bwm, I4, V, V);
  const SymmetricMatrix W = ptransport(bwm, I4, Q, V);
  CHECK(std::abs(metric(bwm, Q, W, W) - before) / before < 1e-8);
}

TEST_CASE("chol_group_op axioms and closed case") {
  Rng rng(13);
  const SpdMatrix S = SpdMatrix(funcm(sym_gauss(rng, 3, 0.5), fn::exp()).mat());
  const SpdMatrix I3(Matrix::Identity(3, 3));
  CHECK((chol_group_op(I3, S).mat() - S.mat()).norm() < 1e-12);
  CHECK((chol_group_op(S, I3).mat() - S.mat()).norm() < 1e-10);
  CHECK((chol_group_op(SpdMatrix(diag2(4, 1)), SpdMatrix(diag2(1, 9))).mat() - diag2(4, 9))
            .norm() < 1e-12);
}
