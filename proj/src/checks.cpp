#include "geomlr/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <sstream>

#include "geomlr/mlr.hpp"
#include "geomlr/songeo.hpp"

namespace geomlr {

bool CheckReport::all_pass() const {
  for (const auto& r : results)
    if (!r.pass) return false;
  return true;
}

void CheckReport::merge(const CheckReport& other) {
  results.insert(results.end(), other.results.begin(), other.results.end());
}

namespace {

using M2 = Eigen::Matrix2d;
using V3 = Eigen::Vector3d;

constexpr double kPi = 3.14159265358979323846;

struct Collector {
  CheckReport report;
  std::uint64_t seed;
  explicit Collector(std::uint64_t s) : seed(s) {}
  void add(const std::string& module, const std::string& invariant, double worst, bool pass,
           const std::string& note = "") {
    report.results.push_back({module, invariant, seed, worst, pass, note});
  }
};

Matrix rand_orth(Rng& rng, Index n) { return orthonormalize_det1(gauss_matrix(rng, n, n, 1.0)).mat(); }

// Controlled condition number: extreme eigenvalues pinned at sqrt(c) and
// 1/sqrt(c), the rest log-uniform in between.
SpdMatrix rand_spd_cond(Rng& rng, Index n, double cond) {
  const Matrix U = rand_orth(rng, n);
  Vector sigma(n);
  const double h = 0.5 * std::log(cond);
  sigma(0) = std::exp(h);
  if (n > 1) sigma(1) = std::exp(-h);
  for (Index i = 2; i < n; ++i) sigma(i) = std::exp((2.0 * rng.uniform() - 1.0) * h);
  return SpdMatrix(sym_part(U * sigma.asDiagonal() * U.transpose()));
}

bool bit_equal(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) return false;
  return std::memcmp(A.data(), B.data(), sizeof(double) * static_cast<std::size_t>(A.size())) == 0;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

double mat_rel(const Matrix& A, const Matrix& B) {
  return (A - B).norm() / std::max(1.0, B.norm());
}

const std::vector<double>& zero_law_thetas(Family f) {
  static const std::vector<double> gen = {-0.5, 0.5, 1.0, 1.5};
  static const std::vector<double> bwm = {0.25, 0.5, 0.75};
  return f == Family::Bwm ? bwm : gen;
}

const std::vector<double>& equiv_thetas(Family f) {
  static const std::vector<double> gen = {0.5, 1.0, 1.5};
  static const std::vector<double> bwm = {0.25, 0.5, 0.75};
  return f == Family::Bwm ? bwm : gen;
}

constexpr std::array<Family, 5> kFamilies = {Family::Lem, Family::Aim, Family::Em, Family::Lcm,
                                             Family::Bwm};

MetricParams params_for(Family f, double theta, Index i) {
  // cycle a few valid (alpha, beta) pairs for the families that carry them
  static const std::array<std::pair<double, double>, 3> ab = {
      {{1.0, 0.0}, {1.0, 0.1}, {2.0, -0.1}}};
  if (f == Family::Lcm || f == Family::Bwm) return MetricParams(f, theta);
  const auto& [a, b] = ab[static_cast<std::size_t>(i) % ab.size()];
  return MetricParams(f, theta, a, b);
}

}  // namespace

CheckReport geometry_suite(const CheckOptions& opts) {
  Collector col(opts.seed);
  Rng rng(opts.seed);

  {  // funcm log/exp round trips, cond <= 1e4
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const SpdMatrix S = rand_spd_cond(rng, n, std::pow(10.0, 1 + i % 4));
      const Matrix back = funcm(SymmetricMatrix(funcm(S, fn::log()).mat()), fn::exp()).mat();
      worst = std::max(worst, (back - S.mat()).norm() / S.mat().norm());
    }
    col.add("symlin", "funcm log-exp round trip", worst, worst < 1e-8);
  }
  {  // funcm pow round trips
    static const double ths[] = {-0.25, 0.25, -0.5, 0.5, 1.0, 1.5};
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const double t = ths[i % 6];
      const SpdMatrix S = rand_spd_cond(rng, n, 100.0);
      const Matrix back =
          funcm(SymmetricMatrix(funcm(S, fn::pow(t)).mat()), fn::pow(1.0 / t)).mat();
      worst = std::max(worst, (back - S.mat()).norm() / S.mat().norm());
    }
    col.add("symlin", "funcm pow round trip", worst, worst < 1e-8);
  }
  {  // funcm_diff vs finite differences, including a 1e-7 eigen gap
    const std::array<ScalarFn, 3> fns = {fn::log(), fn::exp(), fn::pow(0.5)};
    double worst = 0.0;
    const double h = 1e-6;
    for (int i = 0; i < 60; ++i) {
      const Index n = 2 + (i % 5);
      SpdMatrix S = [&] {
        if (i % 3 == 0) {  // tight eigen gap instance
          const Matrix U = rand_orth(rng, n);
          Vector sigma(n);
          sigma(0) = 1.0;
          sigma(1) = 1.0 + 1e-7;
          for (Index k = 2; k < n; ++k) sigma(k) = 0.4 + 2.0 * rng.uniform();
          return SpdMatrix(sym_part(U * sigma.asDiagonal() * U.transpose()));
        }
        return rand_spd_cond(rng, n, 30.0);
      }();
      const SymmetricMatrix V = sym_gauss(rng, n, 1.0);
      const ScalarFn f = fns[static_cast<std::size_t>(i) % 3];
      const Matrix an = funcm_diff(S, f, V).mat();
      const Matrix fd = (funcm(SymmetricMatrix(S.mat() + h * V.mat()), f).mat() -
                         funcm(SymmetricMatrix(S.mat() - h * V.mat()), f).mat()) /
                        (2.0 * h);
      worst = std::max(worst, (fd - an).norm() / std::max(1.0, an.norm()));
    }
    col.add("symlin", "funcm_diff finite differences", worst, worst < 1e-5);
  }
  {  // lyapunov residual
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const SpdMatrix P = rand_spd_cond(rng, n, std::pow(10.0, 1 + i % 4));
      const SymmetricMatrix V = sym_gauss(rng, n, 1.0);
      const Matrix X = lyap_solve(P, V).mat();
      const double res = (X * P.mat() + P.mat() * X - V.mat()).norm() / (1.0 + V.mat().norm());
      worst = std::max(worst, res);
    }
    col.add("symlin", "lyap_solve residual", worst, worst < 1e-10);
  }
  {  // prod_sqrt squares and transpose relation
    double worst = 0.0;
    bool bits = true;
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const SpdMatrix B = rand_spd_cond(rng, n, 100.0);
      const SpdMatrix A = rand_spd_cond(rng, n, 100.0);
      const ProdSqrt ps = prod_sqrt(B, A);
      const Matrix BA = B.mat() * A.mat();
      const Matrix AB = A.mat() * B.mat();
      worst = std::max(worst, (ps.ba * ps.ba - BA).norm() / BA.norm());
      worst = std::max(worst, (ps.ab * ps.ab - AB).norm() / AB.norm());
      bits = bits && bit_equal(ps.ab, ps.ba.transpose());
    }
    col.add("symlin", "prod_sqrt squares to BA/AB", worst, worst < 1e-8);
    col.add("symlin", "prod_sqrt transpose relation", bits ? 0.0 : 1.0, bits,
            "exact by construction");
  }
  {  // chol_diff / chol_inv_diff mutual inverses
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const SpdMatrix P = rand_spd_cond(rng, n, 100.0);
      const LowerTriangular L = chol(P);
      const SymmetricMatrix V = sym_gauss(rng, n, 1.0);
      const Matrix V2 = chol_inv_diff(L, chol_diff(L, V)).mat();
      worst = std::max(worst, (V2 - V.mat()).norm() / (1.0 + V.mat().norm()));
      Matrix X = gauss_matrix(rng, n, n, 1.0);
      X = X.triangularView<Eigen::Lower>();
      const Matrix X2 = chol_diff(L, chol_inv_diff(L, X));
      worst = std::max(worst, (X2 - X).norm() / (1.0 + X.norm()));
    }
    col.add("symlin", "chol_diff inverse pair", worst, worst < 1e-9);
  }
  {  // AIM exp/log round trip
    double worst = 0.0;
    const MetricParams aim(Family::Aim, 1.0);
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const SpdMatrix P = rand_spd_cond(rng, n, 100.0);
      SymmetricMatrix V = sym_gauss(rng, n, 0.5);
      // keep the whitened exponent moderate so the exp map stays well inside
      // the SPD guard at condition 100
      const Matrix Pmh = funcm(P, fn::pow(-0.5)).mat();
      const double xf = (Pmh * V.mat() * Pmh).norm();
      if (xf > 2.0) V = SymmetricMatrix(V.mat() * (2.0 / xf));
      const SymmetricMatrix V2 = rielog(aim, P, riexp_aim(P, V));
      worst = std::max(worst, (V2.mat() - V.mat()).norm() / (1.0 + V.mat().norm()));
    }
    col.add("spdgeo", "aim exp-log round trip", worst, worst < 1e-8);
  }
  for (Family f : kFamilies) {  // zero law per family
    double worst = 0.0;
    const auto& ths = zero_law_thetas(f);
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const MetricParams mp = params_for(f, ths[static_cast<std::size_t>(i) % ths.size()], i);
      const SpdMatrix P = rand_spd_cond(rng, n, 100.0);
      worst = std::max(worst, rielog(mp, P, P).mat().norm() / (1.0 + P.mat().norm()));
    }
    col.add("spdgeo", "rielog zero law " + family_name(f), worst, worst < 1e-9);
  }
  for (Family f : kFamilies) {  // transport isometry
    double worst = 0.0;
    const auto& ths = equiv_thetas(f);
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const MetricParams mp = params_for(f, ths[static_cast<std::size_t>(i) % ths.size()], i);
      const SpdMatrix P =
          f == Family::Bwm ? SpdMatrix::identity(n) : rand_spd_cond(rng, n, 100.0);
      const SpdMatrix Q = rand_spd_cond(rng, n, 100.0);
      const SymmetricMatrix V = sym_gauss(rng, n, 1.0);
      const SymmetricMatrix W = ptransport(mp, P, Q, V);
      const double before = metric(mp, P, V, V);
      const double after = metric(mp, Q, W, W);
      worst = std::max(worst, std::abs(after - before) / before);
    }
    col.add("spdgeo", "transport isometry " + family_name(f), worst, worst < 1e-8);
  }
  for (Family f : {Family::Lem, Family::Aim, Family::Em, Family::Bwm}) {  // O(n)-invariance
    double worst = 0.0;
    const auto& ths = equiv_thetas(f);
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const MetricParams mp = params_for(f, ths[static_cast<std::size_t>(i) % ths.size()], i);
      const SpdMatrix P = rand_spd_cond(rng, n, 100.0);
      const SymmetricMatrix V = sym_gauss(rng, n, 1.0);
      const SymmetricMatrix W = sym_gauss(rng, n, 1.0);
      const Matrix R = rand_orth(rng, n);
      const double a = metric(mp, P, V, W);
      const double b =
          metric(mp, SpdMatrix(sym_part(R * P.mat() * R.transpose())),
                 SymmetricMatrix(sym_part(R * V.mat() * R.transpose())),
                 SymmetricMatrix(sym_part(R * W.mat() * R.transpose())));
      const double scale = std::sqrt(metric(mp, P, V, V) * metric(mp, P, W, W));
      worst = std::max(worst, std::abs(a - b) / std::max(scale, 1e-300));
    }
    col.add("spdgeo", "O(n) invariance " + family_name(f), worst, worst < 1e-9);
  }
  {  // alpha-scale lemma: log and transport ignore the metric scale, bitwise
    bool bits = true;
    double worst = 0.0;
    static const double scales[] = {2.0, 10.0, 0.5};
    static const Family fams[] = {Family::Lem, Family::Aim, Family::Em};
    for (int i = 0; i < 60; ++i) {
      const Family f = fams[static_cast<std::size_t>(i) % 3];
      const Index n = 2 + (i % 7);
      const auto& ths = equiv_thetas(f);
      const double th = ths[static_cast<std::size_t>(i) % ths.size()];
      const MetricParams mp = params_for(f, th, i);
      const MetricParams scaled(f, th, mp.alpha * scales[i % 3], mp.beta);
      const SpdMatrix P =
          f == Family::Bwm ? SpdMatrix::identity(n) : rand_spd_cond(rng, n, 100.0);
      const SpdMatrix Q = rand_spd_cond(rng, n, 100.0);
      const SymmetricMatrix V = sym_gauss(rng, n, 1.0);
      const Matrix l1 = rielog(mp, P, Q).mat();
      const Matrix l2 = rielog(scaled, P, Q).mat();
      const Matrix t1 = ptransport(mp, P, Q, V).mat();
      const Matrix t2 = ptransport(scaled, P, Q, V).mat();
      bits = bits && bit_equal(l1, l2) && bit_equal(t1, t2);
      worst = std::max({worst, (l1 - l2).norm(), (t1 - t2).norm()});
    }
    col.add("spdgeo", "alpha-scale log/transport equality", worst, bits && worst <= 1e-12,
            "bit-identical code path");
  }
  {  // Cholesky group axioms
    double wid = 0.0, wassoc = 0.0, winv = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Index n = 2 + (i % 7);
      const SpdMatrix S1 = rand_spd_cond(rng, n, 100.0);
      const SpdMatrix S2 = rand_spd_cond(rng, n, 100.0);
      const SpdMatrix S3 = rand_spd_cond(rng, n, 100.0);
      const SpdMatrix I = SpdMatrix::identity(n);
      wid = std::max(wid, mat_rel(chol_group_op(I, S1).mat(), S1.mat()));
      wid = std::max(wid, mat_rel(chol_group_op(S1, I).mat(), S1.mat()));
      wassoc = std::max(wassoc, mat_rel(chol_group_op(chol_group_op(S1, S2), S3).mat(),
                                        chol_group_op(S1, chol_group_op(S2, S3)).mat()));
      const Matrix Li = chol(S1).mat().triangularView<Eigen::Lower>().solve(
          Matrix::Identity(n, n));
      // group inverse: the point whose lower factor is L^{-1}
      const SpdMatrix Sinv(sym_part(Li * Li.transpose()));
      winv = std::max(winv, (chol_group_op(S1, Sinv).mat() - Matrix::Identity(n, n)).norm());
    }
    col.add("spdgeo", "cholesky group identity", wid, wid < 1e-12);
    col.add("spdgeo", "cholesky group associativity", wassoc, wassoc < 1e-9);
    col.add("spdgeo", "cholesky group inverse", winv, winv < 1e-9);
  }
  {  // so3 log/exp round trip over angles up to pi - 1e-3
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double angle = (kPi - 1e-3) * static_cast<double>(i) / 99.0;
      Vector axis = gauss_matrix(rng, 3, 1, 1.0).col(0);
      axis /= axis.norm();
      Matrix K = Matrix::Zero(3, 3);
      K(2, 1) = axis(0) * angle;
      K(1, 2) = -axis(0) * angle;
      K(0, 2) = axis(1) * angle;
      K(2, 0) = -axis(1) * angle;
      K(1, 0) = axis(2) * angle;
      K(0, 1) = -axis(2) * angle;
      const RotationMatrix R = so3_exp(SkewMatrix(K));
      const RotationMatrix R2 = so3_exp(so3_log(R));
      worst = std::max(worst, (R2.mat() - R.mat()).norm());
    }
    col.add("songeo", "so3 log-exp round trip", worst, worst < 1e-10);
  }
  {  // bi-invariance of the algebra inner product
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const SkewMatrix A1 = skew_gauss(rng, 3, 1.0);
      const SkewMatrix A2 = skew_gauss(rng, 3, 1.0);
      const Matrix Q = random_rotation(rng, 3).mat();
      const double a = A1.mat().cwiseProduct(A2.mat()).sum();
      const double b = (Q * A1.mat() * Q.transpose())
                           .cwiseProduct(Q * A2.mat() * Q.transpose())
                           .sum();
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    col.add("songeo", "bi-invariance of algebra metric", worst, worst < 1e-12);
  }
  return col.report;
}

CheckReport limits_suite(const CheckOptions& opts) {
  Collector col(opts.seed);
  Rng rng(opts.seed);
  static const double ts[] = {1e-2, 1e-3, 1e-4};

  const auto run = [&](Family f, const MetricParams& target, double target_scale,
                       double alpha, double beta, const std::string& name) {
    std::array<double, 3> dev = {0.0, 0.0, 0.0};
    std::vector<SpdMatrix> Ps;
    std::vector<SymmetricMatrix> Vs;
    for (int i = 0; i < 20; ++i) {
      Ps.push_back(rand_spd_cond(rng, 2 + (i % 7), 100.0));
      Vs.push_back(sym_gauss(rng, Ps.back().n(), 1.0));
    }
    for (int k = 0; k < 3; ++k) {
      const MetricParams mp(f, ts[k], alpha, beta);
      for (int i = 0; i < 20; ++i) {
        const double a = metric(mp, Ps[static_cast<std::size_t>(i)],
                                Vs[static_cast<std::size_t>(i)], Vs[static_cast<std::size_t>(i)]);
        const double b = target_scale * metric(target, Ps[static_cast<std::size_t>(i)],
                                               Vs[static_cast<std::size_t>(i)],
                                               Vs[static_cast<std::size_t>(i)]);
        dev[static_cast<std::size_t>(k)] =
            std::max(dev[static_cast<std::size_t>(k)], std::abs(a - b) / b);
      }
    }
    const bool monotone = dev[0] > dev[1] && dev[1] > dev[2];
    const bool small = dev[2] < 1e-3;
    std::ostringstream note;
    note << "dev(1e-2)=" << dev[0] << " dev(1e-3)=" << dev[1] << " dev(1e-4)=" << dev[2];
    col.add("spdgeo", name, dev[2], monotone && small, note.str());
  };

  run(Family::Em, MetricParams(Family::Lem, 1.0, 1.0, 0.05), 1.0, 1.0, 0.05,
      "em metric tends to lem");
  run(Family::Bwm, MetricParams(Family::Lem, 1.0, 1.0, 0.0), 0.25, 1.0, 0.0,
      "bwm metric tends to quarter-lem");
  return col.report;
}

CheckReport closedform_suite(const CheckOptions& opts) {
  Collector col(opts.seed);
  Rng rng(opts.seed);

  {  // closed forms match the generic transported-parameter pipeline
    static const Index ns[] = {2, 3, 5};
    for (Family f : kFamilies) {
      double worst = 0.0;
      const auto& ths = equiv_thetas(f);
      int i = 0;
      for (double th : ths) {
        for (Index n : ns) {
          const MetricParams mp = params_for(f, th, i++);
          SpdMlrLayer layer;
          layer.mp = mp;
          for (int k = 0; k < 3; ++k) {
            layer.P.push_back(rand_spd_cond(rng, n, 30.0));
            layer.A.push_back(sym_gauss(rng, n, 1.0));
          }
          const SpdMatrix S = rand_spd_cond(rng, n, 30.0);
          const Logits a = spd_mlr_logits(mp, S, layer);
          const Logits b = rmlr_logits_generic(mp, S, layer);
          for (Index k = 0; k < 3; ++k) worst = std::max(worst, rel(a(k), b(k)));
        }
      }
      col.add("rmlr", "closed form equals generic " + family_name(f), worst, worst < 1e-9);
    }
  }
  {  // Euclidean reduction: EM theta=1 on diagonal data
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Index n = 2 + (i % 5);
      Vector x(n), p(n), a(n);
      for (Index j = 0; j < n; ++j) {
        x(j) = std::exp(rng.normal());
        p(j) = std::exp(rng.normal());
        a(j) = rng.normal();
      }
      const MetricParams mp(Family::Em, 1.0, 1.0, 0.0);
      SpdMlrLayer layer;
      layer.mp = mp;
      layer.P.emplace_back(Matrix(p.asDiagonal()));
      layer.A.emplace_back(Matrix(a.asDiagonal()));
      const SpdMatrix S(Matrix(x.asDiagonal()));
      const double score = spd_mlr_logits(mp, S, layer)(0);
      const double expect = x.dot(a) - p.dot(a);
      worst = std::max(worst, std::abs(score - expect) / std::max(1.0, std::abs(expect)));
    }
    col.add("rmlr", "euclidean reduction", worst, worst < 1e-12);
  }
  {  // margin-distance consistency with the per-class score
    double worst = 0.0;
    int i = 0;
    for (Family f : kFamilies) {
      for (double th : equiv_thetas(f)) {
        const Index n = 2 + (i % 5);
        const MetricParams mp = params_for(f, th, i++);
        const SpdMatrix P = rand_spd_cond(rng, n, 30.0);
        const SpdMatrix S = rand_spd_cond(rng, n, 30.0);
        const SymmetricMatrix A = sym_gauss(rng, n, 1.0);
        const SymmetricMatrix At = f == Family::Bwm ? make_tilde_A_lt_deformed(mp, P, A)
                                                    : make_tilde_A_pt(mp, P, A);
        const double score = metric(mp, P, rielog(mp, P, S), At);
        const double nrm = std::sqrt(metric(mp, P, At, At));
        const double md = margin_distance(mp, S, P, At);
        const double lhs = (score >= 0 ? 1.0 : -1.0) * nrm * md;
        worst = std::max(worst, std::abs(lhs - score) / std::max(1.0, std::abs(score)));
      }
    }
    col.add("rmlr", "margin distance consistency", worst, worst < 1e-10);
  }
  {  // argmax invariance under global alpha scaling (beta = 0)
    bool ok = true;
    static const double scales[] = {3.0, 0.25};
    for (Family f : {Family::Lem, Family::Aim, Family::Em}) {
      for (int i = 0; i < 20; ++i) {
        const Index n = 2 + (i % 5);
        const double th = equiv_thetas(f)[static_cast<std::size_t>(i) % 3];
        const MetricParams mp(f, th, 1.0, 0.0);
        const MetricParams mps(f, th, scales[i % 2], 0.0);
        SpdMlrLayer layer;
        layer.mp = mp;
        for (int k = 0; k < 4; ++k) {
          layer.P.push_back(rand_spd_cond(rng, n, 30.0));
          layer.A.push_back(sym_gauss(rng, n, 1.0));
        }
        const SpdMatrix S = rand_spd_cond(rng, n, 30.0);
        const Logits a = spd_mlr_logits(mp, S, layer);
        const Logits b = spd_mlr_logits(mps, S, layer);
        Index ia, ib;
        a.maxCoeff(&ia);
        b.maxCoeff(&ib);
        ok = ok && ia == ib;
      }
    }
    col.add("rmlr", "argmax invariant to alpha scale", ok ? 0.0 : 1.0, ok);
  }
  {  // Lie MLR: transport and translation paths bit-identical
    bool bits = true;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      LieMlrLayer layer;
      layer.blocks = 2;
      for (int k = 0; k < 3; ++k) {
        std::vector<RotationMatrix> ps;
        std::vector<SkewMatrix> as;
        for (int b = 0; b < 2; ++b) {
          Matrix K = skew_gauss(rng, 3, 0.6).mat();
          const double t = std::sqrt(0.5) * K.norm();
          if (t > 1.2) K *= 1.2 / t;
          ps.push_back(so3_exp(SkewMatrix(K)));
          as.push_back(skew_gauss(rng, 3, 1.0));
        }
        layer.P.push_back(std::move(ps));
        layer.A.push_back(std::move(as));
      }
      std::vector<RotationMatrix> S;
      for (int b = 0; b < 2; ++b) {
        Matrix K = skew_gauss(rng, 3, 0.6).mat();
        const double t = std::sqrt(0.5) * K.norm();
        if (t > 1.2) K *= 1.2 / t;
        S.push_back(so3_exp(SkewMatrix(K)));
      }
      const Logits za = lie_mlr_logits_via(S, layer, LiePath::Transport);
      const Logits zb = lie_mlr_logits_via(S, layer, LiePath::Translation);
      const Logits zc = lie_mlr_logits(S, layer);
      bits = bits && std::memcmp(za.data(), zb.data(),
                                 sizeof(double) * static_cast<std::size_t>(za.size())) == 0;
      worst = std::max(worst, (za - zc).cwiseAbs().maxCoeff() / std::max(1.0, zc.norm()));
    }
    col.add("rmlr", "lie path equality", worst, bits && worst < 1e-12, "bit-identical paths");
  }
  return col.report;
}

namespace {

// ---- margin oracle helpers (n = 2 charts) ----

V3 sym2_coords(const Matrix& M) { return V3(M(0, 0), M(1, 1), std::sqrt(2.0) * M(0, 1)); }

M2 coords_sym2(const V3& c) {
  M2 M;
  M << c(0), c(2) / std::sqrt(2.0), c(2) / std::sqrt(2.0), c(1);
  return M;
}

// two unit vectors spanning the orthogonal complement of nhat in R^3
std::pair<V3, V3> plane_basis(const V3& nhat) {
  std::vector<V3> out;
  for (int i = 0; i < 3 && out.size() < 2; ++i) {
    V3 y = V3::Unit(i) - V3::Unit(i).dot(nhat) * nhat;
    for (const auto& b : out) y -= y.dot(b) * b;
    const double nrm = y.norm();
    if (nrm > 0.3) out.push_back(y / nrm);
  }
  return {out[0], out[1]};
}

M2 expsym2(const M2& M) {
  const double mu = 0.5 * (M(0, 0) + M(1, 1));
  const double w = 0.5 * (M(0, 0) - M(1, 1));
  const double r = std::sqrt(w * w + M(0, 1) * M(0, 1));
  const double emu = std::exp(mu);
  if (r < 1e-300) return emu * M2::Identity();
  const double ch = std::cosh(r), sh = std::sinh(r) / r;
  M2 D = M;
  D(0, 0) -= mu;
  D(1, 1) -= mu;
  return emu * (ch * M2::Identity() + sh * D);
}

struct MarginInstance {
  double closed = 0.0;
  double inf = 0.0;
};

constexpr int kGrid = 1000;

double grid_min(const std::function<double(double, double)>& d, double T) {
  double best = std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(min : best)
  for (int i = 0; i < kGrid; ++i) {
    const double t1 = -T + 2.0 * T * static_cast<double>(i) / (kGrid - 1);
    double row = std::numeric_limits<double>::infinity();
    for (int j = 0; j < kGrid; ++j) {
      const double t2 = -T + 2.0 * T * static_cast<double>(j) / (kGrid - 1);
      row = std::min(row, d(t1, t2));
    }
    best = std::min(best, row);
  }
  return best;
}

}  // namespace

CheckReport margin_suite(const CheckOptions& opts) {
  Collector col(opts.seed);
  Rng rng(opts.seed);

  const auto record = [&](Family f, const std::vector<MarginInstance>& runs) {
    double worst_gap = 0.0, worst_viol = 0.0;
    bool pass = true;
    for (const auto& r : runs) {
      const double gap = (r.inf - r.closed) / r.closed;
      worst_gap = std::max(worst_gap, std::abs(gap));
      worst_viol = std::max(worst_viol, r.closed - r.inf);
      pass = pass && r.closed <= r.inf * (1.0 + 1e-9) + 1e-12 && gap <= 0.02;
    }
    std::ostringstream note;
    note << "worst closed-inf=" << worst_viol;
    col.add("rmlr", "margin closed vs sampled " + family_name(f), worst_gap, pass, note.str());
  };

  {  // LEM: flat in log coordinates
    std::vector<MarginInstance> runs;
    for (int i = 0; i < 20; ++i) {
      const MetricParams mp(Family::Lem, 1.0, 1.0, 0.0);
      const SpdMatrix P(funcm(sym_gauss(rng, 2, 0.5), fn::exp()).mat());
      const SymmetricMatrix A = sym_gauss(rng, 2, 1.0);
      const SymmetricMatrix At = make_tilde_A_pt(mp, P, A);
      const V3 n = sym2_coords(A.mat()).normalized();
      const auto [b1, b2] = plane_basis(n);
      const V3 zP = sym2_coords(funcm(P, fn::log()).mat());
      V3 ip = sym2_coords(sym_gauss(rng, 2, 0.3).mat());
      ip -= ip.dot(n) * n;
      if (ip.norm() > 0.2) ip *= 0.2 / ip.norm();
      const double delta = 0.05 + 0.15 * rng.uniform();
      const V3 zS = zP + delta * n + ip;
      const SpdMatrix S(funcm(SymmetricMatrix(coords_sym2(zS)), fn::exp()).mat());
      MarginInstance mi;
      mi.closed = margin_distance(mp, S, P, At);
      const double T = 3.0 * (zS - zP).norm();
      const V3 b1c = b1, b2c = b2;
      mi.inf = grid_min(
          [&](double t1, double t2) {
            return (zS - (zP + t1 * b1c + t2 * b2c)).norm();
          },
          T);
      runs.push_back(mi);
    }
    record(Family::Lem, runs);
  }
  {  // EM: flat in the power chart, restricted to the cone
    std::vector<MarginInstance> runs;
    static const double ths[] = {0.5, 1.0, 1.5};
    for (int i = 0; i < 20; ++i) {
      const double th = ths[i % 3];
      const MetricParams mp(Family::Em, th, 1.0, 0.0);
      SpdMatrix P = SpdMatrix::identity(2);
      for (int tries = 0; tries < 100; ++tries) {
        P = SpdMatrix(funcm(sym_gauss(rng, 2, 0.3), fn::exp()).mat());
        const Matrix Pth = funcm(P, fn::pow(th)).mat();
        if (eig_sym(SymmetricMatrix(Pth)).sigma.minCoeff() >= 0.45) break;
      }
      const SymmetricMatrix A = sym_gauss(rng, 2, 1.0);
      const SymmetricMatrix At = make_tilde_A_pt(mp, P, A);
      const V3 n = sym2_coords(A.mat()).normalized();
      const auto [b1, b2] = plane_basis(n);
      const V3 zP = sym2_coords(funcm(P, fn::pow(th)).mat());
      V3 zS;
      for (int tries = 0; tries < 200; ++tries) {
        V3 ip = sym2_coords(sym_gauss(rng, 2, 0.3).mat());
        ip -= ip.dot(n) * n;
        if (ip.norm() > 0.2) ip *= 0.2 / ip.norm();
        const double delta = 0.05 + 0.15 * rng.uniform();
        zS = zP + delta * n + ip;
        const M2 Z = coords_sym2(zS);
        if (Z(0, 0) > 0.05 && Z.determinant() > 1e-3) break;
      }
      const SpdMatrix S(funcm(SymmetricMatrix(coords_sym2(zS)), fn::pow(1.0 / th)).mat());
      MarginInstance mi;
      mi.closed = margin_distance(mp, S, P, At);
      const double T = 3.0 * (zS - zP).norm();
      mi.inf = grid_min(
          [&](double t1, double t2) {
            const V3 z = zP + t1 * b1 + t2 * b2;
            const M2 Z = coords_sym2(z);
            if (Z(0, 0) <= 0.0 || Z.determinant() <= 0.0)
              return std::numeric_limits<double>::infinity();
            return (zS - z).norm() / th;
          },
          T);
      runs.push_back(mi);
    }
    record(Family::Em, runs);
  }
  {  // LCM: flat in strict-lower + log-diagonal Cholesky coordinates
    std::vector<MarginInstance> runs;
    static const double ths[] = {0.5, 1.0, 1.5};
    const auto chart = [](const Matrix& Xth) {
      const Matrix L = chol_unchecked(Xth).mat();
      return V3(std::log(L(0, 0)), L(1, 0), std::log(L(1, 1)));
    };
    const auto unchart = [](const V3& z) {
      M2 L;
      L << std::exp(z(0)), 0.0, z(1), std::exp(z(2));
      return Matrix(L * L.transpose());
    };
    for (int i = 0; i < 20; ++i) {
      const double th = ths[i % 3];
      const MetricParams mp(Family::Lcm, th);
      const SpdMatrix P(funcm(sym_gauss(rng, 2, 0.5), fn::exp()).mat());
      const SymmetricMatrix A = sym_gauss(rng, 2, 1.0);
      const SymmetricMatrix At = make_tilde_A_pt(mp, P, A);
      const V3 n = V3(0.5 * A.mat()(0, 0), A.mat()(1, 0), 0.5 * A.mat()(1, 1)).normalized();
      const auto [b1, b2] = plane_basis(n);
      const V3 zP = chart(funcm(P, fn::pow(th)).mat());
      V3 ip(rng.normal(), rng.normal(), rng.normal());
      ip *= 0.3;
      ip -= ip.dot(n) * n;
      if (ip.norm() > 0.2) ip *= 0.2 / ip.norm();
      const double delta = 0.05 + 0.15 * rng.uniform();
      const V3 zS = zP + delta * n + ip;
      const SpdMatrix S(
          funcm(SymmetricMatrix(sym_part(unchart(zS))), fn::pow(1.0 / th)).mat());
      MarginInstance mi;
      mi.closed = margin_distance(mp, S, P, At);
      const double T = 3.0 * (zS - zP).norm();
      mi.inf = grid_min(
          [&](double t1, double t2) {
            return (zS - (zP + t1 * b1 + t2 * b2)).norm() / th;
          },
          T);
      runs.push_back(mi);
    }
    record(Family::Lcm, runs);
  }
  {  // AIM: hyperplane parametrized in the whitened log chart
    std::vector<MarginInstance> runs;
    static const double ths[] = {0.5, 1.0, 1.5};
    for (int i = 0; i < 20; ++i) {
      const double th = ths[i % 3];
      const MetricParams mp(Family::Aim, th, 1.0, 0.0);
      const SpdMatrix P(funcm(sym_gauss(rng, 2, 0.4), fn::exp()).mat());
      const SymmetricMatrix A = sym_gauss(rng, 2, 1.0);
      const SymmetricMatrix At = make_tilde_A_pt(mp, P, A);
      const V3 n = sym2_coords(A.mat()).normalized();
      const auto [b1, b2] = plane_basis(n);
      const M2 Ph = funcm(P, fn::pow(th / 2.0)).mat();
      V3 ip = sym2_coords(sym_gauss(rng, 2, 0.3).mat());
      ip -= ip.dot(n) * n;
      if (ip.norm() > 0.2) ip *= 0.2 / ip.norm();
      const double delta = 0.05 + 0.15 * rng.uniform();
      const V3 yS = delta * n + ip;
      const M2 Xth = Ph * expsym2(coords_sym2(yS)) * Ph;
      const SpdMatrix S(
          funcm(SymmetricMatrix(sym_part(Matrix(Xth))), fn::pow(1.0 / th)).mat());
      const M2 Sth_inv = funcm(S, fn::pow(-th)).mat();
      MarginInstance mi;
      mi.closed = margin_distance(mp, S, P, At);
      const double T = 3.0 * std::max(yS.norm(), 0.05);
      mi.inf = grid_min(
          [&](double t1, double t2) {
            const M2 Y = coords_sym2(t1 * b1 + t2 * b2);
            const M2 Xt = Ph * expsym2(Y) * Ph;
            const M2 G = Sth_inv * Xt;
            const double tr = G.trace();
            const double disc = std::max(tr * tr - 4.0 * G.determinant(), 0.0);
            const double l1 = 0.5 * (tr + std::sqrt(disc));
            const double l2 = 0.5 * (tr - std::sqrt(disc));
            if (l1 <= 0.0 || l2 <= 0.0) return std::numeric_limits<double>::infinity();
            const double a = std::log(l1), b = std::log(l2);
            return std::sqrt(a * a + b * b) / th;
          },
          T);
      runs.push_back(mi);
    }
    record(Family::Aim, runs);
  }
  {  // BWM: commuting instances in the base chart, exp-parametrized hyperplane
    std::vector<MarginInstance> runs;
    static const double ths[] = {0.25, 0.5, 0.75};
    for (int i = 0; i < 20; ++i) {
      const double th = ths[i % 3];
      const double p = 2.0 * th;
      const MetricParams mp(Family::Bwm, th);

      const Matrix U = rand_orth(rng, 2);
      Vector dp(2), ds(2), da(2);
      double closed_probe = 0.0;
      M2 Pp, Stang, Anorm;
      for (int tries = 0; tries < 200; ++tries) {
        for (int j = 0; j < 2; ++j) {
          dp(j) = std::exp(0.3 * rng.normal());
          ds(j) = 0.3 * rng.normal();
          if (std::abs(ds(j)) > 0.9 * dp(j)) ds(j) = 0.9 * dp(j) * (ds(j) > 0 ? 1.0 : -1.0);
          da(j) = rng.normal();
        }
        Pp = U * dp.asDiagonal() * U.transpose();
        Stang = U * ds.asDiagonal() * U.transpose();
        Anorm = U * da.asDiagonal() * U.transpose();
        const auto bw_inner = [&](const M2& V, const M2& W) {
          const M2 Vt = U.transpose() * V * U;
          M2 Lv;
          for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) Lv(r, c) = Vt(r, c) / (dp(r) + dp(c));
          return 0.5 * (U * Lv * U.transpose()).cwiseProduct(W).sum();
        };
        closed_probe = std::abs(bw_inner(Stang, Anorm)) / std::sqrt(bw_inner(Anorm, Anorm));
        if (closed_probe > 0.02 && closed_probe < 0.8) break;
      }

      const auto lyap2 = [&](const M2& V) {
        const M2 Vt = U.transpose() * V * U;
        M2 Lv;
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c) Lv(r, c) = Vt(r, c) / (dp(r) + dp(c));
        return M2(U * Lv * U.transpose());
      };
      const auto bw_inner = [&](const M2& V, const M2& W) {
        return 0.5 * lyap2(V).cwiseProduct(W).sum();
      };

      // g-orthonormal basis of the hyperplane through Pp normal to Anorm
      std::vector<M2> basis;
      const double gAA = bw_inner(Anorm, Anorm);
      for (int e = 0; e < 3 && basis.size() < 2; ++e) {
        M2 E = coords_sym2(V3::Unit(e));
        M2 Y = E - (bw_inner(E, Anorm) / gAA) * Anorm;
        for (const auto& B : basis) Y -= bw_inner(Y, B) * B;
        const double nrm = std::sqrt(bw_inner(Y, Y));
        if (nrm > 1e-4) basis.push_back(Y / nrm);
      }

      const M2 Lt = lyap2(Stang);
      const M2 Sp = Pp + Stang + Lt * Pp * Lt;
      const SpdMatrix P(
          funcm(SpdMatrix(sym_part(Matrix(Pp))), fn::pow(1.0 / p)).mat());
      const SpdMatrix S(
          funcm(SpdMatrix(sym_part(Matrix(Sp))), fn::pow(1.0 / p)).mat());
      const LowerTriangular Lbar = chol(SpdMatrix(sym_part(Matrix(Pp))));
      const Matrix Linv =
          Lbar.mat().triangularView<Eigen::Lower>().solve(Matrix::Identity(2, 2));
      const SymmetricMatrix Alayer(sym_part(Linv * Anorm * Linv.transpose()));
      const SymmetricMatrix At = make_tilde_A_lt_deformed(mp, P, Alayer);

      MarginInstance mi;
      mi.closed = margin_distance(mp, S, P, At);
      const double T = 3.0 * std::sqrt(bw_inner(Stang, Stang));
      const M2 B1 = basis[0], B2 = basis[1];
      const double trSp = Sp.trace(), detSp = Sp.determinant();
      mi.inf = grid_min(
          [&](double t1, double t2) {
            const double inf = std::numeric_limits<double>::infinity();
            const M2 V = t1 * B1 + t2 * B2;
            const M2 Lv = lyap2(V);
            const M2 Q = Pp + V + Lv * Pp * Lv;
            const double detQ = Q.determinant();
            if (Q(0, 0) <= 1e-12 || detQ <= 1e-12) return inf;
            // keep only points the base log actually inverts (inside the
            // injectivity region of the exponential)
            const M2 PQ = Pp * Q;
            const double sq = std::sqrt(std::max(Pp.determinant() * detQ, 0.0));
            const double den2 = PQ.trace() + 2.0 * sq;
            if (den2 <= 0.0) return inf;
            const M2 half = (PQ + sq * M2::Identity()) / std::sqrt(den2);
            const M2 logv = half + half.transpose() - 2.0 * Pp;
            if ((logv - V).norm() > 1e-9 * (1.0 + V.norm())) return inf;
            const double inner = Sp.cwiseProduct(Q).sum() +
                                 2.0 * std::sqrt(std::max(detSp * detQ, 0.0));
            const double d2 =
                trSp + Q.trace() - 2.0 * std::sqrt(std::max(inner, 0.0));
            return std::sqrt(std::max(d2, 0.0)) / p;
          },
          T);
      runs.push_back(mi);
    }
    record(Family::Bwm, runs);
  }
  return col.report;
}

namespace {

LyapVjp lyap_vjp_probe(const CheckOptions& opts, const SpdMatrix& P, const SymmetricMatrix& X,
                       const SymmetricMatrix& G) {
  LyapVjp v = vjp_lyap(P, X, G);
  if (opts.fault_lyap_vjp_sign) v.dP = SymmetricMatrix(-v.dP.mat());
  return v;
}

}  // namespace

CheckReport gradients_suite(const CheckOptions& opts) {
  Collector col(opts.seed);
  Rng rng(opts.seed);

  {  // vjp_funcm vs finite differences
    const std::array<ScalarFn, 5> fns = {fn::log(), fn::exp(), fn::sqrt(), fn::pow(-0.5),
                                         fn::pow(1.5)};
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Index n = 2 + (i % 5);
      const SpdMatrix X = rand_spd_cond(rng, n, 25.0);
      const Matrix G = gauss_matrix(rng, n, n, 1.0);
      const ScalarFn f = fns[static_cast<std::size_t>(i) % 5];
      const Matrix an = vjp_funcm(X, f, G).mat();
      const auto probe = [&](const Matrix& M) {
        return funcm(SymmetricMatrix(sym_part(M)), f).mat().cwiseProduct(G).sum();
      };
      worst = std::max(worst, fd_check(probe, X.mat(), 1e-6, an, PerturbSpace::Symmetric));
    }
    col.add("grad", "vjp_funcm finite differences", worst, worst < 1e-5);
  }
  {  // vjp_chol vs finite differences
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Index n = 2 + (i % 5);
      const SpdMatrix X = rand_spd_cond(rng, n, 25.0);
      Matrix GL = gauss_matrix(rng, n, n, 1.0);
      GL = GL.triangularView<Eigen::Lower>();
      const Matrix an = vjp_chol(chol(X), GL).mat();
      const auto probe = [&](const Matrix& M) {
        return chol(SpdMatrix(sym_part(M))).mat().cwiseProduct(GL).sum();
      };
      worst = std::max(worst, fd_check(probe, X.mat(), 1e-6, an, PerturbSpace::Symmetric));
    }
    col.add("grad", "vjp_chol finite differences", worst, worst < 1e-5);
  }
  {  // lyap_vjp vs finite differences (both cotangents)
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Index n = 2 + (i % 5);
      const SpdMatrix P = rand_spd_cond(rng, n, 100.0);
      const SymmetricMatrix V = sym_gauss(rng, n, 1.0);
      const SymmetricMatrix G = sym_gauss(rng, n, 1.0);
      const SymmetricMatrix X = lyap_solve(P, V);
      const LyapVjp v = lyap_vjp_probe(opts, P, X, G);
      const auto probeV = [&](const Matrix& M) {
        return lyap_solve(P, SymmetricMatrix(sym_part(M))).mat().cwiseProduct(G.mat()).sum();
      };
      worst = std::max(worst, fd_check(probeV, V.mat(), 1e-6, v.dV.mat(),
                                       PerturbSpace::Symmetric));
      const auto probeP = [&](const Matrix& M) {
        return lyap_solve(SpdMatrix(sym_part(M)), V).mat().cwiseProduct(G.mat()).sum();
      };
      worst = std::max(worst, fd_check(probeP, P.mat(), 1e-6, v.dP.mat(),
                                       PerturbSpace::Symmetric));
    }
    col.add("grad", "lyap_vjp finite differences", worst, worst < 1e-5);
  }
  for (Family f : kFamilies) {  // end-to-end loss gradients per family
    const double tol = f == Family::Bwm ? 1e-3 : 1e-4;
    double worst = 0.0;
    int i = 0;
    for (double th : equiv_thetas(f)) {
      for (Index n : {Index(3), Index(5)}) {
        const MetricParams mp = params_for(f, th, i);
        SpdMlrLayer layer;
        layer.mp = mp;
        for (int k = 0; k < 3; ++k) {
          layer.P.push_back(rand_spd_cond(rng, n, 10.0));
          layer.A.push_back(sym_gauss(rng, n, 1.0));
        }
        const SpdMatrix S = rand_spd_cond(rng, n, 10.0);
        const int label = i % 3;
        ++i;
        const auto [loss, g] = grad_spd_mlr(mp, S, layer, label);
        (void)loss;
        const auto loss_at = [&](const SpdMlrLayer& l, const SpdMatrix& s) {
          return softmax_xent(spd_mlr_logits(mp, s, l), label).loss;
        };
        worst = std::max(
            worst, fd_check([&](const Matrix& M) { return loss_at(layer, SpdMatrix(sym_part(M))); },
                            S.mat(), 1e-5, g.dS[0], PerturbSpace::SpdRetraction));
        for (int k = 0; k < 3; ++k) {
          worst = std::max(worst, fd_check(
                                      [&](const Matrix& M) {
                                        SpdMlrLayer l = layer;
                                        l.P[k] = SpdMatrix(sym_part(M));
                                        return loss_at(l, S);
                                      },
                                      layer.P[k].mat(), 1e-5, g.dP[static_cast<std::size_t>(k)][0],
                                      PerturbSpace::SpdRetraction));
          worst = std::max(worst, fd_check(
                                      [&](const Matrix& M) {
                                        SpdMlrLayer l = layer;
                                        l.A[k] = SymmetricMatrix(sym_part(M));
                                        return loss_at(l, S);
                                      },
                                      layer.A[k].mat(), 1e-5, g.dA[static_cast<std::size_t>(k)][0],
                                      PerturbSpace::Symmetric));
        }
      }
    }
    col.add("grad", "loss gradient " + family_name(f), worst, worst < tol);
  }
  {  // end-to-end Lie MLR gradients
    double worst = 0.0;
    for (int i = 0; i < 6; ++i) {
      LieMlrLayer layer;
      layer.blocks = 2;
      for (int k = 0; k < 3; ++k) {
        std::vector<RotationMatrix> ps;
        std::vector<SkewMatrix> as;
        for (int b = 0; b < 2; ++b) {
          Matrix K = skew_gauss(rng, 3, 0.5).mat();
          const double t = std::sqrt(0.5) * K.norm();
          if (t > 1.2) K *= 1.2 / t;
          ps.push_back(so3_exp(SkewMatrix(K)));
          as.push_back(skew_gauss(rng, 3, 1.0));
        }
        layer.P.push_back(std::move(ps));
        layer.A.push_back(std::move(as));
      }
      std::vector<RotationMatrix> S;
      for (int b = 0; b < 2; ++b) {
        Matrix K = skew_gauss(rng, 3, 0.5).mat();
        const double t = std::sqrt(0.5) * K.norm();
        if (t > 1.2) K *= 1.2 / t;
        S.push_back(so3_exp(SkewMatrix(K)));
      }
      const int label = i % 3;
      const auto [loss, g] = grad_lie_mlr(S, layer, label);
      (void)loss;
      const auto loss_at = [&](const LieMlrLayer& l, const std::vector<RotationMatrix>& s) {
        return softmax_xent(lie_mlr_logits(s, l), label).loss;
      };
      for (int b = 0; b < 2; ++b) {
        worst = std::max(worst, fd_check(
                                    [&](const Matrix& M) {
                                      auto s = S;
                                      s[static_cast<std::size_t>(b)] = RotationMatrix(M);
                                      return loss_at(layer, s);
                                    },
                                    S[static_cast<std::size_t>(b)].mat(), 1e-5,
                                    g.dS[static_cast<std::size_t>(b)],
                                    PerturbSpace::RotationRetraction));
      }
      for (int k = 0; k < 3; ++k) {
        for (int b = 0; b < 2; ++b) {
          worst = std::max(worst, fd_check(
                                      [&](const Matrix& M) {
                                        LieMlrLayer l = layer;
                                        l.P[k][b] = RotationMatrix(M);
                                        return loss_at(l, S);
                                      },
                                      layer.P[k][b].mat(), 1e-5,
                                      g.dP[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)],
                                      PerturbSpace::RotationRetraction));
          worst = std::max(worst, fd_check(
                                      [&](const Matrix& M) {
                                        LieMlrLayer l = layer;
                                        l.A[k][b] = SkewMatrix(skew_part(M));
                                        return loss_at(l, S);
                                      },
                                      layer.A[k][b].mat(), 1e-5,
                                      g.dA[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)],
                                      PerturbSpace::Euclidean));
        }
      }
    }
    col.add("grad", "loss gradient lie", worst, worst < 1e-4);
  }
  {  // eigen-gap stress: no NaN/Inf down to gap 1e-8
    bool ok = true;
    for (Family f : kFamilies) {
      const Index n = 4;
      const Matrix U = rand_orth(rng, n);
      Vector sigma(n);
      sigma << 2.0, 1.0 + 1e-8, 1.0, 0.5;
      const SpdMatrix S(sym_part(U * sigma.asDiagonal() * U.transpose()));
      const MetricParams mp = params_for(f, equiv_thetas(f)[0], 0);
      SpdMlrLayer layer;
      layer.mp = mp;
      const Matrix U2 = rand_orth(rng, n);
      for (int k = 0; k < 3; ++k) {
        Vector s2(n);
        s2 << 1.5, 1.5 + 1e-8, 0.8, 0.6;
        s2 *= (1.0 + 0.1 * k);
        layer.P.emplace_back(sym_part(U2 * s2.asDiagonal() * U2.transpose()));
        layer.A.push_back(sym_gauss(rng, n, 1.0));
      }
      const auto [loss, g] = grad_spd_mlr(mp, S, layer, 1);
      ok = ok && std::isfinite(loss) && all_finite(g.dS[0]);
      for (int k = 0; k < 3; ++k) {
        ok = ok && all_finite(g.dP[static_cast<std::size_t>(k)][0]) &&
             all_finite(g.dA[static_cast<std::size_t>(k)][0]);
      }
    }
    col.add("grad", "eigen-gap stress", ok ? 0.0 : 1.0, ok, "gap 1e-8 stays finite");
  }
  {  // tape replay determinism
    bool ok = true;
    const MetricParams mp(Family::Aim, 0.5, 1.0, 0.1);
    SpdMlrLayer layer;
    layer.mp = mp;
    for (int k = 0; k < 3; ++k) {
      layer.P.push_back(rand_spd_cond(rng, 4, 30.0));
      layer.A.push_back(sym_gauss(rng, 4, 1.0));
    }
    const SpdMatrix S = rand_spd_cond(rng, 4, 30.0);
    Tape tape;
    spd_forward(mp, S, layer, 1, tape);
    const GradBundle g1 = spd_backward(tape);
    const GradBundle g2 = spd_backward(tape);
    ok = ok && bit_equal(g1.dS[0], g2.dS[0]);
    for (int k = 0; k < 3; ++k) {
      ok = ok && bit_equal(g1.dP[static_cast<std::size_t>(k)][0],
                           g2.dP[static_cast<std::size_t>(k)][0]) &&
           bit_equal(g1.dA[static_cast<std::size_t>(k)][0],
                     g2.dA[static_cast<std::size_t>(k)][0]);
    }
    col.add("grad", "tape replay determinism", ok ? 0.0 : 1.0, ok, "bit-identical backward");
  }
  return col.report;
}

CheckReport lyap_bp_suite(const CheckOptions& opts) {
  Collector col(opts.seed);
  Rng rng(opts.seed);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Index n = 2 + (i % 5);
    const double cond = std::pow(10.0, i % 5);  // up to 1e4
    const SpdMatrix P = rand_spd_cond(rng, n, std::max(cond, 2.0));
    const SymmetricMatrix V = sym_gauss(rng, n, 1.0);
    const SymmetricMatrix G = sym_gauss(rng, n, 1.0);
    const SymmetricMatrix X = lyap_solve(P, V);
    const LyapVjp v = lyap_vjp_probe(opts, P, X, G);
    const auto probeV = [&](const Matrix& M) {
      return lyap_solve(P, SymmetricMatrix(sym_part(M))).mat().cwiseProduct(G.mat()).sum();
    };
    worst =
        std::max(worst, fd_check(probeV, V.mat(), 1e-6, v.dV.mat(), PerturbSpace::Symmetric));
    const auto probeP = [&](const Matrix& M) {
      return lyap_solve(SpdMatrix(sym_part(M)), V).mat().cwiseProduct(G.mat()).sum();
    };
    worst =
        std::max(worst, fd_check(probeP, P.mat(), 1e-6, v.dP.mat(), PerturbSpace::Symmetric));
  }
  col.add("symlin", "lyap_vjp conditioned finite differences", worst, worst < 1e-5,
          "condition numbers up to 1e4");
  return col.report;
}

CheckReport run_suite(const std::string& tag, const CheckOptions& opts) {
  CheckReport report;
  if (tag == "geometry") {
    report = geometry_suite(opts);
  } else if (tag == "limits") {
    report = limits_suite(opts);
  } else if (tag == "equivalence") {
    report = closedform_suite(opts);
    report.merge(margin_suite(opts));
  } else if (tag == "gradients") {
    report = gradients_suite(opts);
    report.merge(lyap_bp_suite(opts));
  } else if (tag == "all") {
    report = geometry_suite(opts);
    report.merge(limits_suite(opts));
    report.merge(closedform_suite(opts));
    report.merge(margin_suite(opts));
    report.merge(gradients_suite(opts));
    report.merge(lyap_bp_suite(opts));
  } else {
    throw UsageError("unknown suite: " + tag +
                     " (expected geometry|gradients|equivalence|limits|all)");
  }
  return report;
}

void print_report(const CheckReport& report, std::ostream& out) {
  for (const auto& r : report.results) {
    out << (r.pass ? "[PASS] " : "[FAIL] ") << "module=" << r.module << " invariant=\""
        << r.invariant << "\" seed=" << r.seed << " worst=" << r.worst;
    if (!r.note.empty()) out << " (" << r.note << ")";
    out << '\n';
  }
  out << (report.all_pass() ? "ALL CHECKS PASSED" : "CHECK FAILURES PRESENT") << '\n';
}

}  // namespace geomlr
