#pragma once

#include <string>

#include "geomlr/symlin.hpp"
#include "geomlr/types.hpp"

namespace geomlr {

enum class Family { Lem, Aim, Em, Lcm, Bwm };

std::string family_name(Family f);
Family parse_family(const std::string& name);

struct MetricParams {
  Family family = Family::Lem;
  double theta = 1.0;
  double alpha = 1.0;
  double beta = 0.0;

  MetricParams() = default;
  MetricParams(Family f, double theta_in, double alpha_in = 1.0, double beta_in = 0.0);

  // Deformation power applied to points: theta, except 2*theta for BWM.
  double power() const { return family == Family::Bwm ? 2.0 * theta : theta; }

  // min(alpha, alpha + n*beta) > 0 for the families that carry (alpha, beta).
  void require_ab(Index n) const;
};

struct TangentAt {
  SpdMatrix base;
  SymmetricMatrix vec;
};

double oi_inner(const SymmetricMatrix& V, const SymmetricMatrix& W, double alpha, double beta);

double metric(const MetricParams& mp, const SpdMatrix& P, const SymmetricMatrix& V,
              const SymmetricMatrix& W);

SymmetricMatrix rielog(const MetricParams& mp, const SpdMatrix& P, const SpdMatrix& Q);

SpdMatrix riexp_aim(const SpdMatrix& P, const SymmetricMatrix& V);

SymmetricMatrix ptransport(const MetricParams& mp, const SpdMatrix& P, const SpdMatrix& Q,
                           const SymmetricMatrix& V);

SpdMatrix chol_group_op(const SpdMatrix& S1, const SpdMatrix& S2);

}  // namespace geomlr
