#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "geomlr/dataset.hpp"
#include "geomlr/grad.hpp"

namespace geomlr {

struct CheckOptions {
  std::uint64_t seed = 12345;
  // Test fixture: flips the sign of lyap_vjp's dP inside the suites so the
  // mutation is caught and reported by name.
  bool fault_lyap_vjp_sign = false;
};

struct CheckResult {
  std::string module;
  std::string invariant;
  std::uint64_t seed = 0;
  double worst = 0.0;
  bool pass = false;
  std::string note;
};

struct CheckReport {
  std::vector<CheckResult> results;
  bool all_pass() const;
  void merge(const CheckReport& other);
};

// Round trips, zero laws, transport isometry, O(n)-invariance, Cholesky
// group axioms, rotation log/exp, metric bi-invariance.
CheckReport geometry_suite(const CheckOptions& opts);

// Deformation limits: EM -> LEM and BWM -> quarter-LEM as theta -> 0,
// monotone over {1e-2, 1e-3, 1e-4} and below 1e-3 at the smallest.
CheckReport limits_suite(const CheckOptions& opts);

// Closed-form scores vs generic pipeline, Euclidean reduction, margin
// consistency, alpha-scaling decision invariance, Lie path equality.
CheckReport closedform_suite(const CheckOptions& opts);

// Closed-form margin vs sampled infimum over a hyperplane grid.
CheckReport margin_suite(const CheckOptions& opts);

// Primitive VJPs and end-to-end loss gradients against finite differences;
// eigen-gap stress; tape replay determinism.
CheckReport gradients_suite(const CheckOptions& opts);

// lyap_vjp vs finite differences across condition numbers up to 1e4.
CheckReport lyap_bp_suite(const CheckOptions& opts);

// tag in {geometry, gradients, equivalence, limits, all}; equivalence runs
// closedform + margin, gradients runs gradients + lyap_bp.
CheckReport run_suite(const std::string& tag, const CheckOptions& opts);

void print_report(const CheckReport& report, std::ostream& out);

}  // namespace geomlr
