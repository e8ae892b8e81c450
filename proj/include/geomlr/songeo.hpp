#pragma once

#include "geomlr/rng.hpp"
#include "geomlr/types.hpp"

namespace geomlr {

// Angles within eps_pi of pi raise BranchError instead of silently picking one
// of the two antipodal logarithms.
inline constexpr double eps_pi = 1e-6;

double euler_angle(const RotationMatrix& R);
Vector euler_axis(const RotationMatrix& R);

SkewMatrix so3_log(const RotationMatrix& R);
RotationMatrix so3_exp(const SkewMatrix& A);

SkewMatrix so_log(const RotationMatrix& R, const RotationMatrix& S);

SkewMatrix so_project(const RotationMatrix& R, const Matrix& U);
RotationMatrix so_retract(const RotationMatrix& R, const SkewMatrix& A);

// Sign-fixed QR orthonormalization with a final-column flip if det < 0.
RotationMatrix orthonormalize_det1(const Matrix& M);
RotationMatrix random_rotation(Rng& rng, Index n);

}  // namespace geomlr
