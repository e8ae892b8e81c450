#pragma once

#include <string>

#include "geomlr/grad.hpp"

namespace geomlr {

enum class SlotKind { SpdAim, Rotation, Euclidean };

// One optimizable parameter. SpdAim values retract with riexp_aim and carry a
// parallel-transported symmetric momentum buffer; Rotation values retract with
// so_retract and carry the momentum in the algebra (skew); Euclidean values do
// plain SGD.
struct ParamSlot {
  SlotKind kind = SlotKind::Euclidean;
  std::string name;
  Matrix value;
  Matrix momentum;

  ParamSlot() = default;
  ParamSlot(SlotKind k, std::string slot_name, Matrix v)
      : kind(k), name(std::move(slot_name)), value(std::move(v)),
        momentum(Matrix::Zero(value.rows(), value.cols())) {}
};

struct OptConfig {
  double lr = 1e-2;
  double momentum = 0.0;
  double weight_decay = 0.0;  // Euclidean slots only
  double grad_clip = 0.0;     // 0 disables clipping

  void validate() const;
};

// Euclidean-to-Riemannian gradient conversion for the affine-invariant
// parameter metric: grad = P sym(G) P.
SymmetricMatrix riem_grad_spd(const SpdMatrix& P, const SymmetricMatrix& G_ambient);

// One SGD(+momentum) update in place. For SpdAim slots grad is the ambient
// symmetric Euclidean gradient; for Rotation slots it is the algebra (skew)
// gradient; Euclidean slots take the plain gradient. lr == 0 leaves the slot
// bit-identical.
void step(ParamSlot& slot, const Matrix& grad, const OptConfig& cfg);

// Joint Frobenius norm over every component; scales all of them by
// max_norm / norm when the norm exceeds max_norm.
GradBundle clip_grads(const GradBundle& bundle, double max_norm);

}  // namespace geomlr
