#include "geomlr/optim.hpp"

#include <cmath>

#include "geomlr/songeo.hpp"

namespace geomlr {

void OptConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("OptConfig: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw DomainError("OptConfig: momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw DomainError("OptConfig: weight_decay must be >= 0");
  if (!(grad_clip >= 0.0)) throw DomainError("OptConfig: grad_clip must be >= 0");
}

SymmetricMatrix riem_grad_spd(const SpdMatrix& P, const SymmetricMatrix& G_ambient) {
  if (P.n() != G_ambient.n()) throw DimensionError("riem_grad_spd: dimension mismatch");
  return SymmetricMatrix(sym_part(P.mat() * G_ambient.mat() * P.mat()));
}

namespace {

[[noreturn]] void diverged(const ParamSlot& slot) {
  throw DivergenceError("optimizer diverged at slot " + slot.name);
}

}  // namespace

void step(ParamSlot& slot, const Matrix& grad, const OptConfig& cfg) {
  cfg.validate();
  if (grad.rows() != slot.value.rows() || grad.cols() != slot.value.cols()) {
    throw DimensionError("step: gradient shape mismatch for slot " + slot.name);
  }
  if (!all_finite(grad)) diverged(slot);
  if (cfg.lr == 0.0) return;

  switch (slot.kind) {
    case SlotKind::SpdAim: {
      const SpdMatrix P(slot.value);
      const SymmetricMatrix rg = riem_grad_spd(P, SymmetricMatrix(sym_part(grad)));
      const Matrix mnew = cfg.momentum * slot.momentum + rg.mat();
      const Matrix upd = -cfg.lr * mnew;
      if (!all_finite(upd)) diverged(slot);
      if (upd.norm() == 0.0) {
        slot.momentum = mnew;
        return;
      }
      const SpdMatrix Pnew = riexp_aim(P, SymmetricMatrix(sym_part(upd)));
      if (!all_finite(Pnew.mat())) diverged(slot);
      const SpdMatrix Pinv(funcm(P, fn::pow(-1.0)).mat());
      const ProdSqrt ps = prod_sqrt(Pnew, Pinv);
      slot.momentum = sym_part(ps.ba * mnew * ps.ab);
      slot.value = Pnew.mat();
      break;
    }
    case SlotKind::Rotation: {
      const RotationMatrix R(slot.value);
      const Matrix mnew = cfg.momentum * slot.momentum + skew_part(grad);
      const Matrix upd = -cfg.lr * mnew;
      if (!all_finite(upd)) diverged(slot);
      slot.momentum = mnew;
      if (upd.norm() == 0.0) return;
      const RotationMatrix Rnew = so_retract(R, SkewMatrix(upd));
      if (!all_finite(Rnew.mat())) diverged(slot);
      slot.value = Rnew.mat();
      break;
    }
    case SlotKind::Euclidean: {
      Matrix g = grad;
      if (cfg.weight_decay != 0.0) g += cfg.weight_decay * slot.value;
      const Matrix mnew = cfg.momentum * slot.momentum + g;
      slot.momentum = mnew;
      slot.value -= cfg.lr * mnew;
      if (!all_finite(slot.value)) diverged(slot);
      break;
    }
  }
}

GradBundle clip_grads(const GradBundle& bundle, double max_norm) {
  if (!(max_norm > 0.0)) throw DomainError("clip_grads: max_norm must be > 0");
  GradBundle out = bundle;
  const double n = out.norm();
  if (n > max_norm) out.scale(max_norm / n);
  return out;
}

}  // namespace geomlr
