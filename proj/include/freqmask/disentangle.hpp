#pragma once

// Identity disentanglement loss:
//   L_mask = lambda * mean((x_p - M(x_mid) * x_p)^2)
// M is the combined mask of the mid-level volume, collapsed over channels by
// mean and bilinearly resized to the penultimate spatial grid. Gradients flow
// into x_p directly and into x_mid through M.

#include <string>

#include "freqmask/autodiff.hpp"
#include "freqmask/masks.hpp"

namespace freqmask {

struct LossConfig {
  double lambda_mask = 0.1;
  bool normalize_mask = true;
  // Ablation only: treat M as a constant.
  bool stop_mask_gradient = false;

  void validate() const {
    if (!(lambda_mask >= 0.0)) {
      throw ConfigError("lambda_mask must be >= 0, got " + std::to_string(lambda_mask));
    }
  }
};

inline void check_target(const Shape& target) {
  if (target.size() != 3) {
    throw ShapeError("transfer target must be [C,H,W], got " + to_string(target));
  }
}

// [C,H,W] (or [H,W]) -> [H_t,W_t], broadcastable over channels and time.
inline Var transfer_mask(const Var& m, const Shape& target) {
  check_target(target);
  Var collapsed = m;
  if (m.dims().size() == 3) {
    collapsed = mean_axis(m, 0);
  } else if (m.dims().size() != 2) {
    throw ShapeError("transfer_mask expects [C,H,W] or [H,W], got " + to_string(m.dims()));
  }
  return resize_bilinear(collapsed, static_cast<long>(target[1]), static_cast<long>(target[2]));
}

inline SaliencyMap transfer_mask(const SaliencyMap& m, const Shape& target) {
  Tape tape;
  return {transfer_mask(tape.constant(m.values), target).value(), m.kind, m.normalized};
}

inline Var identity_loss(const Var& x_mid, const Var& x_p, const LossConfig& cfg) {
  cfg.validate();
  if (x_p.dims().size() != 4) {
    throw ShapeError("identity_loss expects x_p as [T,C,H,W], got " + to_string(x_p.dims()));
  }
  Var m = combined_mask(x_mid, cfg.normalize_mask);
  if (cfg.stop_mask_gradient) m = stop_gradient(m);
  const Shape& pd = x_p.dims();
  const Var mt = transfer_mask(m, {pd[1], pd[2], pd[3]});
  const Var residual = x_p - apply_mask(mt, x_p);
  return scale(mean(square(residual)), cfg.lambda_mask);
}

struct LossTerms {
  Var total;
  Var cross_entropy;
  Var mask;
};

inline LossTerms total_loss_terms(const Var& logits, std::size_t label, const Var& x_mid,
                                  const Var& x_p, const LossConfig& cfg) {
  const Var ce = cross_entropy(logits, label);
  const Var lm = identity_loss(x_mid, x_p, cfg);
  return {ce + lm, ce, lm};
}

inline Var total_loss(const Var& logits, std::size_t label, const Var& x_mid, const Var& x_p,
                      const LossConfig& cfg) {
  return total_loss_terms(logits, label, x_mid, x_p, cfg).total;
}

}  // namespace freqmask
