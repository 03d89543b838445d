#pragma once

// Static/dynamic frequency saliency masks over [T, C, H, W] feature volumes.
//
//   dynamic[c,h,w] = sum_k |X_k[c,h,w]|^2 * f_k^2
//   static [c,h,w] = sum_k |X_k[c,h,w]|^2 / (1 + f_k^2)
//   combined       = dynamic + static, optionally divided by (mean + 1e-8)
//
// X is the unnormalized temporal DFT and f_k = min(k, T-k)/T. Every mask has
// a tape form (differentiable w.r.t. the features) and a plain form.

#include "freqmask/autodiff.hpp"
#include "freqmask/spectral.hpp"
#include "freqmask/tensor.hpp"

namespace freqmask {

inline constexpr double kMaskNormEpsilon = 1e-8;

enum class MaskKind { Dynamic, Static, Combined };

inline const char* to_string(MaskKind k) {
  switch (k) {
    case MaskKind::Dynamic: return "dynamic";
    case MaskKind::Static: return "static";
    case MaskKind::Combined: return "combined";
  }
  return "?";
}

struct SaliencyMap {
  Tensor values;  // [C,H,W] or channel-collapsed [H,W]; non-negative
  MaskKind kind = MaskKind::Combined;
  bool normalized = false;
};

namespace detail {

// Per-bin weights shaped [T,1,...,1] to broadcast against a volume of `dims`.
inline Tensor bin_weights(const Shape& dims, MaskKind kind) {
  const auto f = frequency_vector(static_cast<long>(dims[0]));
  Shape wd(dims.size(), 1);
  wd[0] = dims[0];
  Tensor f2(wd);
  for (std::size_t k = 0; k < dims[0]; ++k) f2[k] = f.values[k] * f.values[k];
  return kind == MaskKind::Dynamic ? f2 : ops::shifted_reciprocal(f2);
}

inline void check_volume(const Shape& dims, const char* who) {
  if (dims.size() != 4) {
    throw ShapeError(std::string(who) + " expects a [T,C,H,W] volume, got " + to_string(dims));
  }
}

inline Var weighted_power(const Var& power, MaskKind kind) {
  const Var w = power.tape()->constant(bin_weights(power.dims(), kind));
  return sum_axis(power * w, 0);
}

}  // namespace detail

inline Var spectral_power(const Var& x) {
  const auto [re, im] = temporal_dft(x);
  return square(re) + square(im);
}

inline Var dynamic_mask(const Var& x) {
  detail::check_volume(x.dims(), "dynamic_mask");
  return detail::weighted_power(spectral_power(x), MaskKind::Dynamic);
}

inline Var static_mask(const Var& x) {
  detail::check_volume(x.dims(), "static_mask");
  return detail::weighted_power(spectral_power(x), MaskKind::Static);
}

inline Var normalize_mean(const Var& m) {
  const Var denom = mean(m) + m.tape()->constant(Tensor::scalar(kMaskNormEpsilon));
  return m / denom;
}

inline Var combined_mask(const Var& x, bool normalize = true) {
  detail::check_volume(x.dims(), "combined_mask");
  const Var p = spectral_power(x);
  const Var m = detail::weighted_power(p, MaskKind::Dynamic) +
                detail::weighted_power(p, MaskKind::Static);
  return normalize ? normalize_mean(m) : m;
}

// Broadcast product of a mask over the time (and collapsed channel) axes.
inline Var apply_mask(const Var& m, const Var& x) {
  if (broadcast_shapes(m.dims(), x.dims()) != x.dims()) {
    throw ShapeError("mask " + to_string(m.dims()) + " cannot be applied to features " +
                     to_string(x.dims()));
  }
  return m * x;
}

// --- plain forms ----------------------------------------------------------

inline SaliencyMap dynamic_mask(const Tensor& x) {
  Tape tape;
  return {dynamic_mask(tape.constant(x)).value(), MaskKind::Dynamic, false};
}

inline SaliencyMap static_mask(const Tensor& x) {
  Tape tape;
  return {static_mask(tape.constant(x)).value(), MaskKind::Static, false};
}

inline SaliencyMap combined_mask(const Tensor& x, bool normalize = true) {
  Tape tape;
  return {combined_mask(tape.constant(x), normalize).value(), MaskKind::Combined, normalize};
}

inline Tensor apply_mask(const SaliencyMap& m, const Tensor& x) {
  if (broadcast_shapes(m.values.dims(), x.dims()) != x.dims()) {
    throw ShapeError("mask " + to_string(m.values.dims()) + " cannot be applied to features " +
                     to_string(x.dims()));
  }
  return ops::mul(m.values, x);
}

}  // namespace freqmask
