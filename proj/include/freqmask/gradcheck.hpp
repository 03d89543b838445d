#pragma once

// Analytic vs. central-difference gradients of the identity loss (w.r.t. both
// feature taps) and of the full training loss (w.r.t. backbone weights).

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "freqmask/backbone.hpp"
#include "freqmask/disentangle.hpp"
#include "freqmask/rng.hpp"

namespace freqmask {

// max|a - n| / max(max|a|, max|n|); 0 when both are identically zero.
inline double relative_error(const Tensor& analytic, const Tensor& numeric) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

// Central differences of a scalar function of `x`, perturbing x in place.
template <typename Loss>
Tensor numeric_gradient(Loss&& loss, Tensor& x, double h) {
  Tensor g(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = loss();
    x[i] = orig - h;
    const double down = loss();
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

struct GradcheckOptions {
  double lambda_mask = 0.1;
  double step = 1e-5;
  std::size_t frames = 4;
  std::size_t mid_channels = 2;
  std::size_t mid_size = 6;
  std::size_t pen_channels = 3;
  std::size_t pen_size = 3;
  std::size_t clip_size = 8;
  BackboneShape backbone{1, 2, 3, 3, 4};
  // Test hook: analytic gradients are scaled by (1 + fault).
  double fault = 0.0;
};

struct GradcheckReport {
  double x_p = 0.0;
  double x_mid = 0.0;
  double weights = 0.0;

  double worst() const { return std::max({x_p, x_mid, weights}); }
  bool passed(double tol = 1e-4) const { return worst() < tol; }
};

inline Tensor random_tensor(Rng& rng, Shape dims) {
  Tensor t(std::move(dims));
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

inline GradcheckReport run_gradcheck(std::uint64_t seed, const GradcheckOptions& opt = {}) {
  Rng rng(seed);
  const LossConfig cfg{opt.lambda_mask, true, false};
  GradcheckReport report;

  // Identity loss w.r.t. both taps.
  Tensor x_mid = random_tensor(rng, {opt.frames, opt.mid_channels, opt.mid_size, opt.mid_size});
  Tensor x_p = random_tensor(rng, {opt.frames, opt.pen_channels, opt.pen_size, opt.pen_size});
  {
    Tape tape;
    const Var vm = tape.variable(x_mid);
    const Var vp = tape.variable(x_p);
    const Gradients g = tape.backward(identity_loss(vm, vp, cfg));
    auto loss = [&] {
      Tape t;
      return identity_loss(t.constant(x_mid), t.constant(x_p), cfg).value()[0];
    };
    report.x_mid = relative_error(ops::scale(g[vm], 1.0 + opt.fault),
                                  numeric_gradient(loss, x_mid, opt.step));
    report.x_p = relative_error(ops::scale(g[vp], 1.0 + opt.fault),
                                numeric_gradient(loss, x_p, opt.step));
  }

  // Cross-entropy + identity loss through the backbone, w.r.t. every weight.
  ToyBackbone net(opt.backbone, seed);
  const Tensor clip =
      random_tensor(rng, {opt.frames, opt.backbone.in_channels, opt.clip_size, opt.clip_size});
  const std::size_t label = rng.index(opt.backbone.num_classes);
  auto full_loss = [&](Tape& t, const std::vector<Var>& params) {
    const auto taps = net.forward(params, t.constant(clip));
    return total_loss(taps.logits, label, taps.mid, taps.penultimate, cfg);
  };
  Tape tape;
  const auto vars = net.bind(tape);
  const Gradients g = tape.backward(full_loss(tape, vars));
  for (std::size_t p = 0; p < vars.size(); ++p) {
    auto loss = [&] {
      Tape t;
      return full_loss(t, net.bind_constant(t)).value()[0];
    };
    const Tensor numeric = numeric_gradient(loss, net.parameters()[p], opt.step);
    report.weights = std::max(
        report.weights, relative_error(ops::scale(g[vars[p]], 1.0 + opt.fault), numeric));
  }
  return report;
}

}  // namespace freqmask
