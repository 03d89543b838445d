#pragma once

// Three-block 3D CNN with a mid-level tap (after block 2) and a penultimate
// tap (after block 3), followed by global average pooling and a linear head.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "freqmask/autodiff.hpp"
#include "freqmask/rng.hpp"

namespace freqmask {

struct BackboneShape {
  std::size_t in_channels = 1;
  std::size_t c1 = 8;
  std::size_t c2 = 16;
  std::size_t c3 = 16;
  std::size_t num_classes = 4;

  friend bool operator==(const BackboneShape&, const BackboneShape&) = default;
};

struct BackboneTaps {
  Var level1;       // [T, c1, H, W]
  Var mid;          // [T, c2, H/2, W/2]
  Var penultimate;  // [T, c3, H/4, W/4]
  Var logits;       // [num_classes]
};

class ToyBackbone {
 public:
  static constexpr std::size_t kKernel = 3;

  ToyBackbone(BackboneShape shape, std::uint64_t seed) : shape_(shape) {
    Rng rng(seed);
    auto conv = [&](std::size_t out, std::size_t in) {
      Tensor w(Shape{out, in, kKernel, kKernel, kKernel});
      const double fan_in = static_cast<double>(in * kKernel * kKernel * kKernel);
      const double a = std::sqrt(6.0 / fan_in);
      for (auto& v : w.values()) v = rng.uniform(-a, a);
      params_.push_back(std::move(w));
      params_.emplace_back(Shape{out, 1, 1}, 0.0);
    };
    conv(shape.c1, shape.in_channels);
    conv(shape.c2, shape.c1);
    conv(shape.c3, shape.c2);
    Tensor head(Shape{shape.num_classes, shape.c3});
    const double a = std::sqrt(6.0 / static_cast<double>(shape.num_classes + shape.c3));
    for (auto& v : head.values()) v = rng.uniform(-a, a);
    params_.push_back(std::move(head));
    params_.emplace_back(Shape{shape.num_classes}, 0.0);
  }

  const BackboneShape& shape() const noexcept { return shape_; }
  std::vector<Tensor>& parameters() noexcept { return params_; }
  const std::vector<Tensor>& parameters() const noexcept { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  // Registers every parameter as a differentiable leaf on `tape`.
  std::vector<Var> bind(Tape& tape) const {
    std::vector<Var> vars;
    vars.reserve(params_.size());
    for (const auto& p : params_) vars.push_back(tape.variable(p));
    return vars;
  }

  // Parameters as constants, for inference.
  std::vector<Var> bind_constant(Tape& tape) const {
    std::vector<Var> vars;
    for (const auto& p : params_) vars.push_back(tape.constant(p));
    return vars;
  }

  static Var block(const Var& x, const Var& w, const Var& b, std::size_t spatial_stride) {
    ops::Conv3dParams p;
    p.stride = {1, spatial_stride, spatial_stride};
    p.padding = {1, 1, 1};
    return tanh(conv3d(x, w, p) + b);
  }

  Var level1(const std::vector<Var>& params, const Var& clip) const {
    check_clip(clip.dims());
    return block(clip, params[0], params[1], 1);
  }

  BackboneTaps forward(const std::vector<Var>& params, const Var& clip) const {
    BackboneTaps taps;
    taps.level1 = level1(params, clip);
    taps.mid = block(taps.level1, params[2], params[3], 2);
    taps.penultimate = block(taps.mid, params[4], params[5], 2);
    // global average pool over (T, H, W) -> [c3]
    const Var pooled = mean_axis(mean_axis(mean_axis(taps.penultimate, 3), 2), 0);
    taps.logits = sum_axis(params[6] * pooled, 1) + params[7];
    return taps;
  }

  // Softmax class probabilities for one clip.
  Tensor predict(const Tensor& clip) const {
    Tape tape;
    const auto params = bind_constant(tape);
    return softmax(forward(params, tape.constant(clip)).logits.value());
  }

 private:
  void check_clip(const Shape& d) const {
    if (d.size() != 4 || d[1] != shape_.in_channels) {
      throw ShapeError("backbone expects a [T," + std::to_string(shape_.in_channels) +
                       ",H,W] clip, got " + to_string(d));
    }
  }

  BackboneShape shape_;
  std::vector<Tensor> params_;  // w1 b1 w2 b2 w3 b3 head_w head_b
};

}  // namespace freqmask
