#pragma once

// Reverse-mode differentiation tape. A Tape owns a topologically ordered list
// of nodes; every op appends one node whose inputs precede it. Forward values
// are saved eagerly. A Tape is not thread-safe; use one per execution context.

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "freqmask/ops.hpp"
#include "freqmask/spectral.hpp"
#include "freqmask/tensor.hpp"

namespace freqmask {

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& dims() const { return value().dims(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients of one backward pass, keyed by node.
class Gradients {
 public:
  // Zero tensor of the node's shape when the node was not reached.
  Tensor operator[](const Var& v) const {
    if (v.id() < grads_.size() && grads_[v.id()]) return *grads_[v.id()];
    return Tensor(v.dims(), 0.0);
  }
  bool reached(const Var& v) const {
    return v.id() < grads_.size() && grads_[v.id()].has_value();
  }

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
};

class Tape {
 public:
  using GradSlots = std::vector<std::optional<Tensor>>;
  // Fills out[i] with d(loss)/d(input i) for each i with needs[i] set.
  using BackwardFn =
      std::function<void(const Tensor& grad, const std::vector<bool>& needs, GradSlots& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Tensor value) { return push(std::move(value), {}, nullptr, true); }
  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false); }

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_[i].requires_grad;
    if (!needs) fn = nullptr;
    return push(std::move(value), std::move(inputs), std::move(fn), needs);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  Gradients backward(const Var& loss) const {
    if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
    if (loss.value().size() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " +
                          to_string(loss.dims()));
    }
    Gradients result;
    auto& grads = result.grads_;
    grads.assign(loss.id() + 1, std::nullopt);
    grads[loss.id()] = Tensor(loss.dims(), 1.0);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      const Node& node = nodes_[id];
      if (!grads[id] || !node.backward) continue;
      std::vector<bool> needs(node.inputs.size());
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        needs[i] = nodes_[node.inputs[i]].requires_grad;
      }
      GradSlots slots(node.inputs.size());
      node.backward(*grads[id], needs, slots);
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        if (!needs[i] || !slots[i]) continue;
        auto& dst = grads[node.inputs[i]];
        if (!dst) {
          dst = std::move(*slots[i]);
        } else {
          auto& acc = *dst;
          const auto& add = *slots[i];
          for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += add[e];
        }
      }
    }
    return result;
  }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad;
  };

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(fn), requires_grad});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

namespace detail {

inline Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || !a.valid()) {
    throw ContractError("operands live on different tapes");
  }
  return *a.tape();
}

}  // namespace detail

// --- elementwise ----------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape(a, b);
  const Shape da = a.dims();
  const Shape db = b.dims();
  return tape.record(ops::add(a.value(), b.value()), {a.id(), b.id()},
                     [da, db](const Tensor& g, const std::vector<bool>& needs, Tape::GradSlots& out) {
                       if (needs[0]) out[0] = ops::unbroadcast(g, da);
                       if (needs[1]) out[1] = ops::unbroadcast(g, db);
                     });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape(a, b);
  const Shape da = a.dims();
  const Shape db = b.dims();
  return tape.record(ops::sub(a.value(), b.value()), {a.id(), b.id()},
                     [da, db](const Tensor& g, const std::vector<bool>& needs, Tape::GradSlots& out) {
                       if (needs[0]) out[0] = ops::unbroadcast(g, da);
                       if (needs[1]) out[1] = ops::unbroadcast(ops::scale(g, -1.0), db);
                     });
}

inline Var mul(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape(a, b);
  const Tensor av = a.value();
  const Tensor bv = b.value();
  return tape.record(ops::mul(av, bv), {a.id(), b.id()},
                     [av, bv](const Tensor& g, const std::vector<bool>& needs, Tape::GradSlots& out) {
                       if (needs[0]) out[0] = ops::unbroadcast(ops::mul(g, bv), av.dims());
                       if (needs[1]) out[1] = ops::unbroadcast(ops::mul(g, av), bv.dims());
                     });
}

inline Var div(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape(a, b);
  const Tensor av = a.value();
  const Tensor bv = b.value();
  Tensor q = ops::div(av, bv);
  return tape.record(std::move(q), {a.id(), b.id()},
                     [av, bv](const Tensor& g, const std::vector<bool>& needs, Tape::GradSlots& out) {
                       if (needs[0]) out[0] = ops::unbroadcast(ops::div(g, bv), av.dims());
                       if (needs[1]) {
                         // d(a/b)/db = -a / b^2
                         const Tensor t = ops::broadcast_binary(
                             av, bv, [](double x, double y) { return -x / (y * y); });
                         out[1] = ops::unbroadcast(ops::mul(g, t), bv.dims());
                       }
                     });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

inline Var square(const Var& a) {
  const Tensor av = a.value();
  return a.tape()->record(ops::square(av), {a.id()},
                          [av](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = ops::broadcast_binary(
                                g, av, [](double gi, double x) { return 2.0 * x * gi; });
                          });
}

inline Var scale(const Var& a, double s) {
  return a.tape()->record(ops::scale(a.value(), s), {a.id()},
                          [s](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = ops::scale(g, s);
                          });
}

// 1 / (1 + x) with gradient -1 / (1 + x)^2.
inline Var shifted_reciprocal(const Var& a) {
  Tensor y = ops::shifted_reciprocal(a.value());
  const Tensor yv = y;
  return a.tape()->record(std::move(y), {a.id()},
                          [yv](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = ops::broadcast_binary(
                                g, yv, [](double gi, double r) { return -r * r * gi; });
                          });
}

inline Var tanh(const Var& a) {
  Tensor y = ops::map(a.value(), [](double x) { return std::tanh(x); });
  const Tensor yv = y;
  return a.tape()->record(std::move(y), {a.id()},
                          [yv](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = ops::broadcast_binary(
                                g, yv, [](double gi, double t) { return (1.0 - t * t) * gi; });
                          });
}

// Forward identity; blocks gradient flow.
inline Var stop_gradient(const Var& a) { return a.tape()->constant(a.value()); }

inline Var reshape(const Var& a, Shape dims) {
  const Shape orig = a.dims();
  return a.tape()->record(a.value().reshaped(std::move(dims)), {a.id()},
                          [orig](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = g.reshaped(orig);
                          });
}

// --- reductions -----------------------------------------------------------

inline Var sum(const Var& a) {
  const Shape da = a.dims();
  return a.tape()->record(Tensor::scalar(ops::sum_all(a.value())), {a.id()},
                          [da](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = Tensor(da, g[0]);
                          });
}

inline Var mean(const Var& a) {
  const Shape da = a.dims();
  const double n = static_cast<double>(a.value().size());
  return a.tape()->record(Tensor::scalar(ops::sum_all(a.value()) / n), {a.id()},
                          [da, n](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = Tensor(da, g[0] / n);
                          });
}

inline Var sum_axis(const Var& a, std::size_t axis) {
  const Shape da = a.dims();
  return a.tape()->record(ops::sum_axis(a.value(), axis), {a.id()},
                          [da, axis](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = ops::expand_axis(g, da, axis);
                          });
}

inline Var mean_axis(const Var& a, std::size_t axis) {
  const double n = static_cast<double>(a.value().dim(axis));
  return scale(sum_axis(a, axis), 1.0 / n);
}

// --- spatial / convolution ------------------------------------------------

inline Var resize_bilinear(const Var& a, long out_h, long out_w) {
  const Shape da = a.dims();
  Tensor y = ops::resize_bilinear(a.value(), out_h, out_w);
  return a.tape()->record(std::move(y), {a.id()},
                          [da](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                            out[0] = ops::resize_bilinear_adjoint(g, da[0], da[1]);
                          });
}

inline Var conv3d(const Var& input, const Var& kernel, const ops::Conv3dParams& p = {}) {
  Tape& tape = detail::same_tape(input, kernel);
  const Tensor in = input.value();
  const Tensor k = kernel.value();
  return tape.record(ops::conv3d(in, k, p), {input.id(), kernel.id()},
                     [in, k, p](const Tensor& g, const std::vector<bool>& needs, Tape::GradSlots& out) {
                       if (needs[0]) out[0] = ops::conv3d_grad_input(g, in.dims(), k, p);
                       if (needs[1]) out[1] = ops::conv3d_grad_kernel(g, in, k.dims(), p);
                     });
}

// --- spectral -------------------------------------------------------------

struct SpectrumVars {
  Var re;
  Var im;
};

// Temporal DFT as two real-valued nodes. Both real and imaginary parts are
// symmetric linear maps of x, so their adjoints are the same transform
// applied to the incoming gradient.
inline SpectrumVars temporal_dft(const Var& x) {
  const Spectrum s = temporal_dft(x.value());
  Tensor re(x.dims());
  Tensor im(x.dims());
  for (std::size_t i = 0; i < re.size(); ++i) {
    re[i] = s.bins[i].real();
    im[i] = s.bins[i].imag();
  }
  Tape& tape = *x.tape();
  Var vre = tape.record(std::move(re), {x.id()},
                        [](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                          const Spectrum gs = temporal_dft(g);
                          Tensor r(g.dims());
                          for (std::size_t i = 0; i < r.size(); ++i) r[i] = gs.bins[i].real();
                          out[0] = std::move(r);
                        });
  Var vim = tape.record(std::move(im), {x.id()},
                        [](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
                          const Spectrum gs = temporal_dft(g);
                          Tensor r(g.dims());
                          for (std::size_t i = 0; i < r.size(); ++i) r[i] = gs.bins[i].imag();
                          out[0] = std::move(r);
                        });
  return {vre, vim};
}

// --- classification -------------------------------------------------------

inline Tensor softmax(const Tensor& logits) {
  double mx = logits[0];
  for (double v : logits.values()) mx = std::max(mx, v);
  Tensor p(logits.dims());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] /= z;
  return p;
}

// -log softmax(logits)[label]
inline Var cross_entropy(const Var& logits, std::size_t label) {
  const Tensor& lv = logits.value();
  if (label >= lv.size()) {
    throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(lv.size()) + " classes");
  }
  double mx = lv[0];
  for (double v : lv.values()) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : lv.values()) z += std::exp(v - mx);
  const double loss = std::log(z) + mx - lv[label];
  Tensor p = softmax(lv);
  return logits.tape()->record(
      Tensor::scalar(loss), {logits.id()},
      [p, label](const Tensor& g, const std::vector<bool>&, Tape::GradSlots& out) {
        Tensor d = p;
        d[label] -= 1.0;
        out[0] = ops::scale(d, g[0]);
      });
}

}  // namespace freqmask
