#pragma once

// Plain (non-recording) tensor kernels. The tape in autodiff.hpp wraps these.

#include <array>
#include <cmath>
#include <string>

#include "freqmask/tensor.hpp"

namespace freqmask::ops {

namespace detail {

// Strides of `dims` aligned to an output of rank `rank`, 0 on broadcast axes.
inline Shape aligned_strides(const Shape& dims, const Shape& out) {
  const std::size_t lead = out.size() - dims.size();
  const Shape own = strides_of(dims);
  Shape s(out.size(), 0);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    s[lead + i] = dims[i] == 1 ? 0 : own[i];
  }
  return s;
}

// Calls visit(out_index, a_offset, b_offset) for every element of `out`.
template <typename Visit>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, Visit&& visit) {
  const std::size_t rank = out.size();
  const std::size_t n = numel(out);
  Shape idx(rank, 0);
  std::size_t oa = 0;
  std::size_t ob = 0;
  for (std::size_t k = 0; k < n; ++k) {
    visit(k, oa, ob);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      oa += sa[ax];
      ob += sb[ax];
      if (idx[ax] < out[ax]) break;
      oa -= sa[ax] * out[ax];
      ob -= sb[ax] * out[ax];
      idx[ax] = 0;
    }
  }
}

}  // namespace detail

template <typename F>
Tensor map(const Tensor& a, F&& f) {
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, F&& f) {
  if (a.dims() == b.dims()) {
    Tensor out(a.dims());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const Shape shape = broadcast_shapes(a.dims(), b.dims());
  Tensor out(shape);
  detail::for_each_broadcast(shape, detail::aligned_strides(a.dims(), shape),
                             detail::aligned_strides(b.dims(), shape),
                             [&](std::size_t k, std::size_t ia, std::size_t ib) {
                               out[k] = f(a[ia], b[ib]);
                             });
  return out;
}

// Sums `grad` (shaped like a broadcast result) back down to `target`.
inline Tensor unbroadcast(const Tensor& grad, const Shape& target) {
  if (grad.dims() == target) return grad;
  Tensor out(target, 0.0);
  const Shape st = detail::aligned_strides(target, grad.dims());
  const Shape zero(grad.rank(), 0);
  detail::for_each_broadcast(grad.dims(), st, zero,
                             [&](std::size_t k, std::size_t it, std::size_t) {
                               out[it] += grad[k];
                             });
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, [](double x, double y) { return x + y; });
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, [](double x, double y) { return x - y; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, [](double x, double y) { return x * y; });
}
inline Tensor div(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, [](double x, double y) { return x / y; });
}
inline Tensor square(const Tensor& a) {
  return map(a, [](double x) { return x * x; });
}
inline Tensor scale(const Tensor& a, double s) {
  return map(a, [s](double x) { return s * x; });
}

// 1 / (1 + x), defined for x > -1.
inline Tensor shifted_reciprocal(const Tensor& a) {
  return map(a, [](double x) {
    if (!(x > -1.0)) {
      throw ArgumentError("shifted_reciprocal requires x > -1, got " + std::to_string(x));
    }
    return 1.0 / (1.0 + x);
  });
}

inline double sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

inline double mean_all(const Tensor& a) { return sum_all(a) / static_cast<double>(a.size()); }

inline Shape reduced_shape(const Shape& dims, std::size_t axis) {
  if (axis >= dims.size()) {
    throw IndexError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(dims));
  }
  Shape out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i != axis) out.push_back(dims[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

inline Tensor sum_axis(const Tensor& a, std::size_t axis) {
  const Shape out_dims = reduced_shape(a.dims(), axis);
  const std::size_t extent = a.dims()[axis];
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.dims()[i];
  const std::size_t inner = a.size() / (outer * extent);
  Tensor out(out_dims, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t e = 0; e < extent; ++e) {
      const std::size_t base = (o * extent + e) * inner;
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += a[base + i];
    }
  }
  return out;
}

// Inverse of sum_axis for gradients: repeat `g` along a re-inserted axis.
inline Tensor expand_axis(const Tensor& g, const Shape& full, std::size_t axis) {
  const std::size_t extent = full[axis];
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= full[i];
  const std::size_t inner = numel(full) / (outer * extent);
  Tensor out(full);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t e = 0; e < extent; ++e) {
      const std::size_t base = (o * extent + e) * inner;
      for (std::size_t i = 0; i < inner; ++i) out[base + i] = g[o * inner + i];
    }
  }
  return out;
}

// --- bilinear resize (corner-aligned) -------------------------------------

namespace detail {

struct LerpTap {
  std::size_t lo;
  std::size_t hi;
  double w;  // weight of `hi`
};

inline std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap> taps(out);
  for (std::size_t o = 0; o < out; ++o) {
    double pos = 0.0;
    if (out > 1) {
      pos = static_cast<double>(o * (in - 1)) / static_cast<double>(out - 1);
    }
    auto lo = static_cast<std::size_t>(std::floor(pos));
    lo = std::min(lo, in - 1);
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace detail

inline void check_resize_args(const Tensor& a, long out_h, long out_w) {
  if (a.rank() != 2) {
    throw ShapeError("resize_bilinear expects a rank-2 map, got " + to_string(a.dims()));
  }
  if (out_h < 1 || out_w < 1) {
    throw ArgumentError("resize_bilinear target must be positive, got " +
                        std::to_string(out_h) + "x" + std::to_string(out_w));
  }
}

inline Tensor resize_bilinear(const Tensor& a, long out_h, long out_w) {
  check_resize_args(a, out_h, out_w);
  const std::size_t h = a.dims()[0];
  const std::size_t w = a.dims()[1];
  const auto oh = static_cast<std::size_t>(out_h);
  const auto ow = static_cast<std::size_t>(out_w);
  if (oh == h && ow == w) return a;
  const auto ty = detail::lerp_taps(h, oh);
  const auto tx = detail::lerp_taps(w, ow);
  Tensor out(Shape{oh, ow});
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      const auto& [y0, y1, wy] = ty[y];
      const auto& [x0, x1, wx] = tx[x];
      out[y * ow + x] = (1.0 - wy) * ((1.0 - wx) * a[y0 * w + x0] + wx * a[y0 * w + x1]) +
                        wy * ((1.0 - wx) * a[y1 * w + x0] + wx * a[y1 * w + x1]);
    }
  }
  return out;
}

// Adjoint of resize_bilinear: scatter `g` [oh,ow] back onto [h,w].
inline Tensor resize_bilinear_adjoint(const Tensor& g, std::size_t h, std::size_t w) {
  const std::size_t oh = g.dims()[0];
  const std::size_t ow = g.dims()[1];
  if (oh == h && ow == w) return g;
  const auto ty = detail::lerp_taps(h, oh);
  const auto tx = detail::lerp_taps(w, ow);
  Tensor out(Shape{h, w}, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      const auto& [y0, y1, wy] = ty[y];
      const auto& [x0, x1, wx] = tx[x];
      const double v = g[y * ow + x];
      out[y0 * w + x0] += (1.0 - wy) * (1.0 - wx) * v;
      out[y0 * w + x1] += (1.0 - wy) * wx * v;
      out[y1 * w + x0] += wy * (1.0 - wx) * v;
      out[y1 * w + x1] += wy * wx * v;
    }
  }
  return out;
}

// --- 3D convolution (cross-correlation) -----------------------------------

struct Conv3dParams {
  std::array<std::size_t, 3> stride{1, 1, 1};   // (time, height, width)
  std::array<std::size_t, 3> padding{0, 0, 0};  // zero padding per side
};

struct Conv3dGeometry {
  std::size_t t, c, h, w;      // input
  std::size_t k, kt, kh, kw;   // kernel
  std::size_t ot, oh, ow;      // output
};

inline Conv3dGeometry conv3d_geometry(const Shape& input, const Shape& kernel,
                                      const Conv3dParams& p) {
  if (input.size() != 4) {
    throw ShapeError("conv3d input must be [T,C,H,W], got " + to_string(input));
  }
  if (kernel.size() != 5) {
    throw ShapeError("conv3d kernel must be [K,C,kt,kh,kw], got " + to_string(kernel));
  }
  if (kernel[1] != input[1]) {
    throw ShapeError("conv3d channel mismatch: input " + to_string(input) + " kernel " +
                     to_string(kernel));
  }
  for (auto s : p.stride) {
    if (s == 0) throw ArgumentError("conv3d stride must be >= 1");
  }
  Conv3dGeometry g{input[0], input[1], input[2], input[3],
                   kernel[0], kernel[2], kernel[3], kernel[4], 0, 0, 0};
  const std::array<std::size_t, 3> in{g.t, g.h, g.w};
  const std::array<std::size_t, 3> ks{g.kt, g.kh, g.kw};
  std::array<std::size_t, 3> out{};
  for (int a = 0; a < 3; ++a) {
    const std::size_t padded = in[a] + 2 * p.padding[a];
    if (ks[a] > padded) {
      throw ShapeError("conv3d kernel " + to_string(kernel) + " exceeds padded input " +
                       to_string(input));
    }
    out[a] = (padded - ks[a]) / p.stride[a] + 1;
  }
  g.ot = out[0];
  g.oh = out[1];
  g.ow = out[2];
  return g;
}

namespace detail {

// Visits every (output, input, kernel) offset triple with the input in bounds.
template <typename Visit>
void conv3d_visit(const Conv3dGeometry& g, const Conv3dParams& p, Visit&& visit) {
  const auto pt = static_cast<long>(p.padding[0]);
  const auto ph = static_cast<long>(p.padding[1]);
  const auto pw = static_cast<long>(p.padding[2]);
  for (std::size_t ot = 0; ot < g.ot; ++ot) {
    for (std::size_t k = 0; k < g.k; ++k) {
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
          const std::size_t out_off = ((ot * g.k + k) * g.oh + oy) * g.ow + ox;
          for (std::size_t c = 0; c < g.c; ++c) {
            for (std::size_t dt = 0; dt < g.kt; ++dt) {
              const long it = static_cast<long>(ot * p.stride[0] + dt) - pt;
              if (it < 0 || it >= static_cast<long>(g.t)) continue;
              for (std::size_t dy = 0; dy < g.kh; ++dy) {
                const long iy = static_cast<long>(oy * p.stride[1] + dy) - ph;
                if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                const std::size_t in_row =
                    ((static_cast<std::size_t>(it) * g.c + c) * g.h + static_cast<std::size_t>(iy)) * g.w;
                const std::size_t k_row = (((k * g.c + c) * g.kt + dt) * g.kh + dy) * g.kw;
                for (std::size_t dx = 0; dx < g.kw; ++dx) {
                  const long ix = static_cast<long>(ox * p.stride[2] + dx) - pw;
                  if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                  visit(out_off, in_row + static_cast<std::size_t>(ix), k_row + dx);
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

inline Tensor conv3d(const Tensor& input, const Tensor& kernel, const Conv3dParams& p = {}) {
  const auto g = conv3d_geometry(input.dims(), kernel.dims(), p);
  Tensor out(Shape{g.ot, g.k, g.oh, g.ow}, 0.0);
  detail::conv3d_visit(g, p, [&](std::size_t o, std::size_t i, std::size_t k) {
    out[o] += input[i] * kernel[k];
  });
  return out;
}

inline Tensor conv3d_grad_input(const Tensor& grad_out, const Shape& input_dims,
                                const Tensor& kernel, const Conv3dParams& p) {
  const auto g = conv3d_geometry(input_dims, kernel.dims(), p);
  Tensor out(input_dims, 0.0);
  detail::conv3d_visit(g, p, [&](std::size_t o, std::size_t i, std::size_t k) {
    out[i] += grad_out[o] * kernel[k];
  });
  return out;
}

inline Tensor conv3d_grad_kernel(const Tensor& grad_out, const Tensor& input,
                                 const Shape& kernel_dims, const Conv3dParams& p) {
  const auto g = conv3d_geometry(input.dims(), kernel_dims, p);
  Tensor out(kernel_dims, 0.0);
  detail::conv3d_visit(g, p, [&](std::size_t o, std::size_t i, std::size_t k) {
    out[k] += grad_out[o] * input[i];
  });
  return out;
}

}  // namespace freqmask::ops
