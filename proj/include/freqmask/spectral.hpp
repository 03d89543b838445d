#pragma once

// Temporal DFT of feature volumes. Axis 0 is time; every other index is an
// independent column. Forward transform is unnormalized:
//   X_k = sum_t x_t exp(-2 pi i k t / T)

#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "freqmask/tensor.hpp"

namespace freqmask {

using cplx = std::complex<double>;

// Radix-2 for power-of-two lengths, Bluestein (chirp-z) otherwise.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw ArgumentError("FFT length must be >= 1");
    if (std::has_single_bit(n)) {
      init_radix2(n, twiddles_, bitrev_);
    } else {
      m_ = std::bit_ceil(2 * n - 1);
      init_radix2(m_, twiddles_, bitrev_);
      chirp_.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the phase argument small.
        const auto kk = static_cast<double>((k * k) % (2 * n));
        chirp_[k] = std::polar(1.0, -std::numbers::pi * kk / static_cast<double>(n));
      }
      std::vector<cplx> b(m_, cplx{});
      b[0] = std::conj(chirp_[0]);
      for (std::size_t k = 1; k < n; ++k) {
        b[k] = std::conj(chirp_[k]);
        b[m_ - k] = std::conj(chirp_[k]);
      }
      radix2(b, false);
      chirp_filter_ = std::move(b);
    }
  }

  std::size_t size() const noexcept { return n_; }
  bool is_radix2() const noexcept { return m_ == 0; }

  // In-place unnormalized forward transform.
  void forward(std::span<cplx> data) const {
    if (data.size() != n_) throw ShapeError("FFT buffer length does not match plan");
    if (n_ == 1) return;
    if (is_radix2()) {
      radix2(data, false);
      return;
    }
    std::vector<cplx> a(m_, cplx{});
    for (std::size_t k = 0; k < n_; ++k) a[k] = data[k] * chirp_[k];
    radix2(a, false);
    for (std::size_t k = 0; k < m_; ++k) a[k] *= chirp_filter_[k];
    radix2(a, true);
    const double inv_m = 1.0 / static_cast<double>(m_);
    for (std::size_t k = 0; k < n_; ++k) data[k] = a[k] * inv_m * chirp_[k];
  }

 private:
  static void init_radix2(std::size_t m, std::vector<cplx>& tw, std::vector<std::size_t>& rev) {
    tw.resize(m / 2);
    for (std::size_t k = 0; k < m / 2; ++k) {
      tw[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) /
                                  static_cast<double>(m));
    }
    rev.assign(m, 0);
    const int bits = std::countr_zero(m);
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t r = 0;
      for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      rev[i] = r;
    }
  }

  // Iterative Cooley-Tukey on a buffer of the plan's radix-2 length.
  void radix2(std::span<cplx> a, bool conj_twiddle) const {
    const std::size_t m = a.size();
    for (std::size_t i = 0; i < m; ++i) {
      if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= m; len <<= 1) {
      const std::size_t step = m / len;
      const std::size_t half = len / 2;
      for (std::size_t start = 0; start < m; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const cplx w = conj_twiddle ? std::conj(twiddles_[j * step]) : twiddles_[j * step];
          const cplx u = a[start + j];
          const cplx v = a[start + j + half] * w;
          a[start + j] = u + v;
          a[start + j + half] = u - v;
        }
      }
    }
  }

  std::size_t n_;
  std::size_t m_ = 0;  // padded radix-2 length for Bluestein, 0 when n is a power of two
  std::vector<cplx> twiddles_;
  std::vector<std::size_t> bitrev_;
  std::vector<cplx> chirp_;
  std::vector<cplx> chirp_filter_;
};

struct Spectrum {
  ComplexTensor bins;  // [T, ...] indexed like the input volume
};

// Transform of a real volume along axis 0.
inline Spectrum temporal_dft(const Tensor& x) {
  const std::size_t t_len = x.dims()[0];
  const std::size_t cols = x.size() / t_len;
  const FftPlan plan(t_len);
  ComplexTensor out(x.dims());
  std::vector<cplx> buf(t_len);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t t = 0; t < t_len; ++t) buf[t] = x[t * cols + c];
    plan.forward(buf);
    for (std::size_t k = 0; k < t_len; ++k) out[k * cols + c] = buf[k];
  }
  return {std::move(out)};
}

struct FrequencyVector {
  std::vector<double> values;  // cycles per frame, f_k = min(k, T-k) / T
};

inline FrequencyVector frequency_vector(long t_len) {
  if (t_len < 1) {
    throw ArgumentError("frequency_vector requires T >= 1, got " + std::to_string(t_len));
  }
  const auto n = static_cast<std::size_t>(t_len);
  FrequencyVector f{std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    f.values[k] = static_cast<double>(std::min(k, n - k)) / static_cast<double>(n);
  }
  return f;
}

// Squared magnitude per bin.
inline Tensor power(const Spectrum& s) {
  Tensor out(s.bins.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::norm(s.bins[i]);
  return out;
}

}  // namespace freqmask
