#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "freqmask/errors.hpp"

namespace freqmask {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t numel(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline void validate_shape(const Shape& dims) {
  if (dims.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor extents must be >= 1, got " + to_string(dims));
  }
}

// Row-major strides.
inline Shape strides_of(const Shape& dims) {
  Shape s(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) s[i - 1] = s[i] * dims[i];
  return s;
}

// Trailing-dimension alignment; an extent of 1 stretches to match.
inline Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shapes " + to_string(a) + " and " + to_string(b) +
                       " are not broadcast-compatible");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

template <typename Scalar>
class BasicTensor {
 public:
  using value_type = Scalar;

  BasicTensor() : dims_{1}, data_(1, Scalar{}) {}

  explicit BasicTensor(Shape dims, Scalar fill = Scalar{}) : dims_(std::move(dims)) {
    validate_shape(dims_);
    data_.assign(numel(dims_), fill);
  }

  BasicTensor(Shape dims, std::vector<Scalar> values)
      : dims_(std::move(dims)), data_(std::move(values)) {
    validate_shape(dims_);
    if (data_.size() != numel(dims_)) {
      throw ShapeError("element count " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(dims_));
    }
  }

  static BasicTensor scalar(Scalar v) { return BasicTensor(Shape{1}, std::vector<Scalar>{v}); }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= dims_.size()) {
      throw IndexError("axis " + std::to_string(axis) + " out of range for shape " +
                       to_string(dims_));
    }
    return dims_[axis];
  }

  std::span<const Scalar> values() const& noexcept { return data_; }
  std::span<Scalar> values() & noexcept { return data_; }
  // a temporary hands over its storage, so `for (x : f().values())` stays valid
  std::vector<Scalar> values() && noexcept { return std::move(data_); }
  const std::vector<Scalar>& storage() const noexcept { return data_; }

  const Scalar& operator[](std::size_t i) const { return data_[i]; }
  Scalar& operator[](std::size_t i) { return data_[i]; }

  template <typename... Index>
  const Scalar& at(Index... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Index>
  Scalar& at(Index... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  Scalar item() const {
    if (data_.size() != 1) {
      throw ShapeError("item() requires a single-element tensor, got " + to_string(dims_));
    }
    return data_[0];
  }

  BasicTensor reshaped(Shape dims) const {
    return BasicTensor(std::move(dims), data_);
  }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != dims_.size()) {
      throw IndexError("index rank " + std::to_string(idx.size()) + " does not match shape " +
                       to_string(dims_));
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (auto i : idx) {
      if (i >= dims_[axis]) {
        throw IndexError("index " + std::to_string(i) + " out of range on axis " +
                         std::to_string(axis) + " of shape " + to_string(dims_));
      }
      off = off * dims_[axis] + i;
      ++axis;
    }
    return off;
  }

  Shape dims_;
  std::vector<Scalar> data_;
};

using Tensor = BasicTensor<double>;
using ComplexTensor = BasicTensor<std::complex<double>>;

inline bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](double v) { return std::isfinite(v); });
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    throw ShapeError("max_abs_diff: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace freqmask
