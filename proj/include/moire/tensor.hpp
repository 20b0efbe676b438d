#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "moire/error.hpp"

namespace moire {

// NCHW extents. Vectors (biases, learnable scalars) are stored as (1, len, 1, 1).
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t numel() const noexcept { return n * c * h * w; }
  constexpr std::size_t plane() const noexcept { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const;
};

// Rank-4 row-major array. Element (n, c, y, x) lives at ((n*C + c)*H + y)*W + x.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}

  // Rejects length mismatches and non-finite values.
  Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.numel()) {
      throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                                " does not match shape " + shape_.str());
    }
    for (T v : data_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "tensor data contains NaN/Inf");
    }
  }

  static Tensor zeros(Shape s) { return Tensor(s, T(0)); }
  static Tensor ones(Shape s) { return Tensor(s, T(1)); }
  static Tensor full(Shape s, T v) { return Tensor(s, v); }
  static Tensor scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }
  static Tensor vector(std::vector<T> v) {
    const std::size_t len = v.size();
    return Tensor(Shape{1, len, 1, 1}, std::move(v));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t n() const noexcept { return shape_.n; }
  std::size_t c() const noexcept { return shape_.c; }
  std::size_t h() const noexcept { return shape_.h; }
  std::size_t w() const noexcept { return shape_.w; }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[offset(n, c, y, x)];
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[offset(n, c, y, x)];
  }
  T operator[](std::size_t i) const noexcept { return data_[i]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }

  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }
  T* plane(std::size_t n, std::size_t c) noexcept { return ptr() + (n * shape_.c + c) * shape_.plane(); }
  const T* plane(std::size_t n, std::size_t c) const noexcept {
    return ptr() + (n * shape_.c + c) * shape_.plane();
  }
  std::span<T> data() & noexcept { return data_; }
  std::span<const T> data() const& noexcept { return data_; }
  std::span<const T> data() && = delete;
  const std::vector<T>& values() const& noexcept { return data_; }
  std::vector<T> values() && noexcept { return std::move(data_); }

  // Same data under a new shape of equal element count.
  Tensor reshaped(Shape s) const {
    if (s.numel() != numel()) throw Error(ErrorCode::ShapeMismatch, "reshape " + shape_.str() + " -> " + s.str());
    Tensor out = *this;
    out.shape_ = s;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_{};
  std::vector<T> data_;
};

// Bitwise comparison (distinguishes -0 from +0, unlike operator==).
template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace moire
