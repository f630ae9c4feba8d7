#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "sipmask/check.hpp"

namespace sipmask {

// Dense row-major tensor. Layout for an H x W x C map: ((y*W)+x)*C + c.
// Training runs at float, gradient checks at double.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(count(shape_), T(0));
  }

  TensorT(std::vector<int> shape, T fill) : shape_(std::move(shape)) {
    data_.assign(count(shape_), fill);
  }

  TensorT(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    SIP_CHECK_ARG(data_.size() == count(shape_),
                  "tensor data length " << data_.size()
                                        << " does not match shape product "
                                        << count(shape_));
  }

  static size_t count(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
      SIP_CHECK_ARG(d >= 0, "negative dimension " << d);
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  // Checked 3-d accessor for H x W x C maps (the common case).
  T& at(int y, int x, int c) { return data_[offset3(y, x, c)]; }
  const T& at(int y, int x, int c) const { return data_[offset3(y, x, c)]; }

  T& at(int y, int x) { return data_[offset2(y, x)]; }
  const T& at(int y, int x) const { return data_[offset2(y, x)]; }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape_);
    for (size_t i = 0; i < data_.size(); ++i)
      out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  size_t offset3(int y, int x, int c) const {
    SIP_CHECK(ndim() == 3, "at(y,x,c) needs a rank-3 tensor");
    SIP_CHECK(y >= 0 && y < shape_[0] && x >= 0 && x < shape_[1] && c >= 0 &&
                  c < shape_[2],
              "index (" << y << "," << x << "," << c << ") out of range");
    return (static_cast<size_t>(y) * shape_[1] + x) * shape_[2] + c;
  }

  size_t offset2(int y, int x) const {
    SIP_CHECK(ndim() == 2, "at(y,x) needs a rank-2 tensor");
    SIP_CHECK(y >= 0 && y < shape_[0] && x >= 0 && x < shape_[1],
              "index (" << y << "," << x << ") out of range");
    return static_cast<size_t>(y) * shape_[1] + x;
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  SIP_CHECK(a.same_shape(b), "max_abs_diff shape mismatch");
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

}  // namespace sipmask
