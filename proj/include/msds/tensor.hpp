#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace msds {

template <typename S>
using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;

template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using RowMajorMatrixX =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense rank-4 array laid out as (batch, channel, row, col), col fastest.
/// Feature maps are (B, C, H, W); conv weights are (Cout, Cin, kh, kw);
/// per-channel vectors are (1, C, 1, 1).
template <typename S>
class Tensor4 {
 public:
  using Scalar = S;

  Tensor4() = default;

  Tensor4(int n, int c, int h, int w)
      : n_(n), c_(c), h_(h), w_(w) {
    if (n < 0 || c < 0 || h < 0 || w < 0) {
      throw std::invalid_argument("Tensor4: negative dimension");
    }
    data_ = ArrayX<S>::Zero(static_cast<Eigen::Index>(n) * c * h * w);
  }

  static Tensor4 constant(int n, int c, int h, int w, S value) {
    Tensor4 t(n, c, h, w);
    t.data_.setConstant(value);
    return t;
  }

  /// Allocates without zero-filling; every element must be written before use.
  static Tensor4 uninit(int n, int c, int h, int w) {
    Tensor4 t;
    if (n < 0 || c < 0 || h < 0 || w < 0) {
      throw std::invalid_argument("Tensor4: negative dimension");
    }
    t.n_ = n;
    t.c_ = c;
    t.h_ = h;
    t.w_ = w;
    t.data_.resize(static_cast<Eigen::Index>(n) * c * h * w);
    return t;
  }

  static Tensor4 scalar(S value) { return constant(1, 1, 1, 1, value); }

  int batch() const { return n_; }
  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::array<int, 4> shape() const { return {n_, c_, h_, w_}; }

  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  S& operator()(int b, int c, int y, int x) {
    return data_[offset(b, c, y, x)];
  }
  S operator()(int b, int c, int y, int x) const {
    return data_[offset(b, c, y, x)];
  }

  ArrayX<S>& array() { return data_; }
  const ArrayX<S>& array() const { return data_; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  /// Contiguous (H*W) view of one channel plane.
  Eigen::Map<ArrayX<S>> plane(int b, int c) {
    return {data_.data() + plane_offset(b, c), static_cast<Eigen::Index>(h_) * w_};
  }
  Eigen::Map<const ArrayX<S>> plane(int b, int c) const {
    return {data_.data() + plane_offset(b, c), static_cast<Eigen::Index>(h_) * w_};
  }

  /// Contiguous (C*H*W) view of one batch item.
  Eigen::Map<ArrayX<S>> item(int b) {
    return {data_.data() + static_cast<Eigen::Index>(b) * c_ * h_ * w_,
            static_cast<Eigen::Index>(c_) * h_ * w_};
  }
  Eigen::Map<const ArrayX<S>> item(int b) const {
    return {data_.data() + static_cast<Eigen::Index>(b) * c_ * h_ * w_,
            static_cast<Eigen::Index>(c_) * h_ * w_};
  }

  bool all_finite() const { return data_.isFinite().all(); }

  std::string shape_string() const {
    std::ostringstream os;
    os << "(" << n_ << "," << c_ << "," << h_ << "," << w_ << ")";
    return os.str();
  }

  template <typename T>
  Tensor4<T> cast() const {
    Tensor4<T> out(n_, c_, h_, w_);
    out.array() = data_.template cast<T>();
    return out;
  }

 private:
  Eigen::Index offset(int b, int c, int y, int x) const {
    return ((static_cast<Eigen::Index>(b) * c_ + c) * h_ + y) * w_ + x;
  }
  Eigen::Index plane_offset(int b, int c) const {
    return (static_cast<Eigen::Index>(b) * c_ + c) * static_cast<Eigen::Index>(h_) * w_;
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  ArrayX<S> data_;
};

template <typename S>
S max_abs_diff(const Tensor4<S>& a, const Tensor4<S>& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_diff: shape mismatch " +
                                a.shape_string() + " vs " + b.shape_string());
  }
  if (a.size() == 0) return S(0);
  return (a.array() - b.array()).abs().maxCoeff();
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace msds
