#pragma once

#include <Eigen/Core>

#include <array>
#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace styland::nn {

/// NCHW extent of a dense tensor.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  [[nodiscard]] std::ptrdiff_t numel() const {
    return static_cast<std::ptrdiff_t>(n) * c * h * w;
  }
  [[nodiscard]] std::ptrdiff_t plane() const { return static_cast<std::ptrdiff_t>(h) * w; }
  [[nodiscard]] std::ptrdiff_t sample() const { return static_cast<std::ptrdiff_t>(c) * h * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense NCHW tensor. Storage is one contiguous Eigen array so element-wise
/// work can be written as Eigen array expressions over `data`.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(Array::Zero(shape.numel())) {}
  Tensor(Shape shape, Scalar fill) : shape_(shape), data_(Array::Constant(shape.numel(), fill)) {}

  static Tensor zeros(Shape shape) { return Tensor(shape); }
  static Tensor scalar(Scalar v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] int n() const { return shape_.n; }
  [[nodiscard]] int c() const { return shape_.c; }
  [[nodiscard]] int h() const { return shape_.h; }
  [[nodiscard]] int w() const { return shape_.w; }
  [[nodiscard]] std::ptrdiff_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.size() == 0; }

  Array& data() { return data_; }
  [[nodiscard]] const Array& data() const { return data_; }
  Scalar* ptr() { return data_.data(); }
  [[nodiscard]] const Scalar* ptr() const { return data_.data(); }

  /// Sample `i` viewed as a C x (H*W) row-major matrix.
  PlaneMap sample(int i) {
    return PlaneMap(ptr() + i * shape_.sample(), shape_.c, shape_.plane());
  }
  [[nodiscard]] ConstPlaneMap sample(int i) const {
    return ConstPlaneMap(ptr() + i * shape_.sample(), shape_.c, shape_.plane());
  }

  Scalar& at(int i, int ch, int y, int x) {
    return data_[index(i, ch, y, x)];
  }
  [[nodiscard]] Scalar at(int i, int ch, int y, int x) const {
    return data_[index(i, ch, y, x)];
  }

  [[nodiscard]] Scalar item() const {
    if (data_.size() != 1) throw std::logic_error("Tensor::item on non-scalar tensor");
    return data_[0];
  }

  /// Same data viewed under another shape with equal element count.
  [[nodiscard]] Tensor reshaped(Shape shape) const {
    if (shape.numel() != shape_.numel()) {
      throw std::invalid_argument("reshape " + to_string(shape_) + " -> " + to_string(shape));
    }
    Tensor out;
    out.shape_ = shape;
    out.data_ = data_;
    return out;
  }

  template <typename Other>
  [[nodiscard]] Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.data() = data_.template cast<Other>();
    return out;
  }

  [[nodiscard]] bool all_finite() const { return data_.isFinite().all(); }

 private:
  [[nodiscard]] std::ptrdiff_t index(int i, int ch, int y, int x) const {
    assert(i < shape_.n && ch < shape_.c && y < shape_.h && x < shape_.w);
    return ((static_cast<std::ptrdiff_t>(i) * shape_.c + ch) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  Array data_;
};

}  // namespace styland::nn
