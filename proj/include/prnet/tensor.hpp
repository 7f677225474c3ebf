#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prnet/memory.hpp"

namespace prnet {

/// NCHW extent of a rank-4 tensor.
struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  constexpr std::int64_t numel() const { return n * c * h * w; }
  constexpr std::int64_t plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const;
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense NCHW array in contiguous row-major order.
///
/// Storage goes through memory::TrackingAllocator so that peak tensor
/// memory can be measured. Math is done through Eigen maps over the buffer:
/// `array()` for elementwise expressions and `matrix(n)` for the C x (H*W)
/// view of one batch item.
template <typename Scalar>
class Tensor {
 public:
  using Storage = std::vector<Scalar, memory::TrackingAllocator<Scalar>>;
  using ArrayMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using ConstArrayMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));

  /// Copies external values; rejects wrong lengths and non-finite entries.
  static Tensor from_values(Shape shape, std::span<const Scalar> values);

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return {data_.data(), data_.size()}; }
  std::span<const Scalar> values() const { return {data_.data(), data_.size()}; }

  Scalar& operator()(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[index(n, c, h, w)];
  }
  Scalar operator()(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data_[index(n, c, h, w)];
  }
  Scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  ArrayMap array() { return ArrayMap(data_.data(), numel()); }
  ConstArrayMap array() const { return ConstArrayMap(data_.data(), numel()); }
  MatrixMap matrix(std::int64_t n) {
    return MatrixMap(data_.data() + n * shape_.c * shape_.plane(), shape_.c, shape_.plane());
  }
  ConstMatrixMap matrix(std::int64_t n) const {
    return ConstMatrixMap(data_.data() + n * shape_.c * shape_.plane(), shape_.c, shape_.plane());
  }

  std::int64_t index(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  bool all_finite() const;

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.array() = array().template cast<Other>();
    return out;
  }

 private:
  Shape shape_{};
  Storage data_;
};

/// Throws ErrorKind::numeric naming `op` when `t` holds NaN or Inf.
template <typename Scalar>
void check_finite(const Tensor<Scalar>& t, const char* op);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace prnet
