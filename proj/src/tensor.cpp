#include "prnet/tensor.hpp"

#include <cmath>

#include "prnet/error.hpp"

namespace prnet {

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "]";
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Scalar fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw Error(ErrorKind::shape, "tensor", "negative extent in " + shape.str());
  }
  data_.assign(static_cast<std::size_t>(shape.numel()), fill);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::from_values(Shape shape, std::span<const Scalar> values) {
  if (static_cast<std::int64_t>(values.size()) != shape.numel()) {
    throw Error(ErrorKind::shape, "tensor", "expected " + std::to_string(shape.numel()) + " values for " +
                                                shape.str() + ", got " + std::to_string(values.size()));
  }
  Tensor out(shape);
  std::copy(values.begin(), values.end(), out.data_.begin());
  check_finite(out, "tensor");
  return out;
}

template <typename Scalar>
bool Tensor<Scalar>::all_finite() const {
  for (Scalar v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename Scalar>
void check_finite(const Tensor<Scalar>& t, const char* op) {
  if (!t.all_finite()) {
    throw Error(ErrorKind::numeric, op, "non-finite value in tensor " + t.shape().str());
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void check_finite(const Tensor<float>&, const char*);
template void check_finite(const Tensor<double>&, const char*);

}  // namespace prnet
