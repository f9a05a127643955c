#include "amisr/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "amisr/errors.hpp"

namespace amisr {

std::string to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

DType dtype_from_string(const std::string& name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  throw ConfigError("unknown dtype '" + name + "' (expected f32 or f64)");
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << dims[0] << "," << dims[1] << "," << dims[2] << "," << dims[3] << ")";
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  for (auto d : shape.dims) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape.str());
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(const Shape& shape, T fill) : shape_(shape) {
  check_extents(shape);
  storage_ = std::make_shared<std::vector<T>>(static_cast<size_t>(shape.numel()), fill);
}

template <typename T>
Tensor<T>::Tensor(const Shape& shape, std::vector<T> values) : shape_(shape) {
  check_extents(shape);
  if (static_cast<int64_t>(values.size()) != shape.numel()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                     shape.str());
  }
  storage_ = std::make_shared<std::vector<T>>(std::move(values));
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  if (!storage_) return {};
  return {storage_->data(), storage_->size()};
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!storage_) return {};
  return {storage_->data(), storage_->size()};
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
  return (*storage_)[0];
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(const Shape& shape) const {
  if (shape.numel() != numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  Tensor out = *this;
  out.shape_ = shape;
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  if (!storage_) return {};
  return Tensor(shape_, *storage_);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  T worst = 0;
  auto da = a.data();
  auto db = b.data();
  for (size_t i = 0; i < da.size(); ++i) worst = std::max(worst, std::abs(da[i] - db[i]));
  return worst;
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.ptr(), b.ptr(), sizeof(T) * static_cast<size_t>(a.numel())) == 0;
}

template class Tensor<float>;
template class Tensor<double>;
template float max_abs_diff(const Tensor<float>&, const Tensor<float>&);
template double max_abs_diff(const Tensor<double>&, const Tensor<double>&);
template bool bit_equal(const Tensor<float>&, const Tensor<float>&);
template bool bit_equal(const Tensor<double>&, const Tensor<double>&);

}  // namespace amisr
