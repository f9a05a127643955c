#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace amisr {

enum class DType { f32, f64 };

std::string to_string(DType dtype);
DType dtype_from_string(const std::string& name);

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "tensors hold float or double");
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

// Extents of a rank-4 NCHW tensor.
struct Shape {
  std::array<int64_t, 4> dims{0, 0, 0, 0};

  Shape() = default;
  Shape(int64_t n, int64_t c, int64_t h, int64_t w) : dims{n, c, h, w} {}

  int64_t n() const { return dims[0]; }
  int64_t c() const { return dims[1]; }
  int64_t h() const { return dims[2]; }
  int64_t w() const { return dims[3]; }
  int64_t operator[](int axis) const { return dims[static_cast<size_t>(axis)]; }
  int64_t numel() const { return dims[0] * dims[1] * dims[2] * dims[3]; }
  // Elements per sample (C*H*W).
  int64_t sample_size() const { return dims[1] * dims[2] * dims[3]; }
  int64_t plane() const { return dims[2] * dims[3]; }

  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense row-major NCHW array. Copies share storage; tensors handed out by the
// op layer are treated as immutable. Only the optimizer writes into parameter
// tensors in place.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(const Shape& shape, T fill = T(0));
  Tensor(const Shape& shape, std::vector<T> values);

  static Tensor zeros(const Shape& shape) { return Tensor(shape); }
  static Tensor full(const Shape& shape, T v) { return Tensor(shape, v); }
  static Tensor scalar(T v) { return Tensor(Shape(1, 1, 1, 1), v); }

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return shape_.numel(); }
  bool empty() const { return storage_ == nullptr; }

  std::span<const T> data() const;
  std::span<T> mutable_data();
  const T* ptr() const { return storage_ ? storage_->data() : nullptr; }
  T* mutable_ptr() { return storage_ ? storage_->data() : nullptr; }

  T at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return (*storage_)[static_cast<size_t>(offset(n, c, h, w))];
  }
  T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return (*storage_)[static_cast<size_t>(offset(n, c, h, w))];
  }
  T item() const;

  // Same storage viewed with a different shape of equal element count.
  Tensor reshaped(const Shape& shape) const;
  // Deep copy.
  Tensor clone() const;
  bool all_finite() const;
  // Storage identity, used to tell aliases from copies.
  bool shares_storage_with(const Tensor& other) const { return storage_ == other.storage_; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    auto dst = out.mutable_data();
    auto src = data();
    for (size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<U>(src[i]);
    return out;
  }

 private:
  int64_t offset(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return ((n * shape_.c() + c) * shape_.h() + h) * shape_.w() + w;
  }

  Shape shape_;
  std::shared_ptr<std::vector<T>> storage_;
};

// Max |a-b| over equally shaped tensors.
template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

// Bitwise equality of shapes and values.
template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace amisr
