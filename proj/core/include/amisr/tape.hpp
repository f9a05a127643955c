#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "amisr/tensor.hpp"

namespace amisr {

// Every differentiable operation the engine knows. The set is closed: each
// kind has an adjoint and grad-check coverage in tests/.
enum class OpKind {
  leaf,
  conv2d,
  transposed_conv2d,
  matmul,
  softmax,
  layer_norm,
  channel_pool_avg,
  channel_pool_max,
  concat,
  split,
  reshape,
  permute,
  add,
  sub,
  mul,
  sigmoid,
  gelu,
  scale,
  sum,
  mean,
  mean_abs,
  spatial_mean,
  bce_logits,
};

const char* op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);

template <typename T>
class Tape;

// Handle to a value. A Var either lives on a Tape (id >= 0) or is a free
// constant that no gradient flows into.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value) : value_(std::move(value)) {}

  const Tensor<T>& value() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  bool defined() const { return !value_.empty(); }
  bool requires_grad() const { return requires_grad_; }
  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape<T>;
  Tensor<T> value_;
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
  bool requires_grad_ = false;
};

// Records operations in execution order so one reverse sweep can compute
// gradients. A tape is single-use: backward() may run once.
template <typename T>
class Tape {
 public:
  // Receives d(loss)/d(output) and accumulates into the input gradient
  // buffers. grad_in[i] is null when input i does not require a gradient.
  using Adjoint = std::function<void(const Tensor<T>& grad_out, std::span<Tensor<T>* const> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  // Leaf whose gradient is added into `sink` (which must share its shape)
  // when backward() finishes. Parameter stores bind their grad slots this way.
  Var<T> leaf(Tensor<T> value, Tensor<T> sink);

  Var<T> record(OpKind kind, Tensor<T> value, std::span<const Var<T>> inputs, Adjoint adjoint);

  void backward(const Var<T>& loss);

  // Gradient of the last backward() w.r.t. `v`; zeros when unreached.
  Tensor<T> grad(const Var<T>& v) const;

  size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  OpKind kind(int id) const { return nodes_.at(static_cast<size_t>(id)).kind; }
  bool contains(OpKind kind) const;
  size_t count(OpKind kind) const;

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<int> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> sink;
    bool requires_grad = false;
    Adjoint adjoint;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Test hook: multiply the incoming gradient of every `kind` node by `factor`
// during backward. Used to prove the gradient checker catches a broken adjoint.
void set_adjoint_fault(std::optional<OpKind> kind, double factor = 1.5);
std::optional<OpKind> adjoint_fault();

}  // namespace amisr
