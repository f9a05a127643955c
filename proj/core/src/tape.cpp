#include "amisr/tape.hpp"

#include <array>
#include <atomic>

#include "amisr/errors.hpp"

namespace amisr {

namespace {

constexpr std::array<const char*, 23> kOpNames = {
    "leaf",  "conv2d", "transposed_conv2d", "matmul", "softmax",          "layer_norm",
    "channel_pool_avg", "channel_pool_max", "concat", "split", "reshape", "permute",
    "add",   "sub",    "mul",               "sigmoid", "gelu",            "scale",
    "sum",   "mean",   "mean_abs",          "spatial_mean", "bce_logits",
};

std::atomic<int> g_fault_kind{-1};
std::atomic<double> g_fault_factor{1.5};

}  // namespace

const char* op_name(OpKind kind) { return kOpNames.at(static_cast<size_t>(kind)); }

std::optional<OpKind> op_from_name(std::string_view name) {
  for (size_t i = 0; i < kOpNames.size(); ++i) {
    if (name == kOpNames[i]) return static_cast<OpKind>(i);
  }
  return std::nullopt;
}

void set_adjoint_fault(std::optional<OpKind> kind, double factor) {
  g_fault_kind.store(kind ? static_cast<int>(*kind) : -1);
  g_fault_factor.store(factor);
}

std::optional<OpKind> adjoint_fault() {
  const int k = g_fault_kind.load();
  if (k < 0) return std::nullopt;
  return static_cast<OpKind>(k);
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  if (consumed_) throw TapeError("cannot record on a tape after backward()");
  Node node;
  node.kind = OpKind::leaf;
  node.value = value;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  Var<T> v(std::move(value));
  v.tape_ = this;
  v.id_ = static_cast<int>(nodes_.size() - 1);
  v.requires_grad_ = requires_grad;
  return v;
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, Tensor<T> sink) {
  if (sink.shape() != value.shape()) {
    throw ShapeError("gradient sink " + sink.shape().str() + " does not match leaf " + value.shape().str());
  }
  Var<T> v = leaf(std::move(value), true);
  nodes_.back().sink = std::move(sink);
  return v;
}

template <typename T>
Var<T> Tape<T>::record(OpKind kind, Tensor<T> value, std::span<const Var<T>> inputs, Adjoint adjoint) {
  if (consumed_) throw TapeError("cannot record on a tape after backward()");
  Node node;
  node.kind = kind;
  node.value = value;
  node.adjoint = std::move(adjoint);
  for (const auto& in : inputs) {
    if (in.tape() == this) {
      node.inputs.push_back(in.id());
      node.requires_grad = node.requires_grad || in.requires_grad();
    } else {
      if (in.tape() != nullptr) throw TapeError("op mixes values from two different tapes");
      node.inputs.push_back(-1);
    }
  }
  const bool rg = node.requires_grad;
  nodes_.push_back(std::move(node));
  Var<T> v(std::move(value));
  v.tape_ = this;
  v.id_ = static_cast<int>(nodes_.size() - 1);
  v.requires_grad_ = rg;
  return v;
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (consumed_) throw TapeError("backward() already ran on this tape; re-record the forward pass");
  if (loss.tape() != this || loss.id() < 0) throw TapeError("loss was not recorded on this tape");
  if (loss.value().numel() != 1) {
    throw TapeError("backward() needs a scalar loss, got shape " + loss.shape().str());
  }
  consumed_ = true;
  const auto fault = adjoint_fault();
  const T fault_factor = static_cast<T>(g_fault_factor.load());

  nodes_[static_cast<size_t>(loss.id())].grad = Tensor<T>::full(loss.shape(), T(1));
  std::vector<Tensor<T>*> grad_in;
  for (int i = loss.id(); i >= 0; --i) {
    Node& node = nodes_[static_cast<size_t>(i)];
    if (node.grad.empty() || !node.requires_grad || node.kind == OpKind::leaf) continue;
    grad_in.assign(node.inputs.size(), nullptr);
    bool any = false;
    for (size_t j = 0; j < node.inputs.size(); ++j) {
      const int src = node.inputs[j];
      if (src < 0) continue;
      Node& in = nodes_[static_cast<size_t>(src)];
      if (!in.requires_grad) continue;
      if (in.grad.empty()) in.grad = Tensor<T>::zeros(in.value.shape());
      grad_in[j] = &in.grad;
      any = true;
    }
    if (!any) continue;
    if (fault && *fault == node.kind) {
      Tensor<T> scaled = node.grad.clone();
      for (T& g : scaled.mutable_data()) g *= fault_factor;
      node.adjoint(scaled, grad_in);
    } else {
      node.adjoint(node.grad, grad_in);
    }
  }
  for (auto& node : nodes_) {
    if (node.kind != OpKind::leaf || node.sink.empty() || node.grad.empty()) continue;
    auto dst = node.sink.mutable_data();
    auto src = node.grad.data();
    for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

template <typename T>
Tensor<T> Tape<T>::grad(const Var<T>& v) const {
  if (v.tape() != this || v.id() < 0) return Tensor<T>::zeros(v.shape());
  const Node& node = nodes_.at(static_cast<size_t>(v.id()));
  if (node.grad.empty()) return Tensor<T>::zeros(v.shape());
  return node.grad;
}

template <typename T>
bool Tape<T>::contains(OpKind kind) const {
  return count(kind) > 0;
}

template <typename T>
size_t Tape<T>::count(OpKind kind) const {
  size_t n = 0;
  for (const auto& node : nodes_) n += node.kind == kind ? 1 : 0;
  return n;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace amisr
