#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "amisr/rng.hpp"
#include "amisr/tape.hpp"
#include "amisr/tensor.hpp"

namespace amisr {

enum class InitScheme { he, he_transposed, xavier, zeros, ones };

// he: N(0, 2/fan_in); xavier: N(0, 2/(fan_in+fan_out)). For a kernel shaped
// (d0, d1, kh, kw): fan_in = d1*kh*kw, fan_out = d0*kh*kw. he_transposed is
// He for a stride-2 kernel-2 transposed kernel (C_in, C_out, 2, 2), where
// every output sees exactly C_in taps, so fan_in = d0.
template <typename T>
Tensor<T> init_params(const Shape& shape, InitScheme scheme, Rng& rng);

// Named, ordered learnable tensors with one gradient slot each. Iteration
// follows insertion order.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor<T>& value(const std::string& name) const;
  Tensor<T>& value(const std::string& name);
  Tensor<T>& grad(const std::string& name);
  const Tensor<T>& grad(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }
  int64_t scalar_count() const;

  void zero_grad();
  // L2 norm over every gradient slot.
  double grad_norm() const;
  // Deep copy, gradients zeroed.
  ParamStore clone() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// Bitwise equality of names, order, shapes and values.
template <typename T>
bool stores_bit_equal(const ParamStore<T>& a, const ParamStore<T>& b);

// Exposes parameters of a store to forward code. With a tape and
// trainable=true each parameter becomes a tape leaf whose gradient lands in
// the store's grad slot; otherwise parameters are constants. Each name is
// bound once per Binder.
template <typename T>
class Binder {
 public:
  Binder(ParamStore<T>& store, Tape<T>* tape, bool trainable = true)
      : store_(store), tape_(tape), trainable_(trainable) {}

  Var<T> operator()(const std::string& name);
  bool has(const std::string& name) const { return store_.contains(name); }
  Tape<T>* tape() const { return tape_; }

 private:
  ParamStore<T>& store_;
  Tape<T>* tape_;
  bool trainable_;
  std::unordered_map<std::string, Var<T>> bound_;
};

// Declarative parameter layout: forward code and build() share one list.
struct ParamSpec {
  std::string name;
  Shape shape;
  InitScheme init;
};

using ParamSpecs = std::vector<ParamSpec>;

template <typename T>
ParamStore<T> allocate(const ParamSpecs& specs, Rng& rng);

int64_t spec_scalar_count(const ParamSpecs& specs);

}  // namespace amisr
