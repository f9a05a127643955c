#include "amisr/params.hpp"

#include <cmath>
#include <cstring>

#include "amisr/errors.hpp"

namespace amisr {

template <typename T>
Tensor<T> init_params(const Shape& shape, InitScheme scheme, Rng& rng) {
  if (scheme == InitScheme::zeros) return Tensor<T>::zeros(shape);
  if (scheme == InitScheme::ones) return Tensor<T>::full(shape, T(1));
  for (auto d : shape.dims) {
    if (d <= 0) throw ShapeError("init_params: extents must be positive, got " + shape.str());
  }
  const double fan_in = scheme == InitScheme::he_transposed ? static_cast<double>(shape[0])
                                                            : static_cast<double>(shape[1] * shape[2] * shape[3]);
  const double fan_out = static_cast<double>(shape[0] * shape[2] * shape[3]);
  const double var = scheme != InitScheme::xavier ? 2.0 / fan_in : 2.0 / (fan_in + fan_out);
  const double sd = std::sqrt(var);
  Tensor<T> out(shape);
  for (T& v : out.mutable_data()) v = static_cast<T>(sd * rng.normal());
  return out;
}

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> value) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_[name] = entries_.size();
  Tensor<T> grad = Tensor<T>::zeros(value.shape());
  entries_.push_back(Entry{name, std::move(value), std::move(grad)});
  return entries_.back().value;
}

template <typename T>
const Tensor<T>& ParamStore<T>::value(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

template <typename T>
Tensor<T>& ParamStore<T>::value(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

template <typename T>
Tensor<T>& ParamStore<T>::grad(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].grad;
}

template <typename T>
const Tensor<T>& ParamStore<T>::grad(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].grad;
}

template <typename T>
std::vector<std::string> ParamStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

template <typename T>
int64_t ParamStore<T>::scalar_count() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) {
    auto g = e.grad.mutable_data();
    std::fill(g.begin(), g.end(), T(0));
  }
}

template <typename T>
double ParamStore<T>::grad_norm() const {
  double acc = 0.0;
  for (const auto& e : entries_) {
    for (T g : e.grad.data()) acc += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(acc);
}

template <typename T>
ParamStore<T> ParamStore<T>::clone() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, e.value.clone());
  return out;
}

template <typename T>
bool stores_bit_equal(const ParamStore<T>& a, const ParamStore<T>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& ea = a.entries()[i];
    const auto& eb = b.entries()[i];
    if (ea.name != eb.name || !bit_equal(ea.value, eb.value)) return false;
  }
  return true;
}

template <typename T>
Var<T> Binder<T>::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var<T> v;
  if (tape_ != nullptr && trainable_) {
    v = tape_->leaf(store_.value(name), store_.grad(name));
  } else {
    v = Var<T>(store_.value(name));
  }
  bound_.emplace(name, v);
  return v;
}

template <typename T>
ParamStore<T> allocate(const ParamSpecs& specs, Rng& rng) {
  ParamStore<T> store;
  for (const auto& s : specs) store.add(s.name, init_params<T>(s.shape, s.init, rng));
  return store;
}

int64_t spec_scalar_count(const ParamSpecs& specs) {
  int64_t n = 0;
  for (const auto& s : specs) n += s.shape.numel();
  return n;
}

template Tensor<float> init_params(const Shape&, InitScheme, Rng&);
template Tensor<double> init_params(const Shape&, InitScheme, Rng&);
template class ParamStore<float>;
template class ParamStore<double>;
template bool stores_bit_equal(const ParamStore<float>&, const ParamStore<float>&);
template bool stores_bit_equal(const ParamStore<double>&, const ParamStore<double>&);
template class Binder<float>;
template class Binder<double>;
template ParamStore<float> allocate(const ParamSpecs&, Rng&);
template ParamStore<double> allocate(const ParamSpecs&, Rng&);

}  // namespace amisr
