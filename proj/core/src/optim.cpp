#include "amisr/optim.hpp"

#include <cmath>

#include "amisr/errors.hpp"

namespace amisr {

template <typename T>
Adam<T>::Adam(ParamStore<T>& params, AdamOptions opts) : params_(params), opts_(opts) {
  for (const auto& e : params_.entries()) {
    m_.emplace_back(static_cast<size_t>(e.value.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(e.value.numel()), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  auto& entries = params_.entries();
  if (entries.size() != m_.size()) throw ShapeError("adam: parameter store changed after construction");
  for (const auto& e : entries) {
    if (e.grad.empty() || e.grad.shape() != e.value.shape()) {
      throw ShapeError("adam: missing gradient for '" + e.name + "'");
    }
  }
  ++t_;
  const double b1 = opts_.beta1, b2 = opts_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (size_t i = 0; i < entries.size(); ++i) {
    T* theta = entries[i].value.mutable_ptr();
    const T* g = entries[i].grad.ptr();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (size_t k = 0; k < m.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      const double update = opts_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opts_.eps);
      theta[k] = static_cast<T>(static_cast<double>(theta[k]) - update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace amisr
