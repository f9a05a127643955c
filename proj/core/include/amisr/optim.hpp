#pragma once

#include <vector>

#include "amisr/params.hpp"

namespace amisr {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// Bias-corrected Adam over every entry of one store. Moments are kept in
// double; the update is evaluated per element in double and rounded once.
template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& params, AdamOptions opts);

  // Consumes the store's grad slots. Throws ShapeError when a slot is
  // missing or misshapen.
  void step();

  int64_t t() const { return t_; }
  const AdamOptions& options() const { return opts_; }
  void set_lr(double lr) { opts_.lr = lr; }

 private:
  ParamStore<T>& params_;
  AdamOptions opts_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace amisr
