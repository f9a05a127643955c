#pragma once

// Central-difference verification of tape gradients, in double precision.

#include <functional>
#include <string>
#include <vector>

#include "amisr/params.hpp"

namespace amisr {

struct GradCheckOptions {
  double epsilon = 1e-4;
  // Total coordinates; every parameter tensor gets at least one.
  int samples = 100;
  // Relative error is |a-b| / max(|a|, |b|, floor) with
  // floor = max(floor_abs, floor_rel * max|analytic gradient|). Central
  // differences carry roundoff of order u*|f|/epsilon, so coordinates far
  // below the objective's gradient scale are judged against that scale.
  double floor_abs = 1e-6;
  double floor_rel = 1e-4;
  uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  int coordinates = 0;
  // Draws rejected because a kink sat inside the stencil.
  int skipped = 0;
  // Worst coordinate.
  std::string param;
  int64_t index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double floor = 0.0;
};

// Scalar objective over bound parameters. Called once on a tape for the
// analytic gradient and repeatedly tape-free for finite differences; it must
// be deterministic.
using Objective = std::function<Var<double>(Binder<double>&)>;

GradCheckResult grad_check(ParamStore<double>& params, const Objective& f, const GradCheckOptions& opts = {});

struct GradCheckTargetConfig {
  int channels = 4;
  int size = 8;
  int samples = 100;
  double epsilon = 1e-4;
  uint64_t seed = 1;
};

// Block targets: sa, rdfe, skaf, lgfi, edff, full.
const std::vector<std::string>& gradcheck_targets();

GradCheckResult run_gradcheck_target(const std::string& target, const GradCheckTargetConfig& cfg);

struct OpCheck {
  std::string op;
  double max_rel_error = 0.0;
};

// Checks every primitive op in isolation on small random inputs. Used to name
// the op behind a failing block check.
std::vector<OpCheck> check_ops(uint64_t seed = 1, double epsilon = 1e-4);

}  // namespace amisr
