// Central-difference verification of hand-derived gradients.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "coupon/param_store.hpp"

namespace coupon::nn {

// Computes the scalar loss at the current parameters; when `grads` is
// non-null it must also fill in analytic gradients for every parameter.
using ForwardBackwardFn = std::function<double(ParamStore&, Gradients*)>;

struct GradCheckOptions {
  double step = 1e-5;       // central-difference perturbation
  double tolerance = 1e-4;  // max allowed relative error
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  bool passed = false;
  double tolerance = 0.0;
  std::vector<ParamCheck> params;
  std::string worst_param;
  double worst_error = 0.0;
  // Non-empty when a perturbed evaluation produced a non-finite loss; names
  // the offending parameter.
  std::string failure;
};

// Relative error |a - b| / max(|a|, |b|, 1e-8) for every entry of every
// parameter; fails if any exceeds the tolerance. Parameters are restored
// bit-exactly afterwards.
GradCheckReport grad_check(ParamStore& params, const ForwardBackwardFn& fn,
                           GradCheckOptions options = {});

}  // namespace coupon::nn
