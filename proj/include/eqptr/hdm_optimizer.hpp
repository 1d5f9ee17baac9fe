#pragma once

#include "eqptr/trust_region.hpp"

namespace eqptr {

struct BfgsConfig {
  int max_iters = 200;
  double grad_stop = 1e-6;  // relative to the initial gradient norm
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_evals = 20;
  double first_step = 0.1;  // length cap of the very first trial step
  NewtonConfig newton;
  std::optional<double> f_star;
  std::function<void(const IterationRecord&)> on_iteration;
};

// BFGS with a derivative-secant line search on f(mu) evaluated through the
// full model (primal + adjoint per trial point). Records use the same
// layout as the trust-region history; model columns are NaN.
TrResult run_hdm_opt(const UnassembledSystem& sys, const Vector& mu0, const BfgsConfig& cfg = {});

}  // namespace eqptr
