#pragma once

#include "eqptr/common.hpp"

#include <optional>
#include <string>

namespace eqptr {

// min c^T x  subject to  G x <= h,  x >= 0
struct LinearProgram {
  Vector c;
  Matrix G;
  Vector h;

  Index n_vars() const { return c.size(); }
  Index n_cons() const { return G.rows(); }
  void validate() const;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };
std::string to_string(LpStatus s);

struct LpOptions {
  double opt_tol = 1e-9;
  double feas_tol = 1e-9;
  std::optional<long> max_pivots;  // default 50 * (n_vars + n_cons)
  int refactor_interval = 50;
};

struct LpResult {
  Vector x;
  double objective = 0.0;
  LpStatus status = LpStatus::iteration_limit;
  long pivots = 0;
  // Multipliers w >= 0 of G x <= h at optimality (c + G^T w >= 0).
  Vector duals;
};

// Bounded-variable revised simplex in extended precision. A row whose exact
// negation is also present is handled as one ranged row. With c >= 0 a dual
// method (bound-flipping ratio test, perturbed costs) runs first from the
// slack basis; otherwise, or if it stalls, two-phase primal with Dantzig
// pricing and a Bland fallback. Deterministic.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts = {});

}  // namespace eqptr
