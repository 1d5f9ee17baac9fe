#pragma once

#include "eqptr/system.hpp"

#include <Eigen/SparseLU>

namespace eqptr {

enum class Continuation { none, pseudo_transient };

struct NewtonConfig {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  int max_iters = 50;
  Continuation continuation = Continuation::none;
  double ptc_initial_step = 1.0;
  int max_backtracks = 20;

  void validate() const;
};

struct PrimalSolution {
  Vector u;
  int iterations = 0;
  std::vector<double> residual_history;
};

// Newton with residual-norm backtracking. With pseudo-transient continuation
// the iteration matrix is J + I/tau and tau doubles after every accepted step.
PrimalSolution solve_primal(const UnassembledSystem& sys, const Vector& mu, const Vector& guess,
                            const NewtonConfig& cfg = {});

// Jacobian at a converged state, factorized once and shared between the
// adjoint (transposed) and sensitivity solves.
class LinearizedState {
 public:
  LinearizedState(const UnassembledSystem& sys, const Vector& u, const Vector& mu);

  Vector solve_adjoint() const;      // J^T lambda = dj/du^T
  Matrix solve_sensitivity() const;  // J du = -dr/dmu
  Vector adjoint_gradient(const Vector& lambda) const;  // dj/dmu - lambda^T dr/dmu

  const SparseMatrix& jacobian() const { return jac_; }
  const QoiDerivatives& qoi_derivatives() const { return dq_; }
  const Matrix& param_jacobian() const;

 private:
  const UnassembledSystem& sys_;
  Vector u_, mu_;
  SparseMatrix jac_;
  mutable Eigen::SparseLU<SparseMatrix> lu_;  // transpose() is non-const
  QoiDerivatives dq_;
  mutable Matrix dr_dmu_;
  mutable bool have_dr_dmu_ = false;
};

Vector solve_adjoint(const UnassembledSystem& sys, const Vector& u_star, const Vector& mu);
Matrix solve_sensitivity(const UnassembledSystem& sys, const Vector& u_star, const Vector& mu);

// Adjoint residual (dr/du)^T lambda - (dj/du)^T and sensitivity residual
// (dr/du) du + dr/dmu, for checking solutions.
Vector adjoint_residual(const UnassembledSystem& sys, const Vector& lambda, const Vector& u,
                        const Vector& mu);
Matrix sensitivity_residual(const UnassembledSystem& sys, const Matrix& du, const Vector& u,
                            const Vector& mu);

struct ObjectiveGradient {
  double f = 0.0;
  Vector grad;
  Vector u;
  Vector lambda;
  int newton_iterations = 0;
};

// f(mu) = j(u*(mu), mu) and its adjoint gradient. guess defaults to zero.
ObjectiveGradient objective_and_gradient(const UnassembledSystem& sys, const Vector& mu,
                                         const NewtonConfig& cfg = {},
                                         const Vector* guess = nullptr);

}  // namespace eqptr
