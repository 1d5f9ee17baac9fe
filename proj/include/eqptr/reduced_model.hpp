#pragma once

#include "eqptr/reduced_basis.hpp"

#include <optional>

namespace eqptr {

// Nonnegative element weights. An unweighted reduced model is the all-ones case.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(Vector rho);
  static WeightVector ones(Index n_elements) { return WeightVector(Vector::Ones(n_elements)); }

  const Vector& values() const { return rho_; }
  Index size() const { return rho_.size(); }
  Index nnz() const { return static_cast<Index>(active_.size()); }
  double nnz_fraction() const { return rho_.size() ? double(nnz()) / double(rho_.size()) : 0.0; }
  const IndexList& active() const { return active_; }

 private:
  Vector rho_;
  IndexList active_;
};

enum class ReducedKind { residual, adjoint_residual, qoi, gradient_recon, sensitivity_residual };

// Extra inputs some kinds need: the reduced adjoint for adjoint_residual and
// gradient_recon, the reduced sensitivity (n x N_mu) for sensitivity_residual.
struct ReducedAux {
  const Vector* lambda = nullptr;
  const Matrix* sensitivity = nullptr;
};

// Length of the flattened output of a kind.
Index kind_length(ReducedKind kind, Index n, Index n_mu);

struct ReducedNewtonConfig {
  double abs_tol = 1e-10;
  int max_iters = 50;
  int max_backtracks = 20;
  // After reaching abs_tol keep iterating while the residual still drops by
  // at least this factor (bounded by polish_iters extra steps).
  double polish_factor = 0.5;
  int polish_iters = 4;
};

struct ReducedPrimal {
  Vector y;
  int iterations = 0;
  std::vector<double> residual_history;
};

struct ReducedObjective {
  double f = 0.0;
  Vector grad;
  Vector y;
  Vector lambda;
  int iterations = 0;
};

// Galerkin projection of an unassembled system, evaluated as weighted element
// sums. Without weights every element has weight one and this is the plain
// reduced-order model; with weights only elements of positive weight are
// touched.
class ReducedModel {
 public:
  ReducedModel(const UnassembledSystem& sys, const ReducedBasis& basis,
               std::optional<WeightVector> weights = std::nullopt, bool structural_qoi = false);

  Index size() const { return basis_.size(); }
  const ReducedBasis& basis() const { return basis_; }
  const UnassembledSystem& system() const { return sys_; }
  bool structural_qoi() const { return structural_; }
  bool weighted() const { return weights_.has_value(); }

  // Flattened contribution of element e (unweighted) for one kind. In
  // structural-QoI mode the QoI terms are excluded here and supplied by
  // constant_term instead.
  Vector element_contribution(Index e, ReducedKind kind, const Vector& y, const Vector& mu,
                              const ReducedAux& aux = {}) const;
  // Terms evaluated exactly on the reduced side (nonzero only in structural-QoI mode).
  Vector constant_term(ReducedKind kind, const Vector& y, const Vector& mu,
                       const ReducedAux& aux = {}) const;
  // Weighted sum of element contributions plus the constant term.
  Vector evaluate(ReducedKind kind, const Vector& y, const Vector& mu,
                  const ReducedAux& aux = {}) const;

  Vector residual(const Vector& y, const Vector& mu) const;
  void residual_and_jacobian(const Vector& y, const Vector& mu, Vector& r, Matrix& jac) const;
  double qoi(const Vector& y, const Vector& mu) const;
  Vector qoi_state_gradient(const Vector& y, const Vector& mu) const;
  Matrix param_jacobian(const Vector& y, const Vector& mu) const;

  ReducedPrimal solve_primal(const Vector& mu, const Vector& guess,
                             const ReducedNewtonConfig& cfg = {}) const;
  Vector solve_adjoint(const Vector& mu, const Vector& y) const;
  Matrix solve_sensitivity(const Vector& mu, const Vector& y) const;
  Vector gradient(const Vector& mu, const Vector& y, const Vector& lambda) const;
  ReducedObjective objective_and_gradient(const Vector& mu, const Vector& guess,
                                          const ReducedNewtonConfig& cfg = {}) const;

 private:
  double weight(Index e) const { return weights_ ? weights_->values()[e] : 1.0; }
  void element_state(Index e, const Vector& y, Vector& ue, Vector& unb) const;
  template <class F>
  void for_each_active(F&& f) const;

  const UnassembledSystem& sys_;
  const ReducedBasis& basis_;
  std::optional<WeightVector> weights_;
  bool structural_;
  // reduced quadratic QoI: 1/2 y^T Mr y + y^T g + c
  Matrix qoi_mass_;
  Vector qoi_lin_;
  double qoi_const_ = 0.0;
};

// Convenience wrappers for the unweighted model.
ReducedPrimal rom_solve_primal(const UnassembledSystem& sys, const ReducedBasis& basis,
                               const Vector& mu, const Vector& guess,
                               const ReducedNewtonConfig& cfg = {});
Vector rom_solve_adjoint(const UnassembledSystem& sys, const ReducedBasis& basis, const Vector& mu,
                         const Vector& y);
Matrix rom_solve_sensitivity(const UnassembledSystem& sys, const ReducedBasis& basis,
                             const Vector& mu, const Vector& y);
Vector rom_gradient(const UnassembledSystem& sys, const ReducedBasis& basis, const Vector& mu,
                    const Vector& y, const Vector& lambda);

}  // namespace eqptr
