#pragma once

#include "eqptr/system.hpp"

#include <memory>

namespace eqptr {

// Steady viscous Burgers on [0,1] with P1 elements, Dirichlet values
// u(0) = left, u(1) = right, and source s(x) = sum_i mu_i sin((i+1) pi x).
// The QoI tracks a target state: 1/2 int (u - u_tgt)^2.
class BurgersProblem : public UnassembledSystem {
 public:
  BurgersProblem(Index n_elems, double nu, Index n_mu, double left = 1.0, double right = 0.0);

  Index num_states() const override { return n_elems_ - 1; }
  Index num_params() const override { return n_mu_; }
  const ElementConnectivity& connectivity() const override { return conn_; }
  const QuadraticQoi* quadratic_qoi() const override { return &qoi_; }

  void set_target(const Vector& u_target);
  const Vector& target() const { return qoi_.target; }
  double viscosity() const { return nu_; }
  double node_x(Index node) const { return double(node) / double(n_elems_); }

 protected:
  void do_evaluate(Index e, const Vector& ue, const Vector& ue_nb, const Vector& mu,
                   unsigned flags, ElementEval& out) const override;

 private:
  Index n_elems_;
  double nu_;
  Index n_mu_;
  double left_, right_;
  ElementConnectivity conn_;
  QuadraticQoi qoi_;
};

struct BurgersSetup {
  std::unique_ptr<BurgersProblem> system;
  Vector mu0;
  Vector mu_target;
};

Vector default_burgers_target(Index n_mu);

// Target state generated by solving at target_mu, so f(target_mu) = 0.
// The starting point is mu0 = 0.
BurgersSetup make_burgers(Index n_elems = 128, double nu = 0.1, Index n_mu = 4,
                          std::optional<Vector> target_mu = std::nullopt);

}  // namespace eqptr
