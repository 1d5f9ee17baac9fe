#include "eqptr/burgers.hpp"
#include "eqptr/hdm.hpp"
#include "eqptr/shape_diffusion.hpp"
#include "oracles.hpp"
#include "toy_systems.hpp"

#include <gtest/gtest.h>

using namespace eqptr;
using namespace eqptr::testing;

TEST(Newton, LinearSystemTakesOneIteration) {
  LinearChain sys(10, 2);
  const Vector mu = Vector::Constant(2, 0.3);
  const PrimalSolution s = solve_primal(sys, mu, Vector::Zero(10));
  EXPECT_EQ(s.iterations, 1);
  const Vector exact = sys.dense_A().lu().solve(sys.dense_B() * mu + sys.dense_c());
  EXPECT_LE((s.u - exact).norm(), 1e-12);
}

TEST(Newton, CubicRoot) {
  CubicScalar sys;
  const PrimalSolution s = solve_primal(sys, Vector::Constant(1, 8.0), Vector::Constant(1, 3.0));
  EXPECT_NEAR(s.u[0], 2.0, 1e-10);
}

TEST(Newton, ExactGuessNeedsNoIterations) {
  CubicScalar sys;
  const PrimalSolution s = solve_primal(sys, Vector::Constant(1, 8.0), Vector::Constant(1, 2.0));
  EXPECT_EQ(s.iterations, 0);
}

TEST(Newton, QuadraticConvergenceOnCubic) {
  CubicScalar sys;
  NewtonConfig cfg;
  cfg.abs_tol = 1e-14;
  const PrimalSolution s = solve_primal(sys, Vector::Constant(1, 8.0), Vector::Constant(1, 3.0), cfg);
  const auto& h = s.residual_history;
  ASSERT_GE(h.size(), 4u);
  // the local constant r_{k+1} / r_k^2 stays bounded once in the basin
  for (std::size_t k = h.size() - 3; k + 1 < h.size(); ++k) {
    if (h[k] < 1e-8 || h[k + 1] == 0.0) continue;
    EXPECT_LE(h[k + 1] / (h[k] * h[k]), 1.0);
  }
}

TEST(Newton, IterationLimitCarriesLastResidual) {
  CubicScalar sys;
  NewtonConfig cfg;
  cfg.max_iters = 1;
  try {
    solve_primal(sys, Vector::Constant(1, 8.0), Vector::Constant(1, 30.0), cfg);
    FAIL() << "expected SolverFailure";
  } catch (const SolverFailure& e) {
    EXPECT_GT(e.last_residual(), 1e-6);
    EXPECT_EQ(e.history().size(), 2u);
  }
}

TEST(Newton, SingularJacobianIsLinearAlgebraError) {
  CubicScalar sys;
  EXPECT_THROW(solve_primal(sys, Vector::Constant(1, 8.0), Vector::Zero(1)), LinearAlgebraError);
}

TEST(Newton, PseudoTransientNeverIncreasesResidual) {
  auto setup = make_burgers(64, 0.05, 4);
  NewtonConfig cfg;
  cfg.continuation = Continuation::pseudo_transient;
  cfg.ptc_initial_step = 0.1;
  const Vector mu = Vector::Constant(4, 2.0);
  const PrimalSolution s = solve_primal(*setup.system, mu, Vector::Zero(setup.system->num_states()), cfg);
  for (std::size_t k = 1; k < s.residual_history.size(); ++k)
    EXPECT_LE(s.residual_history[k], s.residual_history[k - 1]);
  EXPECT_LE(assemble_residual(*setup.system, s.u, mu).norm(), 1e-10);
}

TEST(Newton, RejectsNonFiniteGuessAndBadConfig) {
  CubicScalar sys;
  EXPECT_THROW(solve_primal(sys, Vector::Constant(1, 8.0),
                            Vector::Constant(1, std::numeric_limits<double>::infinity())),
               ContractViolation);
  NewtonConfig cfg;
  cfg.abs_tol = 0;
  EXPECT_THROW(solve_primal(sys, Vector::Constant(1, 8.0), Vector::Constant(1, 3.0), cfg),
               ContractViolation);
}

TEST(Adjoint, QoiIndependentOfStateGivesZero) {
  struct ParamQoi : LinearChain {
    ParamQoi() : LinearChain(6, 1) {}
   protected:
    void do_evaluate(Index e, const Vector& ue, const Vector& unb, const Vector& mu, unsigned flags,
                     ElementEval& out) const override {
      LinearChain::do_evaluate(e, ue, unb, mu, flags, out);
      if (flags & kQoi) out.qoi = mu.squaredNorm();
      if (flags & kQoiGradient) {
        out.dq_du.setZero();
        out.dq_dmu = 2 * mu;
      }
    }
  } sys;
  const Vector mu = Vector::Constant(1, 0.5);
  const Vector u = solve_primal(sys, mu, Vector::Zero(6)).u;
  EXPECT_EQ(solve_adjoint(sys, u, mu), Vector::Zero(6));
}

TEST(Adjoint, SymmetricJacobianMatchesDenseSolve) {
  LinearChain sys(12, 2);
  const Vector mu = Vector::Constant(2, 0.7);
  const Vector u = solve_primal(sys, mu, Vector::Zero(12)).u;
  const Vector lambda = solve_adjoint(sys, u, mu);
  const Vector ref = sys.dense_A().ldlt().solve(u);
  EXPECT_LE((lambda - ref).norm(), 1e-12);
  EXPECT_LE(adjoint_residual(sys, lambda, u, mu).norm(), 1e-10);
}

TEST(Sensitivity, MuIndependentResidualGivesZero) {
  struct Frozen : LinearChain {
    Frozen() : LinearChain(5, 2) {}
   protected:
    void do_evaluate(Index e, const Vector& ue, const Vector& unb, const Vector&, unsigned flags,
                     ElementEval& out) const override {
      LinearChain::do_evaluate(e, ue, unb, Vector::Zero(2), flags, out);
      if (flags & kParamJacobian) out.dr_dmu.setZero();
    }
  } sys;
  const Vector u = solve_primal(sys, Vector::Ones(2), Vector::Zero(5)).u;
  EXPECT_EQ(solve_sensitivity(sys, u, Vector::Ones(2)), Matrix::Zero(5, 2));
}

TEST(Sensitivity, MatchesFiniteDifferenceOfPrimal) {
  auto setup = make_burgers(48, 0.1, 4);
  const auto& sys = *setup.system;
  const Vector mu = (Vector(4) << 0.4, -0.3, 0.2, 0.1).finished();
  const Vector u = solve_primal(sys, mu, Vector::Zero(sys.num_states())).u;
  const Matrix du = solve_sensitivity(sys, u, mu);
  const double h = 1e-6;
  for (Index i = 0; i < 4; ++i) {
    Vector mp = mu, mm = mu;
    mp[i] += h;
    mm[i] -= h;
    const Vector col = (solve_primal(sys, mp, u).u - solve_primal(sys, mm, u).u) / (2 * h);
    EXPECT_LE(rel_err(du.col(i), col), 1e-5) << "parameter " << i;
  }
  EXPECT_LE(sensitivity_residual(sys, du, u, mu).norm(), 1e-10);
}

TEST(Gradient, ToyChainClosedForm) {
  ToyChain sys;
  const ObjectiveGradient og = objective_and_gradient(sys, Vector::Constant(1, 1.0));
  EXPECT_NEAR(og.f, 1.0, 1e-12);
  EXPECT_NEAR(og.grad[0], 4.0, 1e-10);
}

namespace {

void check_gradient_and_duality(const UnassembledSystem& sys, const Vector& mu) {
  const ObjectiveGradient og = objective_and_gradient(sys, mu);
  auto f = [&](const Vector& m) { return objective_and_gradient(sys, m, {}, &og.u).f; };
  const Vector fd = fd_gradient(f, mu, 1e-7);
  EXPECT_LE(rel_err(og.grad, fd), 1e-6);
  // sensitivity form of the same gradient
  LinearizedState lin(sys, og.u, mu);
  const Matrix du = lin.solve_sensitivity();
  const Vector sens_grad = lin.qoi_derivatives().dmu + du.transpose() * lin.qoi_derivatives().du;
  EXPECT_LE((og.grad - sens_grad).norm(), 1e-10 * std::max(1.0, og.grad.norm()));
}

}  // namespace

TEST(Gradient, BurgersMatchesFiniteDifferencesAndSensitivities) {
  auto setup = make_burgers(64, 0.1, 4);
  std::mt19937 rng(7);
  for (int k = 0; k < 3; ++k) check_gradient_and_duality(*setup.system, random_vector(rng, 4));
}

TEST(Gradient, ShapeMatchesFiniteDifferencesAndSensitivities) {
  ShapeMeshSpec spec;
  spec.nx = 8;
  spec.ny = 8;
  auto setup = make_shape_diffusion(spec, 3, 1e-3);
  std::mt19937 rng(8);
  for (int k = 0; k < 3; ++k)
    check_gradient_and_duality(*setup.system, random_vector(rng, 3, -0.5, 0.5));
}

TEST(Gradient, NeighborChainMatchesFiniteDifferences) {
  NeighborChain sys(20, 3);
  check_gradient_and_duality(sys, (Vector(3) << 0.3, -0.2, 0.5).finished());
}
