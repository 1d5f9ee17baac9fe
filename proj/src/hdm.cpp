#include "eqptr/hdm.hpp"

#include <cmath>
#include <sstream>

namespace eqptr {

void NewtonConfig::validate() const {
  require(abs_tol > 0 && rel_tol > 0, "Newton tolerances must be positive");
  require(max_iters >= 1, "Newton max_iters must be at least 1");
  require(ptc_initial_step > 0, "pseudo-transient initial step must be positive");
}

namespace {

Eigen::SparseLU<SparseMatrix>& factorize(Eigen::SparseLU<SparseMatrix>& lu, const SparseMatrix& a) {
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw LinearAlgebraError("singular Jacobian: " + lu.lastErrorMessage());
  return lu;
}

}  // namespace

PrimalSolution solve_primal(const UnassembledSystem& sys, const Vector& mu, const Vector& guess,
                            const NewtonConfig& cfg) {
  cfg.validate();
  require(guess.allFinite(), "initial guess is not finite");
  check_dimensions(sys, guess, mu);

  PrimalSolution sol;
  sol.u = guess;
  Vector r = assemble_residual(sys, sol.u, mu);
  double rnorm = r.norm();
  sol.residual_history.push_back(rnorm);
  const double tol = std::max(cfg.abs_tol, cfg.rel_tol * rnorm);

  JacobianAssembler jac(sys);
  Eigen::SparseLU<SparseMatrix> lu;
  bool analyzed = false;
  double tau = cfg.ptc_initial_step;
  const bool ptc = cfg.continuation == Continuation::pseudo_transient;
  SparseMatrix shift;
  if (ptc) {
    shift.resize(sys.num_states(), sys.num_states());
    shift.setIdentity();
  }

  while (rnorm > tol) {
    if (sol.iterations >= cfg.max_iters) {
      std::ostringstream os;
      os << "Newton did not converge in " << cfg.max_iters << " iterations (residual " << rnorm << ")";
      throw SolverFailure(os.str(), sol.residual_history);
    }
    SparseMatrix a = jac.assemble(sol.u, mu);
    if (ptc) a += (1.0 / tau) * shift;
    if (!analyzed) {
      lu.analyzePattern(a);
      analyzed = true;
    }
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw LinearAlgebraError("singular Jacobian in Newton solve");
    const Vector step = lu.solve(-r);
    if (!step.allFinite()) throw LinearAlgebraError("non-finite Newton step");

    double alpha = 1.0;
    Vector trial;
    Vector rt;
    double tnorm = 0.0;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      trial = sol.u + alpha * step;
      try {
        rt = assemble_residual(sys, trial, mu);
        tnorm = rt.norm();
      } catch (const NumericError&) {
        tnorm = std::numeric_limits<double>::infinity();
      }
      if (tnorm < rnorm || (tnorm <= rnorm && tnorm <= tol)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++sol.iterations;
    if (!accepted) {
      if (ptc) {
        // shrink the pseudo time step and retry from the same state
        tau *= 0.25;
        sol.residual_history.push_back(rnorm);
        continue;
      }
      std::ostringstream os;
      os << "Newton line search failed (residual " << rnorm << ")";
      throw SolverFailure(os.str(), sol.residual_history);
    }
    sol.u = std::move(trial);
    r = std::move(rt);
    rnorm = tnorm;
    sol.residual_history.push_back(rnorm);
    if (ptc) tau *= 2.0;
  }
  return sol;
}

LinearizedState::LinearizedState(const UnassembledSystem& sys, const Vector& u, const Vector& mu)
    : sys_(sys), u_(u), mu_(mu) {
  jac_ = assemble_jacobian(sys, u, mu);
  factorize(lu_, jac_);
  dq_ = assemble_qoi_derivatives(sys, u, mu);
}

const Matrix& LinearizedState::param_jacobian() const {
  if (!have_dr_dmu_) {
    dr_dmu_ = assemble_param_jacobian(sys_, u_, mu_);
    have_dr_dmu_ = true;
  }
  return dr_dmu_;
}

Vector LinearizedState::solve_adjoint() const {
  if (dq_.du.isZero(0.0)) return Vector::Zero(sys_.num_states());
  Vector lambda = lu_.transpose().solve(dq_.du);
  if (!lambda.allFinite()) throw LinearAlgebraError("non-finite adjoint solution");
  return lambda;
}

Matrix LinearizedState::solve_sensitivity() const {
  const Matrix& b = param_jacobian();
  if (b.isZero(0.0)) return Matrix::Zero(sys_.num_states(), sys_.num_params());
  Matrix du = lu_.solve(Matrix(-b));
  if (!du.allFinite()) throw LinearAlgebraError("non-finite sensitivity solution");
  return du;
}

Vector LinearizedState::adjoint_gradient(const Vector& lambda) const {
  return dq_.dmu - param_jacobian().transpose() * lambda;
}

Vector solve_adjoint(const UnassembledSystem& sys, const Vector& u_star, const Vector& mu) {
  return LinearizedState(sys, u_star, mu).solve_adjoint();
}

Matrix solve_sensitivity(const UnassembledSystem& sys, const Vector& u_star, const Vector& mu) {
  return LinearizedState(sys, u_star, mu).solve_sensitivity();
}

Vector adjoint_residual(const UnassembledSystem& sys, const Vector& lambda, const Vector& u,
                        const Vector& mu) {
  const SparseMatrix j = assemble_jacobian(sys, u, mu);
  return j.transpose() * lambda - assemble_qoi_derivatives(sys, u, mu).du;
}

Matrix sensitivity_residual(const UnassembledSystem& sys, const Matrix& du, const Vector& u,
                            const Vector& mu) {
  const SparseMatrix j = assemble_jacobian(sys, u, mu);
  return j * du + assemble_param_jacobian(sys, u, mu);
}

ObjectiveGradient objective_and_gradient(const UnassembledSystem& sys, const Vector& mu,
                                         const NewtonConfig& cfg, const Vector* guess) {
  const Vector u0 = guess ? *guess : Vector::Zero(sys.num_states());
  PrimalSolution p = solve_primal(sys, mu, u0, cfg);
  LinearizedState lin(sys, p.u, mu);
  ObjectiveGradient out;
  out.lambda = lin.solve_adjoint();
  out.grad = lin.adjoint_gradient(out.lambda);
  out.f = assemble_qoi(sys, p.u, mu);
  out.u = std::move(p.u);
  out.newton_iterations = p.iterations;
  return out;
}

}  // namespace eqptr
