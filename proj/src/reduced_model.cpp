#include "eqptr/reduced_model.hpp"

#include <cmath>
#include <sstream>

namespace eqptr {

WeightVector::WeightVector(Vector rho) : rho_(std::move(rho)) {
  require(rho_.allFinite(), "weights must be finite");
  require((rho_.array() >= 0.0).all(), "weights must be nonnegative");
  for (Index e = 0; e < rho_.size(); ++e)
    if (rho_[e] > 0.0) active_.push_back(e);
}

Index kind_length(ReducedKind kind, Index n, Index n_mu) {
  switch (kind) {
    case ReducedKind::residual:
    case ReducedKind::adjoint_residual:
      return n;
    case ReducedKind::qoi:
      return 1;
    case ReducedKind::gradient_recon:
      return n_mu;
    case ReducedKind::sensitivity_residual:
      return n * n_mu;
  }
  return 0;
}

ReducedModel::ReducedModel(const UnassembledSystem& sys, const ReducedBasis& basis,
                           std::optional<WeightVector> weights, bool structural_qoi)
    : sys_(sys), basis_(basis), weights_(std::move(weights)), structural_(structural_qoi) {
  require(basis.num_states() == sys.num_states(), "basis does not match the system");
  require(basis.size() >= 1, "reduced basis is empty");
  if (weights_) require(weights_->size() == sys.num_elements(), "weight vector has wrong length");
  if (structural_) {
    const QuadraticQoi* q = sys.quadratic_qoi();
    require(q != nullptr, "structural QoI mode needs a quadratic QoI");
    const Matrix& phi = basis.phi();
    const Matrix mphi = q->mass * phi;
    qoi_mass_ = phi.transpose() * mphi;
    const Vector d = basis.offset() - q->target;
    const Vector md = q->mass * d;
    qoi_lin_ = phi.transpose() * md;
    qoi_const_ = 0.5 * d.dot(md);
  }
}

void ReducedModel::element_state(Index e, const Vector& y, Vector& ue, Vector& unb) const {
  ue = basis_.element_offset(e) + basis_.element_phi(e) * y;
  unb = basis_.element_offset_nb(e) + basis_.element_phi_nb(e) * y;
}

template <class F>
void ReducedModel::for_each_active(F&& f) const {
  if (weights_) {
    const Vector& rho = weights_->values();
    for (Index e : weights_->active()) f(e, rho[e]);
  } else {
    for (Index e = 0; e < sys_.num_elements(); ++e) f(e, 1.0);
  }
}

Vector ReducedModel::element_contribution(Index e, ReducedKind kind, const Vector& y,
                                          const Vector& mu, const ReducedAux& aux) const {
  require(y.size() == size(), "reduced state has wrong length");
  require(mu.size() == sys_.num_params(), "parameter has wrong length");
  const Index n = size();
  const Index nmu = sys_.num_params();
  const Matrix& pe = basis_.element_phi(e);
  const Matrix& pnb = basis_.element_phi_nb(e);
  Vector ue, unb;
  element_state(e, y, ue, unb);
  ElementEval ev;

  switch (kind) {
    case ReducedKind::residual: {
      sys_.evaluate(e, ue, unb, mu, kResidual, ev);
      check_element_finite(e, kResidual, ev);
      return pe.transpose() * ev.residual;
    }
    case ReducedKind::adjoint_residual: {
      require(aux.lambda != nullptr, "adjoint residual needs the reduced adjoint");
      const unsigned flags = kStateJacobian | (structural_ ? 0u : unsigned(kQoiGradient));
      sys_.evaluate(e, ue, unb, mu, flags, ev);
      check_element_finite(e, flags, ev);
      const Vector z = pe * *aux.lambda;
      Vector out = pe.transpose() * (ev.dr_du.transpose() * z);
      if (pnb.rows() > 0) out += pnb.transpose() * (ev.dr_dunb.transpose() * z);
      if (!structural_) out -= pe.transpose() * ev.dq_du;
      return out;
    }
    case ReducedKind::qoi: {
      Vector out = Vector::Zero(1);
      if (structural_) return out;
      sys_.evaluate(e, ue, unb, mu, kQoi, ev);
      check_element_finite(e, kQoi, ev);
      out[0] = ev.qoi;
      return out;
    }
    case ReducedKind::gradient_recon: {
      require(aux.lambda != nullptr, "gradient reconstruction needs the reduced adjoint");
      const unsigned flags = kParamJacobian | (structural_ ? 0u : unsigned(kQoiGradient));
      sys_.evaluate(e, ue, unb, mu, flags, ev);
      check_element_finite(e, flags, ev);
      Vector out = -(ev.dr_dmu.transpose() * (pe * *aux.lambda));
      if (!structural_) out += ev.dq_dmu;
      return out;
    }
    case ReducedKind::sensitivity_residual: {
      require(aux.sensitivity != nullptr, "sensitivity residual needs the reduced sensitivity");
      require(aux.sensitivity->rows() == n && aux.sensitivity->cols() == nmu,
              "reduced sensitivity has wrong shape");
      const unsigned flags = kStateJacobian | kParamJacobian;
      sys_.evaluate(e, ue, unb, mu, flags, ev);
      check_element_finite(e, flags, ev);
      Matrix m = ev.dr_du * (pe * *aux.sensitivity) + ev.dr_dmu;
      if (pnb.rows() > 0) m += ev.dr_dunb * (pnb * *aux.sensitivity);
      const Matrix red = pe.transpose() * m;
      Vector out(n * nmu);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < nmu; ++j) out[i * nmu + j] = red(i, j);
      return out;
    }
  }
  return Vector();
}

Vector ReducedModel::constant_term(ReducedKind kind, const Vector& y, const Vector& /*mu*/,
                                   const ReducedAux& /*aux*/) const {
  const Vector zero = Vector::Zero(kind_length(kind, size(), sys_.num_params()));
  if (!structural_) return zero;
  if (kind == ReducedKind::qoi) {
    Vector out(1);
    out[0] = 0.5 * y.dot(qoi_mass_ * y) + y.dot(qoi_lin_) + qoi_const_;
    return out;
  }
  if (kind == ReducedKind::adjoint_residual) return -(qoi_mass_ * y + qoi_lin_);
  return zero;
}

Vector ReducedModel::evaluate(ReducedKind kind, const Vector& y, const Vector& mu,
                              const ReducedAux& aux) const {
  Vector out = Vector::Zero(kind_length(kind, size(), sys_.num_params()));
  for_each_active([&](Index e, double w) { out += w * element_contribution(e, kind, y, mu, aux); });
  out += constant_term(kind, y, mu, aux);
  return out;
}

Vector ReducedModel::residual(const Vector& y, const Vector& mu) const {
  return evaluate(ReducedKind::residual, y, mu);
}

void ReducedModel::residual_and_jacobian(const Vector& y, const Vector& mu, Vector& r,
                                         Matrix& jac) const {
  require(y.size() == size() && mu.size() == sys_.num_params(), "reduced evaluation size mismatch");
  const Index n = size();
  r = Vector::Zero(n);
  jac = Matrix::Zero(n, n);
  Vector ue, unb;
  ElementEval ev;
  for_each_active([&](Index e, double w) {
    element_state(e, y, ue, unb);
    sys_.evaluate(e, ue, unb, mu, kResidual | kStateJacobian, ev);
    check_element_finite(e, kResidual | kStateJacobian, ev);
    const Matrix& pe = basis_.element_phi(e);
    const Matrix& pnb = basis_.element_phi_nb(e);
    r += w * (pe.transpose() * ev.residual);
    Matrix je = ev.dr_du * pe;
    if (pnb.rows() > 0) je += ev.dr_dunb * pnb;
    jac += w * (pe.transpose() * je);
  });
}

double ReducedModel::qoi(const Vector& y, const Vector& mu) const {
  return evaluate(ReducedKind::qoi, y, mu)[0];
}

Vector ReducedModel::qoi_state_gradient(const Vector& y, const Vector& mu) const {
  if (structural_) return qoi_mass_ * y + qoi_lin_;
  Vector g = Vector::Zero(size());
  Vector ue, unb;
  ElementEval ev;
  for_each_active([&](Index e, double w) {
    element_state(e, y, ue, unb);
    sys_.evaluate(e, ue, unb, mu, kQoiGradient, ev);
    check_element_finite(e, kQoiGradient, ev);
    g += w * (basis_.element_phi(e).transpose() * ev.dq_du);
  });
  return g;
}

Matrix ReducedModel::param_jacobian(const Vector& y, const Vector& mu) const {
  Matrix out = Matrix::Zero(size(), sys_.num_params());
  Vector ue, unb;
  ElementEval ev;
  for_each_active([&](Index e, double w) {
    element_state(e, y, ue, unb);
    sys_.evaluate(e, ue, unb, mu, kParamJacobian, ev);
    check_element_finite(e, kParamJacobian, ev);
    out += w * (basis_.element_phi(e).transpose() * ev.dr_dmu);
  });
  return out;
}

namespace {

Eigen::PartialPivLU<Matrix> factor_reduced(const Matrix& jac, bool weighted) {
  Eigen::PartialPivLU<Matrix> lu(jac);
  const double rc = jac.size() ? lu.rcond() : 0.0;
  if (!(rc > 1e-14)) {
    std::ostringstream os;
    os << "singular " << (weighted ? "weighted " : "") << "reduced Jacobian (rcond " << rc << ")";
    if (weighted) throw SolverFailure(os.str(), {});
    throw LinearAlgebraError(os.str());
  }
  return lu;
}

}  // namespace

ReducedPrimal ReducedModel::solve_primal(const Vector& mu, const Vector& guess,
                                         const ReducedNewtonConfig& cfg) const {
  require(guess.size() == size(), "reduced guess has wrong length");
  require(guess.allFinite(), "reduced guess is not finite");
  ReducedPrimal sol;
  sol.y = guess;
  Vector r;
  Matrix jac;
  residual_and_jacobian(sol.y, mu, r, jac);
  double rn = r.norm();
  sol.residual_history.push_back(rn);
  int polished = 0;

  for (;;) {
    const bool converged = rn <= cfg.abs_tol;
    if (converged && polished >= cfg.polish_iters) break;
    if (sol.iterations >= cfg.max_iters) {
      if (converged) break;
      std::ostringstream os;
      os << "reduced Newton did not converge (residual " << rn << ")";
      throw SolverFailure(os.str(), sol.residual_history);
    }
    Eigen::PartialPivLU<Matrix> lu;
    try {
      lu = factor_reduced(jac, weighted());
    } catch (const std::exception&) {
      if (converged) break;
      throw;
    }
    const Vector step = lu.solve(-r);
    double alpha = 1.0;
    bool ok = false;
    Vector yt, rt;
    Matrix jt;
    double tn = 0.0;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      yt = sol.y + alpha * step;
      try {
        residual_and_jacobian(yt, mu, rt, jt);
        tn = rt.norm();
      } catch (const NumericError&) {
        tn = std::numeric_limits<double>::infinity();
      }
      if (tn < rn) {
        ok = true;
        break;
      }
      if (converged) break;  // no backtracking while polishing
      alpha *= 0.5;
    }
    if (!ok) {
      if (converged) break;
      std::ostringstream os;
      os << "reduced Newton line search failed (residual " << rn << ")";
      throw SolverFailure(os.str(), sol.residual_history);
    }
    ++sol.iterations;
    const bool small_gain = converged && tn > cfg.polish_factor * rn;
    sol.y = std::move(yt);
    r = std::move(rt);
    jac = std::move(jt);
    rn = tn;
    sol.residual_history.push_back(rn);
    if (converged) ++polished;
    if (small_gain) break;
  }
  return sol;
}

Vector ReducedModel::solve_adjoint(const Vector& mu, const Vector& y) const {
  Vector r;
  Matrix jac;
  residual_and_jacobian(y, mu, r, jac);
  const Vector rhs = qoi_state_gradient(y, mu);
  const Matrix jt = jac.transpose();
  return factor_reduced(jt, weighted()).solve(rhs);
}

Matrix ReducedModel::solve_sensitivity(const Vector& mu, const Vector& y) const {
  Vector r;
  Matrix jac;
  residual_and_jacobian(y, mu, r, jac);
  return factor_reduced(jac, weighted()).solve(Matrix(-param_jacobian(y, mu)));
}

Vector ReducedModel::gradient(const Vector& mu, const Vector& y, const Vector& lambda) const {
  ReducedAux aux;
  aux.lambda = &lambda;
  return evaluate(ReducedKind::gradient_recon, y, mu, aux);
}

ReducedObjective ReducedModel::objective_and_gradient(const Vector& mu, const Vector& guess,
                                                      const ReducedNewtonConfig& cfg) const {
  ReducedPrimal p = solve_primal(mu, guess, cfg);
  ReducedObjective out;
  out.lambda = solve_adjoint(mu, p.y);
  out.grad = gradient(mu, p.y, out.lambda);
  out.f = qoi(p.y, mu);
  out.y = std::move(p.y);
  out.iterations = p.iterations;
  return out;
}

ReducedPrimal rom_solve_primal(const UnassembledSystem& sys, const ReducedBasis& basis,
                               const Vector& mu, const Vector& guess,
                               const ReducedNewtonConfig& cfg) {
  return ReducedModel(sys, basis).solve_primal(mu, guess, cfg);
}

Vector rom_solve_adjoint(const UnassembledSystem& sys, const ReducedBasis& basis, const Vector& mu,
                         const Vector& y) {
  return ReducedModel(sys, basis).solve_adjoint(mu, y);
}

Matrix rom_solve_sensitivity(const UnassembledSystem& sys, const ReducedBasis& basis,
                             const Vector& mu, const Vector& y) {
  return ReducedModel(sys, basis).solve_sensitivity(mu, y);
}

Vector rom_gradient(const UnassembledSystem& sys, const ReducedBasis& basis, const Vector& mu,
                    const Vector& y, const Vector& lambda) {
  return ReducedModel(sys, basis).gradient(mu, y, lambda);
}

}  // namespace eqptr
