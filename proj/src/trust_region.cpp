#include "eqptr/trust_region.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace eqptr {

void TrConfig::validate() const {
  require(0 < eta1 && eta1 < eta2 && eta2 < 1, "need 0 < eta1 < eta2 < 1");
  require(0 < gamma1 && gamma1 <= gamma2 && gamma2 <= 1, "need 0 < gamma1 <= gamma2 <= 1");
  require(0 < delta0 && delta0 <= delta_max, "need 0 < delta0 <= delta_max");
  require(kappa_ratio > 0, "kappa must be positive");
  for (double w : kappa_weights) require(w > 0, "kappa weights must be positive");
  require(fd_step > 0, "finite-difference step must be positive");
  require(max_iters >= 0, "max_iters must be nonnegative");
  require(grad_stop >= 0, "grad_stop must be nonnegative");
  require(cg_tol > 0, "cg_tol must be positive");
}

ToleranceSet default_fixed_tolerances() {
  ToleranceSet t;
  t.dv = 1e-4;
  t.q = 1e-6;
  t.rs = 1e-3;
  return t;
}

ToleranceSet tolerance_schedule(const TrConfig& cfg, double lagged_grad_norm, double radius,
                                const ToleranceSet& fixed) {
  require(lagged_grad_norm >= 0, "lagged gradient norm must be nonnegative");
  const double base = cfg.kappa_ratio / 3.0 * std::min(lagged_grad_norm, radius);
  ToleranceSet t = fixed;
  t.rp = cfg.kappa_weights[0] * base;
  t.ra = cfg.kappa_weights[1] * base;
  t.ga = cfg.kappa_weights[2] * base;
  return t;
}

Vector hessvec_fd(const GradientOracle& grad, const Vector& mu, const Vector& grad_mu,
                  const Vector& v, double eps) {
  const double nv = v.norm();
  require(nv > 0, "Hessian-vector product needs a nonzero direction");
  require(eps > 0, "finite-difference step must be positive");
  const Vector gp = grad(mu + (eps / nv) * v);
  return (gp - grad_mu) * (nv / eps);
}

QuadraticModel::QuadraticModel(Vector center, double value, Vector gradient, GradientOracle grad,
                               double fd_step)
    : center_(std::move(center)),
      value_(value),
      gradient_(std::move(gradient)),
      grad_(std::move(grad)),
      eps_(fd_step) {}

Vector QuadraticModel::hessvec(const Vector& v) const {
  if (v.norm() == 0.0) return Vector::Zero(v.size());
  ++count_;
  return hessvec_fd(grad_, center_, gradient_, v, eps_);
}

std::string to_string(SteihaugExit e) {
  switch (e) {
    case SteihaugExit::zero_gradient: return "zero_gradient";
    case SteihaugExit::converged: return "converged";
    case SteihaugExit::negative_curvature: return "negative_curvature";
    case SteihaugExit::boundary: return "boundary";
    case SteihaugExit::max_iters: return "max_iters";
  }
  return "?";
}

namespace {

// tau >= 0 with |s + tau p| = radius, for |s| <= radius
double to_boundary(const Vector& s, const Vector& p, double radius) {
  const double a = p.squaredNorm();
  const double b = 2.0 * s.dot(p);
  const double c = std::min(0.0, s.squaredNorm() - radius * radius);
  const double disc = std::sqrt(b * b - 4.0 * a * c);
  return b > 0 ? (-2.0 * c) / (b + disc) : (-b + disc) / (2.0 * a);
}

// put the step exactly on the sphere
void snap_to_radius(Vector& s, Vector& hs, double radius) {
  const double ns = s.norm();
  if (ns > 0) {
    const double f = radius / ns;
    s *= f;
    hs *= f;
  }
}

}  // namespace

SteihaugResult steihaug_solve(const Vector& g, const HessVecFn& hv, double radius, double cg_tol,
                              int max_cg) {
  require(radius > 0, "trust radius must be positive");
  const Index n = g.size();
  SteihaugResult out;
  out.step = Vector::Zero(n);
  out.hstep = Vector::Zero(n);
  const double gnorm = g.norm();
  if (gnorm == 0.0) {
    out.exit = SteihaugExit::zero_gradient;
    return out;
  }
  if (max_cg <= 0) max_cg = static_cast<int>(2 * n);
  Vector& s = out.step;
  Vector& hs = out.hstep;
  Vector r = g;
  Vector p = -g;
  double rr = r.squaredNorm();
  out.exit = SteihaugExit::max_iters;
  for (int j = 0; j < max_cg; ++j) {
    const Vector hp = hv(p);
    if (j == 0) out.hg = hp;
    ++out.iterations;
    const double curv = p.dot(hp);
    if (curv <= 0) {
      const double tau = to_boundary(s, p, radius);
      s += tau * p;
      hs += tau * hp;
      snap_to_radius(s, hs, radius);
      out.exit = SteihaugExit::negative_curvature;
      break;
    }
    const double alpha = rr / curv;
    if ((s + alpha * p).norm() >= radius) {
      const double tau = to_boundary(s, p, radius);
      s += tau * p;
      hs += tau * hp;
      snap_to_radius(s, hs, radius);
      out.exit = SteihaugExit::boundary;
      break;
    }
    s += alpha * p;
    hs += alpha * hp;
    r += alpha * hp;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= cg_tol * gnorm) {
      out.exit = SteihaugExit::converged;
      break;
    }
    p = -r + (rr_new / rr) * p;
    rr = rr_new;
  }
  out.predicted = -(g.dot(s) + 0.5 * s.dot(hs));
  // Guard the Cauchy decrease: with finite-difference products the
  // Krylov quadratic is only nearly symmetric.
  const double cd = cauchy_decrease(g, out.hg, radius);
  if (out.predicted < cd) {
    const double curv = gnorm * gnorm > 0 ? -g.dot(out.hg) : 0.0;
    double t = radius / gnorm;
    if (curv > 0) t = std::min(gnorm * gnorm / curv, t);
    s = -t * g;
    hs = t * out.hg;
    out.predicted = -(g.dot(s) + 0.5 * s.dot(hs));
    if (out.predicted < cd) out.predicted = cd;
  }
  return out;
}

double cauchy_decrease(const Vector& g, const Vector& h_minus_g, double radius) {
  const double gg = g.squaredNorm();
  if (gg == 0.0) return 0.0;
  const double gn = std::sqrt(gg);
  const double curv = -g.dot(h_minus_g);  // (-g)^T H (-g)
  double t = radius / gn;
  if (curv > 0) t = std::min(gg / curv, t);
  return t * gg - 0.5 * t * t * curv;
}

double reduction_ratio(double f_center, double f_candidate, double m_center, double m_candidate) {
  const double pred = m_center - m_candidate;
  if (!(std::abs(pred) > 1e-15 * std::abs(m_center)) || pred == 0.0)
    throw DegenerateModel("model predicts no change");
  return (f_center - f_candidate) / pred;
}

RadiusUpdate accept_and_update(double radius, double ratio, const TrConfig& cfg) {
  RadiusUpdate u;
  u.accepted = ratio >= cfg.eta1;
  if (!(ratio >= cfg.eta1)) {
    u.radius = cfg.gamma1 * radius;
  } else if (ratio < cfg.eta2) {
    u.radius = cfg.gamma2 * radius;
  } else {
    u.radius = std::min(2.0 * radius, cfg.delta_max);
  }
  return u;
}

std::string to_string(TrStatus s) {
  switch (s) {
    case TrStatus::converged: return "converged";
    case TrStatus::max_iters: return "max_iters";
    case TrStatus::failure: return "failure";
  }
  return "?";
}

double normalized_distance(double f, const std::optional<double>& f_star) {
  if (!f_star || *f_star == 0.0) return std::abs(f - f_star.value_or(0.0));
  return std::abs(f - *f_star) / std::abs(*f_star);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct HdmPoint {
  Vector mu, u, lambda, grad;
  double f = 0.0;
};

class Driver {
 public:
  Driver(const UnassembledSystem& sys, const TrConfig& cfg, const MethodOptions& opts)
      : sys_(sys), cfg_(cfg), opts_(opts), start_(Clock::now()) {
    if (auto b = sys.parameter_box()) box_ = *b;
  }

  TrResult run(const Vector& mu0) {
    cfg_.validate();
    opts_.fixed.validate();
    require(mu0.size() == sys_.num_params(), "initial parameter has wrong length");
    TrResult res;
    Vector mu = box_ ? box_->project(mu0) : mu0;

    HdmPoint center;
    {
      const auto t0 = Clock::now();
      center = hdm_primal(mu, Vector::Zero(sys_.num_states()));
      LinearizedState lin(sys_, center.u, mu);
      center.lambda = lin.solve_adjoint();
      center.grad = lin.adjoint_gradient(center.lambda);
      ++counters_.hdm_adjoint;
      if (opts_.basis.include_initial_sensitivities) {
        store_.initial_sensitivities = lin.solve_sensitivity();
        ++counters_.hdm_sensitivity;
      }
      pending_hdm_ += seconds_since(t0);
    }
    CostCounters center_counters = counters_;
    double center_elapsed = seconds_since(start_);
    const double g0 = center.grad.norm();
    double radius = cfg_.delta0;
    double lagged = -1.0;  // unset until the first model exists

    for (int k = 0;; ++k) {
      IterationRecord rec;
      rec.iter = k;
      rec.f = center.f;
      rec.mu = center.mu;
      rec.grad_norm = center.grad.norm();
      rec.s_k = normalized_distance(center.f, opts_.f_star);
      rec.counters = center_counters;
      rec.elapsed = center_elapsed;
      rec.radius = radius;
      rec.t_hdm = pending_hdm_;
      pending_hdm_ = 0.0;

      if (rec.grad_norm <= cfg_.grad_stop * g0) {
        res.status = TrStatus::converged;
        finish(res, rec, center);
        return res;
      }
      if (k >= cfg_.max_iters) {
        res.status = TrStatus::max_iters;
        res.message = "iteration budget exhausted";
        finish(res, rec, center);
        return res;
      }

      bool accepted = false;
      HdmPoint candidate;
      rec.radius_next = cfg_.gamma1 * radius;
      try {
        accepted = iterate(rec, center, radius, lagged, candidate);
      } catch (const SolverFailure& e) {
        rec.note = std::string("step failed: ") + e.what();
      } catch (const LinearAlgebraError& e) {
        rec.note = std::string("step failed: ") + e.what();
      }
      if (!rec.has_model || !accepted) {
        rec.accepted = false;
        if (rec.note.empty() && !rec.has_model) rec.note = "no model";
      }
      radius = rec.radius_next;
      if (rec.accepted) {
        store_.append(center.u, center.lambda);
        center = std::move(candidate);
        center_counters = counters_;
        center_elapsed = seconds_since(start_);
      }
      emit(res, rec);
      if (radius < 1e-14 * (1.0 + center.mu.norm())) {
        res.status = TrStatus::failure;
        res.message = "trust radius collapsed" + (rec.note.empty() ? "" : " (" + rec.note + ")");
        IterationRecord last;
        last.iter = k + 1;
        last.f = center.f;
        last.mu = center.mu;
        last.grad_norm = center.grad.norm();
        last.s_k = normalized_distance(center.f, opts_.f_star);
        last.counters = center_counters;
        last.elapsed = center_elapsed;
        last.radius = radius;
        finish(res, last, center);
        return res;
      }
    }
  }

 private:
  HdmPoint hdm_primal(const Vector& mu, const Vector& guess) {
    HdmPoint p;
    p.mu = mu;
    ++counters_.hdm_primal;
    PrimalSolution sol = solve_primal(sys_, mu, guess, opts_.newton);
    p.u = std::move(sol.u);
    p.f = assemble_qoi(sys_, p.u, mu);
    return p;
  }

  // One trust-region step. Fills rec; returns whether the candidate was accepted.
  bool iterate(IterationRecord& rec, const HdmPoint& center, double radius, double& lagged,
               HdmPoint& candidate) {
    const Vector& mu = center.mu;
    // basis
    auto t0 = Clock::now();
    const ReducedBasis basis = build_tr_basis(sys_, store_, center.u, center.lambda, opts_.basis);
    rec.n_k = basis.size();
    rec.t_basis = seconds_since(t0);

    // training solves, tolerances and weights
    t0 = Clock::now();
    const bool eqp = opts_.model == ModelKind::eqp;
    const ReducedModel rom(sys_, basis, std::nullopt, opts_.structural_qoi);
    const Vector y_guess = basis.project(center.u);
    const bool with_sens = eqp && !opts_.force_unit_weights && needs_sensitivities(opts_.selection);
    const EqpTrainingData training =
        prepare_training(rom, {mu}, {y_guess}, with_sens, opts_.reduced_newton);
    ++counters_.rom_solves;
    if (lagged < 0) {
      // first iteration: gradient of the unweighted reduced model stands in
      // for the previous model gradient
      lagged = rom.gradient(mu, training.points[0].y, training.points[0].lambda).norm();
    }
    rec.lagged_grad_norm = lagged;
    rec.tolerances = tolerance_schedule(cfg_, lagged, radius, opts_.fixed);
    std::optional<WeightVector> weights;
    if (eqp) {
      if (opts_.force_unit_weights) {
        weights = WeightVector::ones(sys_.num_elements());
      } else {
        const ConstraintRows rows = assemble_constraint_rows(rom, training, opts_.selection);
        weights = train_weights(rows, rec.tolerances, opts_.lp);
        ++counters_.lp_solves;
      }
      rec.nnz_pct = 100.0 * weights->nnz_fraction();
    } else {
      rec.nnz_pct = 100.0;
    }
    rec.t_eqp = seconds_since(t0);

    // model and subproblem
    t0 = Clock::now();
    const ReducedModel model_sys(sys_, basis, weights, opts_.structural_qoi);
    long& solves = eqp ? counters_.eqp_solves : counters_.rom_solves;
    const ReducedObjective oc =
        model_sys.objective_and_gradient(mu, training.points[0].y, opts_.reduced_newton);
    ++solves;
    const Vector y_center = oc.y;
    GradientOracle oracle = [&](const Vector& m) {
      ++solves;
      return model_sys.objective_and_gradient(m, y_center, opts_.reduced_newton).grad;
    };
    const QuadraticModel model(mu, oc.f, oc.grad, oracle, cfg_.fd_step);
    rec.has_model = true;
    rec.m_k = oc.f;
    rec.abs_f_minus_m = std::abs(center.f - oc.f);
    rec.model_grad = oc.grad;
    lagged = oc.grad.norm();

    SteihaugResult st = steihaug_solve(
        oc.grad, [&](const Vector& v) { return model.hessvec(v); }, radius, cfg_.cg_tol,
        cfg_.max_cg > 0 ? cfg_.max_cg : static_cast<int>(2 * sys_.num_params()));
    rec.steihaug_exit = st.exit;
    rec.hg = st.hg;
    rec.steihaug_norm = st.step.norm();
    rec.steihaug_predicted = st.predicted;
    rec.cauchy = st.hg.size() ? cauchy_decrease(oc.grad, st.hg, radius) : 0.0;
    Vector step = st.step;
    double pred = st.predicted;
    if (box_ && step.size()) {
      Vector sp = box_->project(mu + step) - mu;
      if ((sp - step).norm() > 0) {
        rec.projected = true;
        pred = sp.norm() > 0 ? -(oc.grad.dot(sp) + 0.5 * sp.dot(model.hessvec(sp))) : 0.0;
        double a = radius / oc.grad.norm();
        for (int i = 0; i < 30 && !(pred > 0); ++i, a *= 0.5) {
          sp = box_->project(mu - a * oc.grad) - mu;
          if (sp.norm() == 0) break;
          pred = -(oc.grad.dot(sp) + 0.5 * sp.dot(model.hessvec(sp)));
        }
        step = sp;
      }
    }
    rec.step_norm = step.norm();
    rec.predicted = pred;
    rec.t_subprob = seconds_since(t0);

    if (!(pred > 0) || step.norm() == 0) {
      rec.note = "model predicts no decrease";
      rec.rho_ratio = std::numeric_limits<double>::quiet_NaN();
      rec.radius_next = cfg_.gamma1 * radius;
      return false;
    }

    // candidate evaluation
    t0 = Clock::now();
    const Vector mu_c = mu + step;
    double ratio;
    try {
      candidate = hdm_primal(mu_c, center.u);
      ratio = reduction_ratio(center.f, candidate.f, oc.f, oc.f - pred);
    } catch (const DegenerateModel& e) {
      ratio = -std::numeric_limits<double>::infinity();
      rec.note = e.what();
    } catch (const SolverFailure& e) {
      ratio = -std::numeric_limits<double>::infinity();
      rec.note = std::string("HDM failed at candidate: ") + e.what();
    }
    rec.rho_ratio = ratio;
    const RadiusUpdate upd = accept_and_update(radius, ratio, cfg_);
    rec.accepted = upd.accepted;
    rec.radius_next = upd.radius;
    if (upd.accepted) {
      LinearizedState lin(sys_, candidate.u, mu_c);
      candidate.lambda = lin.solve_adjoint();
      candidate.grad = lin.adjoint_gradient(candidate.lambda);
      ++counters_.hdm_adjoint;
    }
    pending_hdm_ += seconds_since(t0);
    return upd.accepted;
  }

  void emit(TrResult& res, IterationRecord& rec) {
    if (opts_.on_iteration) opts_.on_iteration(rec);
    res.history.push_back(std::move(rec));
  }

  void finish(TrResult& res, IterationRecord& rec, const HdmPoint& center) {
    res.mu = center.mu;
    res.f = center.f;
    res.counters = counters_;
    res.elapsed = seconds_since(start_);
    emit(res, rec);
  }

  const UnassembledSystem& sys_;
  TrConfig cfg_;
  MethodOptions opts_;
  std::optional<ParameterBox> box_;
  SnapshotStore store_;
  CostCounters counters_;
  Clock::time_point start_;
  double pending_hdm_ = 0.0;
};

}  // namespace

TrResult run_eqp_tr(const UnassembledSystem& sys, const Vector& mu0, const TrConfig& cfg,
                    const MethodOptions& opts) {
  return Driver(sys, cfg, opts).run(mu0);
}

TrResult run_rom_tr(const UnassembledSystem& sys, const Vector& mu0, const TrConfig& cfg,
                    MethodOptions opts) {
  opts.model = ModelKind::rom;
  return Driver(sys, cfg, opts).run(mu0);
}

}  // namespace eqptr
