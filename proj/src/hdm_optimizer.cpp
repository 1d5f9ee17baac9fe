#include "eqptr/hdm_optimizer.hpp"

#include <chrono>
#include <cmath>

namespace eqptr {

namespace {

using Clock = std::chrono::steady_clock;

struct Point {
  Vector mu, u, grad;
  double f = 0.0;
};

}  // namespace

TrResult run_hdm_opt(const UnassembledSystem& sys, const Vector& mu0, const BfgsConfig& cfg) {
  require(mu0.size() == sys.num_params(), "initial parameter has wrong length");
  require(cfg.c1 > 0 && cfg.c1 < cfg.c2 && cfg.c2 < 1, "need 0 < c1 < c2 < 1");
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  const std::optional<ParameterBox> box = sys.parameter_box();
  const Index nmu = sys.num_params();

  TrResult res;
  CostCounters counters;
  double t_hdm = 0.0;

  auto evaluate = [&](const Vector& mu, const Vector& guess) {
    const auto t0 = Clock::now();
    Point p;
    p.mu = mu;
    ++counters.hdm_primal;
    ++counters.hdm_adjoint;
    ObjectiveGradient og = objective_and_gradient(sys, mu, cfg.newton, &guess);
    p.u = std::move(og.u);
    p.grad = std::move(og.grad);
    p.f = og.f;
    t_hdm += std::chrono::duration<double>(Clock::now() - t0).count();
    return p;
  };

  Point x = evaluate(box ? box->project(mu0) : mu0, Vector::Zero(sys.num_states()));
  CostCounters x_counters = counters;
  double x_elapsed = elapsed();
  const double g0 = x.grad.norm();
  Matrix h = Matrix::Identity(nmu, nmu);
  bool scaled = false;

  for (int k = 0;; ++k) {
    IterationRecord rec;
    rec.iter = k;
    rec.f = x.f;
    rec.mu = x.mu;
    rec.grad_norm = x.grad.norm();
    rec.s_k = normalized_distance(x.f, cfg.f_star);
    rec.counters = x_counters;
    rec.elapsed = x_elapsed;
    rec.t_hdm = t_hdm;
    t_hdm = 0.0;
    auto push = [&](IterationRecord& r) {
      if (cfg.on_iteration) cfg.on_iteration(r);
      res.history.push_back(std::move(r));
    };
    if (rec.grad_norm <= cfg.grad_stop * g0) {
      res.status = TrStatus::converged;
      push(rec);
      break;
    }
    if (k >= cfg.max_iters) {
      res.status = TrStatus::max_iters;
      res.message = "iteration budget exhausted";
      push(rec);
      break;
    }

    Vector p = -(h * x.grad);
    double d0 = x.grad.dot(p);
    if (!(d0 < 0)) {
      h.setIdentity();
      p = -x.grad;
      d0 = x.grad.dot(p);
    }
    double alpha = 1.0;
    if (k == 0) alpha = std::min(1.0, cfg.first_step / p.norm());

    // Line search on phi(a) = f(P(mu + a p)); derivatives are taken along p.
    double lo = 0.0, dlo = d0;
    double hi = std::numeric_limits<double>::infinity();
    std::optional<Point> best;
    bool done = false;
    for (int ev = 0; ev < cfg.max_line_evals && !done; ++ev) {
      Vector mu_t = x.mu + alpha * p;
      if (box) mu_t = box->project(mu_t);
      Point t;
      bool ok = true;
      try {
        t = evaluate(mu_t, x.u);
      } catch (const SolverFailure&) {
        ok = false;
      } catch (const LinearAlgebraError&) {
        ok = false;
      }
      double next;
      if (!ok) {
        hi = alpha;
        next = 0.5 * (lo + hi);
      } else {
        const double dt = t.grad.dot(p);
        const bool armijo = t.f <= x.f + cfg.c1 * alpha * d0;
        if (armijo && (!best || t.f < best->f)) best = t;
        if (armijo && std::abs(dt) <= cfg.c2 * std::abs(d0)) {
          done = true;
          break;
        }
        // secant on the directional derivative between lo and alpha
        const double denom = dt - dlo;
        const double secant = denom > 0 ? lo - dlo * (alpha - lo) / denom
                                        : std::numeric_limits<double>::quiet_NaN();
        if (!armijo || dt > 0) {
          hi = alpha;
          const double margin = 1e-3 * (hi - lo);
          next = std::isfinite(secant) ? std::clamp(secant, lo + margin, hi - margin)
                                       : 0.5 * (lo + hi);
        } else {
          lo = alpha;
          dlo = dt;
          if (std::isinf(hi)) {
            next = std::isfinite(secant) ? std::min(std::max(secant, 1.1 * alpha), 4.0 * alpha)
                                         : 2.0 * alpha;
          } else {
            const double margin = 1e-3 * (hi - lo);
            next = std::isfinite(secant) ? std::clamp(secant, lo + margin, hi - margin)
                                         : 0.5 * (lo + hi);
          }
        }
      }
      alpha = next;
    }
    if (!best) {
      res.status = TrStatus::failure;
      res.message = "line search failed";
      push(rec);
      break;
    }
    Point xn = std::move(*best);
    const Vector s = xn.mu - x.mu;
    const Vector y = xn.grad - x.grad;
    const double sy = s.dot(y);
    rec.step_norm = s.norm();
    rec.accepted = true;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h = Matrix::Identity(nmu, nmu) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Matrix left = Matrix::Identity(nmu, nmu) - rho * s * y.transpose();
      h = left * h * left.transpose() + rho * s * s.transpose();
    }
    x = std::move(xn);
    x_counters = counters;
    x_elapsed = elapsed();
    push(rec);
  }
  res.mu = x.mu;
  res.f = x.f;
  res.counters = counters;
  res.elapsed = elapsed();
  return res;
}

}  // namespace eqptr
