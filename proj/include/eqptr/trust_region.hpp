#pragma once

#include "eqptr/eqp.hpp"
#include "eqptr/hdm.hpp"

#include <array>
#include <functional>
#include <string>

namespace eqptr {

struct TrConfig {
  double eta1 = 0.1;
  double eta2 = 0.75;
  double gamma1 = 0.5;
  double gamma2 = 1.0;
  double delta0 = 0.1;
  double delta_max = 1.0;
  double kappa_ratio = 1e-4;
  // per-family multipliers on the schedule (rp, ra, ga)
  std::array<double, 3> kappa_weights{1.0, 1.0, 1.0};
  double fd_step = 1e-6;
  int max_iters = 60;
  double grad_stop = 1e-6;
  double cg_tol = 1e-8;  // relative to the model gradient
  int max_cg = 0;        // 0: twice the parameter count

  void validate() const;
};

// delta_rp = delta_ra = delta_ga = kappa/3 * min(lagged, radius), each
// scaled by its weight; dv, q and rs are copied from fixed.
ToleranceSet tolerance_schedule(const TrConfig& cfg, double lagged_grad_norm, double radius,
                                const ToleranceSet& fixed = {});

using GradientOracle = std::function<Vector(const Vector&)>;

// (grad(mu + eps v/|v|) - grad(mu)) |v| / eps. The direction is normalized
// so the perturbation size does not depend on |v|; for a quadratic this is
// the exact Hessian product.
Vector hessvec_fd(const GradientOracle& grad, const Vector& mu, const Vector& grad_mu,
                  const Vector& v, double eps);

// m(mu_k + s) = value + g^T s + 1/2 s^T H s, H applied through hessvec_fd.
class QuadraticModel {
 public:
  QuadraticModel(Vector center, double value, Vector gradient, GradientOracle grad, double fd_step);

  const Vector& center() const { return center_; }
  double value() const { return value_; }
  const Vector& gradient() const { return gradient_; }
  Vector hessvec(const Vector& v) const;
  // model value for a step whose Hessian product is already known
  double evaluate(const Vector& s, const Vector& hs) const {
    return value_ + gradient_.dot(s) + 0.5 * s.dot(hs);
  }
  double evaluate(const Vector& s) const { return evaluate(s, hessvec(s)); }
  int hessvec_count() const { return count_; }

 private:
  Vector center_;
  double value_;
  Vector gradient_;
  GradientOracle grad_;
  double eps_;
  mutable int count_ = 0;
};

enum class SteihaugExit { zero_gradient, converged, negative_curvature, boundary, max_iters };
std::string to_string(SteihaugExit e);

struct SteihaugResult {
  Vector step;
  Vector hstep;             // H step, accumulated from the Krylov products
  double predicted = 0.0;   // m(0) - m(step)
  int iterations = 0;
  SteihaugExit exit = SteihaugExit::zero_gradient;
  Vector hg;                // product along -g from the first iteration
};

using HessVecFn = std::function<Vector(const Vector&)>;

SteihaugResult steihaug_solve(const Vector& g, const HessVecFn& hv, double radius, double cg_tol,
                              int max_cg);

// Decrease of the quadratic along -g at the best step within the radius,
// given the product H(-g).
double cauchy_decrease(const Vector& g, const Vector& h_minus_g, double radius);

class DegenerateModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double reduction_ratio(double f_center, double f_candidate, double m_center, double m_candidate);

struct RadiusUpdate {
  bool accepted = false;
  double radius = 0.0;
};
RadiusUpdate accept_and_update(double radius, double ratio, const TrConfig& cfg);

struct CostCounters {
  long hdm_primal = 0;
  long hdm_adjoint = 0;
  long hdm_sensitivity = 0;
  long rom_solves = 0;
  long eqp_solves = 0;
  long lp_solves = 0;
};

// One major iteration. Fields past n_k/timings are bookkeeping used for
// checks and the comparison tables.
struct IterationRecord {
  int iter = 0;
  double m_k = std::numeric_limits<double>::quiet_NaN();
  double abs_f_minus_m = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;
  double s_k = 0.0;
  double rho_ratio = std::numeric_limits<double>::quiet_NaN();
  double nnz_pct = std::numeric_limits<double>::quiet_NaN();
  Index n_k = 0;
  double t_basis = 0.0, t_eqp = 0.0, t_subprob = 0.0, t_hdm = 0.0;

  bool has_model = false;
  double f = 0.0;
  Vector mu;
  double radius = 0.0;
  double radius_next = 0.0;
  bool accepted = false;
  ToleranceSet tolerances;
  double lagged_grad_norm = 0.0;
  Vector model_grad;
  double steihaug_norm = 0.0;       // before any box projection
  double steihaug_predicted = 0.0;
  double step_norm = 0.0;
  double predicted = 0.0;
  double cauchy = 0.0;
  Vector hg;  // H(-g) used for the Cauchy decrease
  bool projected = false;
  SteihaugExit steihaug_exit = SteihaugExit::zero_gradient;
  CostCounters counters;  // cumulative, when f(mu_k) became available
  double elapsed = 0.0;   // cumulative wall time at the same moment
  std::string note;
};

enum class ModelKind { rom, eqp };

struct MethodOptions {
  ModelKind model = ModelKind::eqp;
  ConstraintSet selection = ConstraintSet::C1;
  BasisOptions basis;            // include_initial_sensitivities selects the _d0 variants
  ToleranceSet fixed;            // dv, q, rs
  bool structural_qoi = false;
  bool force_unit_weights = false;
  std::optional<double> f_star;  // S_k = |f - f*|/|f*|; otherwise |f|
  NewtonConfig newton;
  ReducedNewtonConfig reduced_newton;
  LpOptions lp;
  // called after every record is complete
  std::function<void(const IterationRecord&)> on_iteration;
};

ToleranceSet default_fixed_tolerances();  // dv 1e-4, q 1e-6, rs 1e-3

enum class TrStatus { converged, max_iters, failure };
std::string to_string(TrStatus s);

struct TrResult {
  Vector mu;
  double f = 0.0;
  TrStatus status = TrStatus::failure;
  std::string message;
  std::vector<IterationRecord> history;
  CostCounters counters;
  double elapsed = 0.0;
};

double normalized_distance(double f, const std::optional<double>& f_star);

TrResult run_eqp_tr(const UnassembledSystem& sys, const Vector& mu0, const TrConfig& cfg,
                    const MethodOptions& opts);
// Same loop with the unweighted reduced model.
TrResult run_rom_tr(const UnassembledSystem& sys, const Vector& mu0, const TrConfig& cfg,
                    MethodOptions opts);

}  // namespace eqptr
