#include "eqptr/burgers.hpp"

#include "eqptr/hdm.hpp"

#include <cmath>

namespace eqptr {

namespace {

constexpr double kGaussPoint = 0.21132486540518711775;  // (1 - 1/sqrt 3)/2 on [0,1]

}  // namespace

BurgersProblem::BurgersProblem(Index n_elems, double nu, Index n_mu, double left, double right)
    : n_elems_(n_elems), nu_(nu), n_mu_(n_mu), left_(left), right_(right) {
  require(n_elems >= 8, "Burgers problem needs at least 8 elements");
  require(nu > 0, "viscosity must be positive");
  require(n_mu >= 1, "Burgers problem needs at least one parameter");
  const double h = 1.0 / double(n_elems);
  conn_.own_dofs.resize(n_elems);
  conn_.neighbor_dofs.resize(n_elems);
  conn_.element_volume.assign(n_elems, h);
  conn_.domain_volume = 1.0;
  for (Index e = 0; e < n_elems; ++e) {
    // interior node k has state index k - 1
    if (e >= 1) conn_.own_dofs[e].push_back(e - 1);
    if (e + 1 <= n_elems - 1) conn_.own_dofs[e].push_back(e);
  }
  conn_.validate(num_states());

  // consistent P1 mass on the interior nodes
  std::vector<Eigen::Triplet<double>> trip;
  for (Index e = 0; e < n_elems; ++e) {
    const auto& d = conn_.own_dofs[e];
    for (Index a : d)
      for (Index b : d) trip.emplace_back(a, b, a == b ? h / 3.0 : h / 6.0);
  }
  qoi_.mass.resize(num_states(), num_states());
  qoi_.mass.setFromTriplets(trip.begin(), trip.end());
  qoi_.target = Vector::Zero(num_states());
}

void BurgersProblem::set_target(const Vector& u_target) {
  require(u_target.size() == num_states(), "target has wrong length");
  qoi_.target = u_target;
}

void BurgersProblem::do_evaluate(Index e, const Vector& ue, const Vector& /*ue_nb*/,
                                 const Vector& mu, unsigned flags, ElementEval& out) const {
  const double h = 1.0 / double(n_elems_);
  const bool has_left = e >= 1;              // local node 0 is a state
  const bool has_right = e + 1 <= n_elems_ - 1;
  // local nodal values and the map from local node to own-dof slot
  double u[2], t[2];
  int slot[2] = {-1, -1};
  int k = 0;
  if (has_left) {
    slot[0] = k;
    u[0] = ue[k];
    t[0] = qoi_.target[e - 1];
    ++k;
  } else {
    u[0] = left_;
    t[0] = left_;
  }
  if (has_right) {
    slot[1] = k;
    u[1] = ue[k];
    t[1] = qoi_.target[e];
    ++k;
  } else {
    u[1] = right_;
    t[1] = right_;
  }
  const Index no = k;
  const double x0 = double(e) * h;
  const double dphi[2] = {-1.0 / h, 1.0 / h};
  const double du = (u[1] - u[0]) / h;

  if (flags & kResidual) out.residual = Vector::Zero(no);
  if (flags & kStateJacobian) {
    out.dr_du = Matrix::Zero(no, no);
    out.dr_dunb.resize(no, 0);
  }
  if (flags & kParamJacobian) out.dr_dmu = Matrix::Zero(no, n_mu_);
  if (flags & kQoi) out.qoi = 0.0;
  if (flags & kQoiGradient) {
    out.dq_du = Vector::Zero(no);
    out.dq_dmu = Vector::Zero(n_mu_);
  }

  for (int q = 0; q < 2; ++q) {
    const double xi = q == 0 ? kGaussPoint : 1.0 - kGaussPoint;
    const double w = 0.5 * h;
    const double phi[2] = {1.0 - xi, xi};
    const double x = x0 + xi * h;
    const double uq = phi[0] * u[0] + phi[1] * u[1];
    double s = 0.0;
    for (Index i = 0; i < n_mu_; ++i) s += mu[i] * std::sin(double(i + 1) * M_PI * x);
    const double d = uq - (phi[0] * t[0] + phi[1] * t[1]);
    for (int a = 0; a < 2; ++a) {
      if (slot[a] < 0) continue;
      const Index ra = slot[a];
      if (flags & kResidual)
        out.residual[ra] += w * (nu_ * du * dphi[a] - 0.5 * uq * uq * dphi[a] - s * phi[a]);
      if (flags & kStateJacobian) {
        for (int b = 0; b < 2; ++b) {
          if (slot[b] < 0) continue;
          out.dr_du(ra, slot[b]) += w * (nu_ * dphi[b] * dphi[a] - uq * phi[b] * dphi[a]);
        }
      }
      if (flags & kParamJacobian)
        for (Index i = 0; i < n_mu_; ++i)
          out.dr_dmu(ra, i) -= w * std::sin(double(i + 1) * M_PI * x) * phi[a];
      if (flags & kQoiGradient) out.dq_du[ra] += w * d * phi[a];
    }
    if (flags & kQoi) out.qoi += 0.5 * w * d * d;
  }
}

Vector default_burgers_target(Index n_mu) {
  Vector t(n_mu);
  for (Index i = 0; i < n_mu; ++i) t[i] = (i % 2 == 0 ? 0.5 : -0.5) / double(i + 1);
  return t;
}

BurgersSetup make_burgers(Index n_elems, double nu, Index n_mu, std::optional<Vector> target_mu) {
  BurgersSetup s;
  s.system = std::make_unique<BurgersProblem>(n_elems, nu, n_mu);
  s.mu_target = target_mu ? *target_mu : default_burgers_target(n_mu);
  require(s.mu_target.size() == n_mu, "target parameter has wrong length");
  NewtonConfig cfg;
  const PrimalSolution sol =
      solve_primal(*s.system, s.mu_target, Vector::Zero(s.system->num_states()), cfg);
  s.system->set_target(sol.u);
  s.mu0 = Vector::Zero(n_mu);
  return s;
}

}  // namespace eqptr
