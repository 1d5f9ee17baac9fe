#include "eqptr/system.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace eqptr {

void ParameterBox::validate(Index n_mu) const {
  require(lower.size() == n_mu && upper.size() == n_mu, "parameter box has wrong length");
  require((lower.array() <= upper.array()).all(), "parameter box has lower > upper");
}

Vector ParameterBox::project(const Vector& mu) const {
  return mu.cwiseMax(lower).cwiseMin(upper);
}

bool ParameterBox::contains(const Vector& mu, double tol) const {
  return ((mu.array() >= lower.array() - tol) && (mu.array() <= upper.array() + tol)).all();
}

void ElementConnectivity::validate(Index num_states) const {
  const Index ne = num_elements();
  require(static_cast<Index>(neighbor_dofs.size()) == ne, "neighbor_dofs size mismatch");
  require(static_cast<Index>(element_volume.size()) == ne, "element_volume size mismatch");
  double vol = 0.0;
  for (Index e = 0; e < ne; ++e) {
    std::set<Index> seen;
    for (Index i : own_dofs[e]) {
      require(i >= 0 && i < num_states, "own dof out of range in element " + std::to_string(e));
      require(seen.insert(i).second, "duplicate own dof in element " + std::to_string(e));
    }
    for (Index i : neighbor_dofs[e])
      require(i >= 0 && i < num_states,
              "neighbor dof out of range in element " + std::to_string(e));
    require(element_volume[e] >= 0.0, "negative element volume");
    vol += element_volume[e];
  }
  require(std::abs(vol - domain_volume) <= 1e-12 * std::max(1.0, std::abs(domain_volume)),
          "element volumes do not sum to the domain volume");
}

Vector gather(const Vector& u, const IndexList& dofs) {
  Vector out(static_cast<Index>(dofs.size()));
  for (std::size_t i = 0; i < dofs.size(); ++i) out[static_cast<Index>(i)] = u[dofs[i]];
  return out;
}

void scatter_add(const Vector& local, const IndexList& dofs, Vector& global) {
  for (std::size_t i = 0; i < dofs.size(); ++i) global[dofs[i]] += local[static_cast<Index>(i)];
}

void check_dimensions(const UnassembledSystem& sys, const Vector& u, const Vector& mu) {
  if (u.size() != sys.num_states()) {
    std::ostringstream os;
    os << "state has length " << u.size() << ", system expects " << sys.num_states();
    throw ContractViolation(os.str());
  }
  if (mu.size() != sys.num_params()) {
    std::ostringstream os;
    os << "parameter has length " << mu.size() << ", system expects " << sys.num_params();
    throw ContractViolation(os.str());
  }
}

void check_element_finite(Index e, unsigned flags, const ElementEval& ev) {
  bool ok = true;
  if (flags & kResidual) ok = ok && ev.residual.allFinite();
  if (flags & kStateJacobian) ok = ok && ev.dr_du.allFinite() && ev.dr_dunb.allFinite();
  if (flags & kParamJacobian) ok = ok && ev.dr_dmu.allFinite();
  if (flags & kQoi) ok = ok && std::isfinite(ev.qoi);
  if (flags & kQoiGradient) ok = ok && ev.dq_du.allFinite() && ev.dq_dmu.allFinite();
  if (!ok) throw NumericError("non-finite output from element " + std::to_string(e), e);
}

namespace {

void evaluate_checked(const UnassembledSystem& sys, Index e, const Vector& u, const Vector& mu,
                      unsigned flags, ElementEval& ev) {
  const auto& conn = sys.connectivity();
  const Vector ue = gather(u, conn.own_dofs[e]);
  const Vector unb = gather(u, conn.neighbor_dofs[e]);
  sys.evaluate(e, ue, unb, mu, flags, ev);
  const Index n_own = static_cast<Index>(conn.own_dofs[e].size());
  if ((flags & kResidual) && ev.residual.size() != n_own)
    throw ContractViolation("element " + std::to_string(e) + " residual has wrong length");
  check_element_finite(e, flags, ev);
}

}  // namespace

JacobianAssembler::JacobianAssembler(const UnassembledSystem& sys) : sys_(sys) {
  const auto& conn = sys.connectivity();
  const Index n = sys.num_states();
  std::vector<Eigen::Triplet<double>> trip;
  for (Index e = 0; e < conn.num_elements(); ++e) {
    for (Index r : conn.own_dofs[e]) {
      for (Index c : conn.own_dofs[e]) trip.emplace_back(r, c, 0.0);
      for (Index c : conn.neighbor_dofs[e]) trip.emplace_back(r, c, 0.0);
    }
  }
  matrix_.resize(n, n);
  matrix_.setFromTriplets(trip.begin(), trip.end());
  matrix_.makeCompressed();

  auto slot = [&](Index r, Index c) {
    const Index start = matrix_.outerIndexPtr()[c];
    const Index end = matrix_.outerIndexPtr()[c + 1];
    const auto* rows = matrix_.innerIndexPtr();
    const auto* it = std::lower_bound(rows + start, rows + end, static_cast<int>(r));
    return static_cast<Index>(it - rows);
  };
  slots_.resize(static_cast<std::size_t>(conn.num_elements()));
  for (Index e = 0; e < conn.num_elements(); ++e) {
    auto& s = slots_[e];
    for (Index r : conn.own_dofs[e]) {
      for (Index c : conn.own_dofs[e]) s.push_back(slot(r, c));
      for (Index c : conn.neighbor_dofs[e]) s.push_back(slot(r, c));
    }
  }
}

const SparseMatrix& JacobianAssembler::assemble(const Vector& u, const Vector& mu) {
  check_dimensions(sys_, u, mu);
  const auto& conn = sys_.connectivity();
  std::fill(matrix_.valuePtr(), matrix_.valuePtr() + matrix_.nonZeros(), 0.0);
  double* val = matrix_.valuePtr();
  ElementEval ev;
  for (Index e = 0; e < conn.num_elements(); ++e) {
    evaluate_checked(sys_, e, u, mu, kStateJacobian, ev);
    const Index no = static_cast<Index>(conn.own_dofs[e].size());
    const Index nn = static_cast<Index>(conn.neighbor_dofs[e].size());
    const auto& s = slots_[e];
    Index k = 0;
    for (Index i = 0; i < no; ++i) {
      for (Index j = 0; j < no; ++j) val[s[k++]] += ev.dr_du(i, j);
      for (Index j = 0; j < nn; ++j) val[s[k++]] += ev.dr_dunb(i, j);
    }
  }
  return matrix_;
}

Vector assemble_residual(const UnassembledSystem& sys, const Vector& u, const Vector& mu) {
  check_dimensions(sys, u, mu);
  const auto& conn = sys.connectivity();
  Vector r = Vector::Zero(sys.num_states());
  ElementEval ev;
  for (Index e = 0; e < conn.num_elements(); ++e) {
    evaluate_checked(sys, e, u, mu, kResidual, ev);
    scatter_add(ev.residual, conn.own_dofs[e], r);
  }
  return r;
}

SparseMatrix assemble_jacobian(const UnassembledSystem& sys, const Vector& u, const Vector& mu) {
  JacobianAssembler asm_(sys);
  return asm_.assemble(u, mu);
}

double assemble_qoi(const UnassembledSystem& sys, const Vector& u, const Vector& mu) {
  check_dimensions(sys, u, mu);
  const auto& conn = sys.connectivity();
  double j = 0.0;
  ElementEval ev;
  for (Index e = 0; e < conn.num_elements(); ++e) {
    evaluate_checked(sys, e, u, mu, kQoi, ev);
    j += ev.qoi;
  }
  return j;
}

QoiDerivatives assemble_qoi_derivatives(const UnassembledSystem& sys, const Vector& u,
                                        const Vector& mu) {
  check_dimensions(sys, u, mu);
  const auto& conn = sys.connectivity();
  QoiDerivatives d{Vector::Zero(sys.num_states()), Vector::Zero(sys.num_params())};
  ElementEval ev;
  for (Index e = 0; e < conn.num_elements(); ++e) {
    evaluate_checked(sys, e, u, mu, kQoiGradient, ev);
    scatter_add(ev.dq_du, conn.own_dofs[e], d.du);
    d.dmu += ev.dq_dmu;
  }
  return d;
}

Matrix assemble_param_jacobian(const UnassembledSystem& sys, const Vector& u, const Vector& mu) {
  check_dimensions(sys, u, mu);
  const auto& conn = sys.connectivity();
  Matrix out = Matrix::Zero(sys.num_states(), sys.num_params());
  ElementEval ev;
  for (Index e = 0; e < conn.num_elements(); ++e) {
    evaluate_checked(sys, e, u, mu, kParamJacobian, ev);
    const auto& dofs = conn.own_dofs[e];
    for (std::size_t i = 0; i < dofs.size(); ++i) out.row(dofs[i]) += ev.dr_dmu.row(static_cast<Index>(i));
  }
  return out;
}

GlobalEvaluation evaluate_global(const UnassembledSystem& sys, const Vector& u, const Vector& mu) {
  GlobalEvaluation g;
  g.residual = assemble_residual(sys, u, mu);
  g.jacobian = assemble_jacobian(sys, u, mu);
  g.qoi = assemble_qoi(sys, u, mu);
  auto d = assemble_qoi_derivatives(sys, u, mu);
  g.qoi_state_grad = std::move(d.du);
  g.qoi_param_grad = std::move(d.dmu);
  g.residual_param_jac = assemble_param_jacobian(sys, u, mu);
  return g;
}

}  // namespace eqptr
