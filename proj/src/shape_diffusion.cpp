#include "eqptr/shape_diffusion.hpp"

#include "eqptr/hdm.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>

namespace eqptr {

namespace {

using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, 9, 1>>;

// Residual and region-tracking QoI of one triangle. x = (x0,y0,x1,y1,x2,y2).
template <class T>
void triangle_kernel(const T u[3], const T x[6], const double t[3], double source, double beta,
                     bool region, T r[3], T& q) {
  const T x10 = x[2] - x[0], y10 = x[3] - x[1];
  const T x20 = x[4] - x[0], y20 = x[5] - x[1];
  const T det = x10 * y20 - x20 * y10;
  const T area = 0.5 * det;
  T gx[3], gy[3];
  gx[1] = y20 / det;
  gy[1] = -x20 / det;
  gx[2] = -y10 / det;
  gy[2] = x10 / det;
  gx[0] = -gx[1] - gx[2];
  gy[0] = -gy[1] - gy[2];
  const T ux = u[0] * gx[0] + u[1] * gx[1] + u[2] * gx[2];
  const T uy = u[0] * gy[0] + u[1] * gy[1] + u[2] * gy[2];
  // edge-midpoint rule, exact for the quadratic diffusivity
  T kbar = T(0.0);
  for (int a = 0; a < 3; ++a) {
    const T um = 0.5 * (u[a] + u[(a + 1) % 3]);
    kbar += (1.0 + beta * um * um) / 3.0;
  }
  for (int a = 0; a < 3; ++a) r[a] = area * kbar * (ux * gx[a] + uy * gy[a]) - source * area / 3.0;
  q = T(0.0);
  if (region) {
    T d[3];
    for (int a = 0; a < 3; ++a) d[a] = u[a] - t[a];
    const T sum = d[0] + d[1] + d[2];
    q = 0.5 * area / 12.0 * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + sum * sum);
  }
}

double triangle_area(const Vector& c) {
  return 0.5 * ((c[2] - c[0]) * (c[5] - c[1]) - (c[4] - c[0]) * (c[3] - c[1]));
}

// Plane-strain elasticity stiffness of a linear triangle, E = 1.
Matrix cst_stiffness(const Vector& c, double poisson) {
  const double area = triangle_area(c);
  const double b[3] = {c[3] - c[5], c[5] - c[1], c[1] - c[3]};
  const double g[3] = {c[4] - c[2], c[0] - c[4], c[2] - c[0]};
  Matrix bm = Matrix::Zero(3, 6);
  for (int a = 0; a < 3; ++a) {
    bm(0, 2 * a) = b[a];
    bm(1, 2 * a + 1) = g[a];
    bm(2, 2 * a) = g[a];
    bm(2, 2 * a + 1) = b[a];
  }
  bm /= 2.0 * area;
  const double f = 1.0 / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  Matrix d(3, 3);
  d << 1 - poisson, poisson, 0, poisson, 1 - poisson, 0, 0, 0, 0.5 - poisson;
  d *= f;
  return area * bm.transpose() * d * bm;
}

}  // namespace

ShapeDiffusionProblem::ShapeDiffusionProblem(const ShapeMeshSpec& spec, Index n_mu, double alpha,
                                             MotionMode mode)
    : spec_(spec), n_mu_(n_mu), alpha_(alpha), mode_(mode) {
  require(spec.nx >= 2 && spec.ny >= 2, "shape mesh needs at least 2x2 cells");
  require(n_mu >= 1, "shape problem needs at least one parameter");
  require(alpha >= 0, "regularization weight must be nonnegative");
  const Index nx = spec.nx, ny = spec.ny;
  const Index nn = (nx + 1) * (ny + 1);
  ref_coords_.resize(2 * nn);
  node_state_.assign(static_cast<std::size_t>(nn), -1);
  for (Index j = 0; j <= ny; ++j) {
    for (Index i = 0; i <= nx; ++i) {
      const Index n = j * (nx + 1) + i;
      ref_coords_[2 * n] = double(i) / double(nx);
      ref_coords_[2 * n + 1] = double(j) / double(ny);
      if (i > 0 && i < nx && j > 0 && j < ny) {
        node_state_[n] = static_cast<Index>(interior_nodes_.size());
        interior_nodes_.push_back(n);
      }
    }
  }
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      const Index n00 = j * (nx + 1) + i, n10 = n00 + 1, n01 = n00 + nx + 1, n11 = n01 + 1;
      tris_.push_back({n00, n10, n11});
      tris_.push_back({n00, n11, n01});
    }
  }
  const Index ne = static_cast<Index>(tris_.size());

  conn_.own_dofs.resize(ne);
  conn_.neighbor_dofs.resize(ne);
  conn_.element_volume.resize(ne);
  region_.resize(ne);
  reg_weight_.resize(ne);
  part_.element_coords.resize(ne);
  double total = 0.0;
  for (Index e = 0; e < ne; ++e) {
    Vector c(6);
    double cx = 0, cy = 0;
    for (int a = 0; a < 3; ++a) {
      const Index n = tris_[e][a];
      c[2 * a] = ref_coords_[2 * n];
      c[2 * a + 1] = ref_coords_[2 * n + 1];
      cx += c[2 * a] / 3.0;
      cy += c[2 * a + 1] / 3.0;
      if (node_state_[n] >= 0) conn_.own_dofs[e].push_back(node_state_[n]);
      part_.element_coords[e].push_back(2 * n);
      part_.element_coords[e].push_back(2 * n + 1);
    }
    const double area = triangle_area(c);
    if (!(area > 0)) throw ContractViolation("inverted element in the reference mesh");
    conn_.element_volume[e] = area;
    total += area;
    region_[e] = cx >= spec.region_x0 && cx <= spec.region_x1 && cy >= spec.region_y0 &&
                 cy <= spec.region_y1;
  }
  conn_.domain_volume = total;
  for (Index e = 0; e < ne; ++e) reg_weight_[e] = conn_.element_volume[e] / total;
  conn_.validate(num_states());

  // mesh partition: boundary node coordinates are optimized
  part_.num_coords = 2 * nn;
  std::vector<Index> pos(static_cast<std::size_t>(2 * nn));
  for (Index n = 0; n < nn; ++n) {
    for (int d = 0; d < 2; ++d) {
      if (node_state_[n] < 0) {
        pos[2 * n + d] = static_cast<Index>(part_.optimized.size());
        part_.optimized.push_back(2 * n + d);
      } else {
        pos[2 * n + d] = static_cast<Index>(part_.constrained.size());
        part_.constrained.push_back(2 * n + d);
      }
    }
  }
  const Index no = static_cast<Index>(part_.optimized.size());
  const Index nc = static_cast<Index>(part_.constrained.size());
  std::vector<Eigen::Triplet<double>> tcc, tco;
  for (Index e = 0; e < ne; ++e) {
    Vector c(6);
    for (int k = 0; k < 6; ++k) c[k] = ref_coords_[part_.element_coords[e][k]];
    const Matrix ke = cst_stiffness(c, 0.3);
    for (int a = 0; a < 6; ++a) {
      const Index ga = part_.element_coords[e][a];
      if (node_state_[ga / 2] < 0) continue;  // only constrained rows are needed
      for (int b = 0; b < 6; ++b) {
        const Index gb = part_.element_coords[e][b];
        if (node_state_[gb / 2] < 0)
          tco.emplace_back(pos[ga], pos[gb], ke(a, b));
        else
          tcc.emplace_back(pos[ga], pos[gb], ke(a, b));
      }
    }
  }
  part_.K_cc.resize(nc, nc);
  part_.K_cc.setFromTriplets(tcc.begin(), tcc.end());
  part_.K_co.resize(nc, no);
  part_.K_co.setFromTriplets(tco.begin(), tco.end());
  part_.boundary_offset = Vector::Zero(no);
  part_.boundary_jacobian = Matrix::Zero(no, n_mu);
  for (Index i = 0; i <= nx; ++i) {
    const Index n = ny * (nx + 1) + i;
    const double x = ref_coords_[2 * n];
    for (Index k = 0; k < n_mu; ++k)
      part_.boundary_jacobian(pos[2 * n + 1], k) = spec.amplitude * std::sin(double(k + 1) * M_PI * x);
  }
  part_.validate();

  const Vector mu_ref = Vector::Zero(n_mu);
  motion_ = std::make_unique<MotionBasis>(train_motion_basis(part_, mu_ref, 1.0));

  base_coords_.resize(ne);
  coord_jac_.resize(ne);
  if (mode == MotionMode::reduced) {
    for (Index e = 0; e < ne; ++e) {
      const Matrix& a = motion_->element_operator(e);
      Vector base(6);
      for (int k = 0; k < 6; ++k) base[k] = ref_coords_[part_.element_coords[e][k]];
      base_coords_[e] = base + a * part_.boundary_offset;
      coord_jac_[e] = a * part_.boundary_jacobian;
    }
  } else {
    const Vector d0 = full_motion(part_, mu_ref);
    Matrix dj(part_.num_coords, n_mu);
    for (Index k = 0; k < n_mu; ++k) {
      Vector ek = Vector::Zero(n_mu);
      ek[k] = 1.0;
      dj.col(k) = full_motion(part_, ek) - d0;
    }
    for (Index e = 0; e < ne; ++e) {
      base_coords_[e].resize(6);
      coord_jac_[e].resize(6, n_mu);
      for (int k = 0; k < 6; ++k) {
        const Index g = part_.element_coords[e][k];
        base_coords_[e][k] = ref_coords_[g] + d0[g];
        coord_jac_[e].row(k) = dj.row(g);
      }
    }
  }
  target_ = Vector::Zero(num_states());
}

void ShapeDiffusionProblem::set_target(const Vector& u_target) {
  require(u_target.size() == num_states(), "target has wrong length");
  target_ = u_target;
}

void ShapeDiffusionProblem::set_box(const ParameterBox& box) {
  box.validate(n_mu_);
  box_ = box;
}

Vector ShapeDiffusionProblem::element_coords(Index e, const Vector& mu) const {
  return base_coords_[e] + coord_jac_[e] * mu;
}

Vector ShapeDiffusionProblem::element_areas(const Vector& mu) const {
  Vector a(num_elements());
  for (Index e = 0; e < num_elements(); ++e) a[e] = triangle_area(element_coords(e, mu));
  return a;
}

void ShapeDiffusionProblem::do_evaluate(Index e, const Vector& ue, const Vector& /*ue_nb*/,
                                        const Vector& mu, unsigned flags,
                                        ElementEval& out) const {
  const auto& nodes = tris_[e];
  const Vector xc = element_coords(e, mu);
  double uval[3], t[3];
  int slot[3];
  int no = 0;
  for (int a = 0; a < 3; ++a) {
    const Index s = node_state_[nodes[a]];
    if (s >= 0) {
      slot[a] = no;
      uval[a] = ue[no++];
      t[a] = target_[s];
    } else {
      slot[a] = -1;
      uval[a] = 0.0;
      t[a] = 0.0;
    }
  }
  const double w = reg_weight_[e];
  const double reg = 0.5 * alpha_ * w * mu.squaredNorm();

  const bool derivs = flags & (kStateJacobian | kParamJacobian | kQoiGradient);
  if (!derivs) {
    double x[6], r[3], q;
    for (int k = 0; k < 6; ++k) x[k] = xc[k];
    triangle_kernel<double>(uval, x, t, spec_.source, spec_.beta, region_[e], r, q);
    if (flags & kResidual) {
      out.residual.resize(no);
      for (int a = 0; a < 3; ++a)
        if (slot[a] >= 0) out.residual[slot[a]] = r[a];
    }
    if (flags & kQoi) out.qoi = q + reg;
    return;
  }

  Ad u[3], x[6], r[3], q;
  for (int a = 0; a < 3; ++a) u[a] = Ad(uval[a], 9, a);
  for (int k = 0; k < 6; ++k) x[k] = Ad(xc[k], 9, 3 + k);
  triangle_kernel<Ad>(u, x, t, spec_.source, spec_.beta, region_[e], r, q);
  const Matrix& jac = coord_jac_[e];
  if (flags & kResidual) {
    out.residual.resize(no);
    for (int a = 0; a < 3; ++a)
      if (slot[a] >= 0) out.residual[slot[a]] = r[a].value();
  }
  if (flags & kStateJacobian) {
    out.dr_du.resize(no, no);
    out.dr_dunb.resize(no, 0);
    for (int a = 0; a < 3; ++a) {
      if (slot[a] < 0) continue;
      for (int b = 0; b < 3; ++b)
        if (slot[b] >= 0) out.dr_du(slot[a], slot[b]) = r[a].derivatives()[b];
    }
  }
  if (flags & kParamJacobian) {
    out.dr_dmu.resize(no, n_mu_);
    for (int a = 0; a < 3; ++a)
      if (slot[a] >= 0)
        out.dr_dmu.row(slot[a]) = r[a].derivatives().tail<6>().transpose() * jac;
  }
  if (flags & kQoi) out.qoi = q.value() + reg;
  if (flags & kQoiGradient) {
    out.dq_du.resize(no);
    for (int a = 0; a < 3; ++a)
      if (slot[a] >= 0) out.dq_du[slot[a]] = q.derivatives()[a];
    out.dq_dmu = jac.transpose() * q.derivatives().tail<6>() + alpha_ * w * mu;
  }
}

Vector default_shape_target(Index n_mu) {
  Vector t(n_mu);
  for (Index i = 0; i < n_mu; ++i) t[i] = (i % 2 == 0 ? 0.6 : -0.6) / double(i + 1);
  return t;
}

ShapeSetup make_shape_diffusion(const ShapeMeshSpec& spec, Index n_mu, double alpha,
                                std::optional<Vector> target_mu, MotionMode mode) {
  ShapeSetup s;
  s.system = std::make_unique<ShapeDiffusionProblem>(spec, n_mu, alpha, mode);
  s.mu_target = target_mu ? *target_mu : default_shape_target(n_mu);
  require(s.mu_target.size() == n_mu, "target parameter has wrong length");
  const PrimalSolution sol =
      solve_primal(*s.system, s.mu_target, Vector::Zero(s.system->num_states()));
  s.system->set_target(sol.u);
  s.system->set_box(ParameterBox{Vector::Constant(n_mu, -1.0), Vector::Constant(n_mu, 1.0)});
  s.mu0 = Vector::Zero(n_mu);
  return s;
}

}  // namespace eqptr
