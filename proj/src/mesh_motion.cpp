#include "eqptr/mesh_motion.hpp"

#include "eqptr/reduced_basis.hpp"

#include <Eigen/SparseCholesky>

#include <cstring>

namespace eqptr {

Vector MeshPartition::boundary_values(const Vector& mu) const {
  require(mu.size() == num_params(), "boundary map: parameter has wrong length");
  return boundary_offset + boundary_jacobian * mu;
}

void MeshPartition::validate() const {
  const Index no = static_cast<Index>(optimized.size());
  const Index nc = static_cast<Index>(constrained.size());
  require(no + nc == num_coords, "partition does not cover all coordinates");
  std::vector<int> seen(static_cast<std::size_t>(num_coords), 0);
  for (Index i : optimized) {
    require(i >= 0 && i < num_coords, "optimized coordinate out of range");
    ++seen[i];
  }
  for (Index i : constrained) {
    require(i >= 0 && i < num_coords, "constrained coordinate out of range");
    ++seen[i];
  }
  for (int s : seen) require(s == 1, "partition must cover each coordinate exactly once");
  require(K_cc.rows() == nc && K_cc.cols() == nc, "K_cc has wrong shape");
  require(K_co.rows() == nc && K_co.cols() == no, "K_co has wrong shape");
  require(boundary_offset.size() == no && boundary_jacobian.rows() == no,
          "boundary map has wrong shape");
  for (const auto& ec : element_coords)
    for (Index i : ec) require(i >= 0 && i < num_coords, "element coordinate out of range");
}

namespace {

Vector solve_constrained(const MeshPartition& part, const Vector& x_o) {
  Eigen::SimplicialLLT<SparseMatrix> llt(part.K_cc);
  if (llt.info() != Eigen::Success)
    throw LinearAlgebraError("mesh stiffness K_cc is not symmetric positive definite");
  return llt.solve(Vector(-(part.K_co * x_o)));
}

}  // namespace

Vector full_motion(const MeshPartition& part, const Vector& mu) {
  const Vector x_o = part.boundary_values(mu);
  const Vector x_c = solve_constrained(part, x_o);
  Vector x(part.num_coords);
  for (std::size_t i = 0; i < part.optimized.size(); ++i) x[part.optimized[i]] = x_o[Index(i)];
  for (std::size_t i = 0; i < part.constrained.size(); ++i) x[part.constrained[i]] = x_c[Index(i)];
  return x;
}

MotionBasis::MotionBasis(const MeshPartition& part, Matrix psi) : psi_(std::move(psi)) {
  const Index nc = static_cast<Index>(part.constrained.size());
  const Index no = static_cast<Index>(part.optimized.size());
  require(psi_.rows() == nc, "motion basis has wrong row count");
  require(psi_.cols() >= 1 && psi_.cols() <= nc, "motion basis rank out of range");
  khat_cc_ = psi_.transpose() * (part.K_cc * psi_);
  khat_co_ = psi_.transpose() * part.K_co;
  Eigen::LLT<Matrix> llt(khat_cc_);
  if (llt.info() != Eigen::Success)
    throw LinearAlgebraError("reduced mesh stiffness is not symmetric positive definite");
  reduction_ = -llt.solve(khat_co_);

  // position -> (is optimized, index within its block)
  std::vector<std::pair<bool, Index>> where(static_cast<std::size_t>(part.num_coords));
  for (Index i = 0; i < no; ++i) where[part.optimized[i]] = {true, i};
  for (Index i = 0; i < nc; ++i) where[part.constrained[i]] = {false, i};
  const Matrix psi_red = psi_ * reduction_;  // N_c x N_o
  elem_ops_.reserve(part.element_coords.size());
  for (const auto& ec : part.element_coords) {
    Matrix a = Matrix::Zero(static_cast<Index>(ec.size()), no);
    for (std::size_t k = 0; k < ec.size(); ++k) {
      const auto [opt, idx] = where[ec[k]];
      if (opt)
        a(Index(k), idx) = 1.0;
      else
        a.row(Index(k)) = psi_red.row(idx);
    }
    elem_ops_.push_back(std::move(a));
  }
}

Vector MotionBasis::reduced_coordinates(const Vector& x_o) const { return reduction_ * x_o; }

std::uint64_t MotionBasis::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(m.size()); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  mix(psi_);
  for (const auto& a : elem_ops_) mix(a);
  return h;
}

MotionBasis train_motion_basis(const MeshPartition& part, const Vector& mu0, double eps,
                               std::optional<Index> r, MotionTraining* training) {
  require(eps > 0, "motion training step must be positive");
  const Index nmu = part.num_params();
  require(mu0.size() == nmu, "motion training: parameter has wrong length");
  require(!r || (*r >= 1 && *r <= 2 * nmu), "motion basis rank must be in [1, 2 N_mu]");
  const Index nc = static_cast<Index>(part.constrained.size());
  Matrix snaps(nc, 2 * nmu);
  for (Index i = 0; i < nmu; ++i) {
    for (int sgn = 0; sgn < 2; ++sgn) {
      Vector mu = mu0;
      mu[i] += sgn == 0 ? eps : -eps;
      const Vector x_c = solve_constrained(part, part.boundary_values(mu));
      snaps.col(2 * i + sgn) = x_c;
    }
  }
  const Index kmax = std::min(snaps.rows(), snaps.cols());
  PodResult pod = pod_compress(snaps, r ? std::min(*r, kmax) : kmax);
  if (training) {
    training->snapshots = snaps;
    training->singular_values = pod.singular_values;
  }
  require(pod.effective_rank >= 1, "motion snapshots are all zero");
  return MotionBasis(part, std::move(pod.modes));
}

std::vector<Vector> reduced_motion(const MotionBasis& basis, const MeshPartition& part,
                                   const Vector& mu, const IndexList& elements) {
  std::vector<Vector> out;
  if (elements.empty()) return out;
  const Vector x_o = part.boundary_values(mu);
  out.reserve(elements.size());
  for (Index e : elements) {
    require(e >= 0 && e < basis.num_elements(), "element index out of range");
    out.push_back(basis.element_operator(e) * x_o);
  }
  return out;
}

}  // namespace eqptr
