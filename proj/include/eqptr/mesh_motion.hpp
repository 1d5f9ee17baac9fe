#pragma once

#include "eqptr/common.hpp"

#include <cstdint>
#include <optional>

namespace eqptr {

// Mesh coordinates split into optimized (boundary) and constrained
// (interior) entries. The constrained part follows from linear elasticity,
//   K_cc x_c + K_co x_o = 0,
// with the optimized part given by an affine boundary map
//   x_o = phi_o(mu) = boundary_offset + boundary_jacobian * mu.
// All coordinates here are displacements from the reference mesh.
struct MeshPartition {
  Index num_coords = 0;
  IndexList optimized;    // positions in the full coordinate vector
  IndexList constrained;
  SparseMatrix K_cc;
  SparseMatrix K_co;
  Vector boundary_offset;
  Matrix boundary_jacobian;  // N_o x N_mu
  std::vector<IndexList> element_coords;  // full-vector positions per element

  Index num_params() const { return boundary_jacobian.cols(); }
  Vector boundary_values(const Vector& mu) const;
  void validate() const;
};

// Full coordinate vector with x_c = -K_cc^{-1} K_co phi_o(mu).
Vector full_motion(const MeshPartition& part, const Vector& mu);

class MotionBasis {
 public:
  // psi: N_c x r with orthonormal columns
  MotionBasis(const MeshPartition& part, Matrix psi);

  const Matrix& psi() const { return psi_; }
  Index rank() const { return psi_.cols(); }
  const Matrix& reduced_cc() const { return khat_cc_; }
  const Matrix& reduced_co() const { return khat_co_; }
  // A_e maps phi_o(mu) to the coordinates of element e.
  const Matrix& element_operator(Index e) const { return elem_ops_[e]; }
  Index num_elements() const { return static_cast<Index>(elem_ops_.size()); }
  // Reduced coordinates of the constrained part for a boundary vector.
  Vector reduced_coordinates(const Vector& x_o) const;
  // Hash of psi and all element operators, for reuse checks.
  std::uint64_t fingerprint() const;

 private:
  Matrix psi_;
  Matrix khat_cc_, khat_co_;
  Matrix reduction_;  // -Khat_cc^{-1} Khat_co
  std::vector<Matrix> elem_ops_;
};

struct MotionTraining {
  Matrix snapshots;        // N_c x 2 N_mu
  Vector singular_values;
};

// POD of the constrained parts of full motions at mu0 +- eps e_i. r
// defaults to the numerical rank (capped at 2 N_mu).
MotionBasis train_motion_basis(const MeshPartition& part, const Vector& mu0, double eps = 1.0,
                               std::optional<Index> r = std::nullopt,
                               MotionTraining* training = nullptr);

// Coordinates of the requested elements under the reduced motion.
std::vector<Vector> reduced_motion(const MotionBasis& basis, const MeshPartition& part,
                                   const Vector& mu, const IndexList& elements);

}  // namespace eqptr
