#pragma once

#include "eqptr/system.hpp"

#include <optional>

namespace eqptr {

// Orthonormal columns spanning the numerically independent input columns.
// A column is dropped when its norm after projection falls below
// drop_tol times its original norm.
Matrix gram_schmidt(const Matrix& columns, double drop_tol = 1e-10);

struct PodResult {
  Matrix modes;
  Vector singular_values;  // all of them, descending
  Index effective_rank = 0;
};

// Leading k left singular vectors. Asking for more than the numerical rank
// (singular values below 1e-12 * sigma_max) returns only rank-many modes.
PodResult pod_compress(const Matrix& snapshots, Index k);

// Trial basis with cached per-element row restrictions. Immutable.
class ReducedBasis {
 public:
  ReducedBasis(const UnassembledSystem& sys, Matrix phi, std::optional<Vector> offset = {});

  Index size() const { return phi_.cols(); }
  Index num_states() const { return phi_.rows(); }
  const Matrix& phi() const { return phi_; }
  bool has_offset() const { return has_offset_; }
  const Vector& offset() const { return offset_; }  // zero vector when absent

  const Matrix& element_phi(Index e) const { return elem_phi_[e]; }
  const Matrix& element_phi_nb(Index e) const { return elem_phi_nb_[e]; }
  const Vector& element_offset(Index e) const { return elem_off_[e]; }
  const Vector& element_offset_nb(Index e) const { return elem_off_nb_[e]; }

  Vector lift(const Vector& y) const { return offset_ + phi_ * y; }
  Vector project(const Vector& u) const { return phi_.transpose() * (u - offset_); }

 private:
  Matrix phi_;
  Vector offset_;
  bool has_offset_ = false;
  std::vector<Matrix> elem_phi_, elem_phi_nb_;
  std::vector<Vector> elem_off_, elem_off_nb_;
};

// Primal and adjoint snapshots from previous trust-region centers.
struct SnapshotStore {
  std::vector<Vector> primal;
  std::vector<Vector> adjoint;
  std::optional<Matrix> initial_sensitivities;

  Index size() const { return static_cast<Index>(primal.size()); }
  void append(const Vector& u, const Vector& lambda);
  Matrix primal_matrix() const;
  Matrix adjoint_matrix() const;
};

struct BasisOptions {
  std::optional<Index> p_max;  // POD truncation of primal snapshots; none keeps all
  std::optional<Index> q_max;
  bool include_initial_sensitivities = false;
  bool affine = false;
};

// Phi = GS([u*, lambda*, (initial sensitivities), POD^p(U), POD^q(V)]).
// In affine mode the offset is u* and u* is left out of the columns; the
// primal snapshots enter as deviations from u*.
ReducedBasis build_tr_basis(const UnassembledSystem& sys, const SnapshotStore& store,
                            const Vector& u_star, const Vector& lambda_star,
                            const BasisOptions& opts = {});

}  // namespace eqptr
