#include "eqptr/reduced_basis.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace eqptr {

Matrix gram_schmidt(const Matrix& columns, double drop_tol) {
  require(columns.cols() > 0 && columns.rows() > 0, "gram_schmidt: empty input");
  require(columns.allFinite(), "gram_schmidt: non-finite input");
  Matrix q(columns.rows(), std::min(columns.rows(), columns.cols()));
  Index n = 0;
  for (Index j = 0; j < columns.cols() && n < columns.rows(); ++j) {
    Vector v = columns.col(j);
    const double orig = v.norm();
    if (orig == 0.0) continue;
    // two passes of modified Gram-Schmidt keep orthogonality at roundoff level
    for (int pass = 0; pass < 2; ++pass)
      for (Index i = 0; i < n; ++i) v -= q.col(i).dot(v) * q.col(i);
    const double nv = v.norm();
    if (nv < drop_tol * orig) continue;
    q.col(n++) = v / nv;
  }
  return q.leftCols(n);
}

PodResult pod_compress(const Matrix& snapshots, Index k) {
  require(k >= 0, "pod_compress: negative rank");
  PodResult out;
  if (snapshots.cols() == 0 || k == 0) {
    out.modes.resize(snapshots.rows(), 0);
    return out;
  }
  require(k <= std::min(snapshots.rows(), snapshots.cols()), "pod_compress: k exceeds matrix size");
  Eigen::BDCSVD<Matrix> svd(snapshots, Eigen::ComputeThinU);
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() ? out.singular_values[0] : 0.0;
  Index rank = 0;
  for (Index i = 0; i < out.singular_values.size(); ++i)
    if (smax > 0 && out.singular_values[i] > 1e-12 * smax) ++rank;
  out.effective_rank = std::min(k, rank);
  out.modes = svd.matrixU().leftCols(out.effective_rank);
  return out;
}

ReducedBasis::ReducedBasis(const UnassembledSystem& sys, Matrix phi, std::optional<Vector> offset)
    : phi_(std::move(phi)) {
  require(phi_.rows() == sys.num_states(), "basis row count differs from system size");
  require(phi_.cols() <= phi_.rows(), "basis has more columns than rows");
  if (offset) {
    require(offset->size() == sys.num_states(), "offset has wrong length");
    offset_ = *offset;
    has_offset_ = true;
  } else {
    offset_ = Vector::Zero(sys.num_states());
  }
  const auto& conn = sys.connectivity();
  const Index ne = conn.num_elements();
  elem_phi_.resize(ne);
  elem_phi_nb_.resize(ne);
  elem_off_.resize(ne);
  elem_off_nb_.resize(ne);
  auto rows = [&](const IndexList& dofs, Matrix& m, Vector& o) {
    m.resize(static_cast<Index>(dofs.size()), phi_.cols());
    o.resize(static_cast<Index>(dofs.size()));
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      m.row(static_cast<Index>(i)) = phi_.row(dofs[i]);
      o[static_cast<Index>(i)] = offset_[dofs[i]];
    }
  };
  for (Index e = 0; e < ne; ++e) {
    rows(conn.own_dofs[e], elem_phi_[e], elem_off_[e]);
    rows(conn.neighbor_dofs[e], elem_phi_nb_[e], elem_off_nb_[e]);
  }
}

void SnapshotStore::append(const Vector& u, const Vector& lambda) {
  require(u.allFinite() && lambda.allFinite(), "snapshot is not finite");
  primal.push_back(u);
  adjoint.push_back(lambda);
}

namespace {
Matrix stack(const std::vector<Vector>& cols) {
  if (cols.empty()) return Matrix();
  Matrix m(cols.front().size(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Index>(i)) = cols[i];
  return m;
}
}  // namespace

Matrix SnapshotStore::primal_matrix() const { return stack(primal); }
Matrix SnapshotStore::adjoint_matrix() const { return stack(adjoint); }

ReducedBasis build_tr_basis(const UnassembledSystem& sys, const SnapshotStore& store,
                            const Vector& u_star, const Vector& lambda_star,
                            const BasisOptions& opts) {
  require(u_star.size() == sys.num_states() && lambda_star.size() == sys.num_states(),
          "build_tr_basis: state length mismatch");
  std::vector<Matrix> blocks;
  if (!opts.affine) blocks.push_back(u_star);
  blocks.push_back(lambda_star);
  if (opts.include_initial_sensitivities) {
    require(store.initial_sensitivities.has_value(), "initial sensitivities requested but not stored");
    blocks.push_back(*store.initial_sensitivities);
  }
  if (store.size() > 0) {
    Matrix U = store.primal_matrix();
    if (opts.affine) U.colwise() -= u_star;
    const Matrix V = store.adjoint_matrix();
    const Index p = std::min(opts.p_max.value_or(U.cols()), U.cols());
    const Index q = std::min(opts.q_max.value_or(V.cols()), V.cols());
    if (U.norm() > 0) blocks.push_back(pod_compress(U, std::min(p, std::min(U.rows(), U.cols()))).modes);
    if (V.norm() > 0) blocks.push_back(pod_compress(V, std::min(q, std::min(V.rows(), V.cols()))).modes);
  }
  Index total = 0;
  for (const auto& b : blocks) total += b.cols();
  Matrix cols(sys.num_states(), total);
  Index c = 0;
  for (const auto& b : blocks) {
    cols.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  // lambda* can vanish (u-independent QoI); keep at least a valid basis
  Matrix phi;
  if (cols.norm() == 0.0) {
    phi = Matrix::Zero(sys.num_states(), 0);
  } else {
    phi = gram_schmidt(cols);
  }
  if (opts.affine) return ReducedBasis(sys, std::move(phi), u_star);
  return ReducedBasis(sys, std::move(phi));
}

}  // namespace eqptr
