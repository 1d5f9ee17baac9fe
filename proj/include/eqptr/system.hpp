#pragma once

#include "eqptr/common.hpp"

#include <atomic>
#include <memory>
#include <optional>

namespace eqptr {

struct ElementConnectivity {
  std::vector<IndexList> own_dofs;
  std::vector<IndexList> neighbor_dofs;  // may be empty per element (CG case)
  std::vector<double> element_volume;
  double domain_volume = 0.0;

  Index num_elements() const { return static_cast<Index>(own_dofs.size()); }
  // Throws ContractViolation on out-of-range or duplicate indices,
  // negative volumes, or volumes that do not sum to domain_volume.
  void validate(Index num_states) const;
};

// Which pieces of an element evaluation are requested.
enum EvalFlags : unsigned {
  kResidual = 1u << 0,
  kStateJacobian = 1u << 1,
  kParamJacobian = 1u << 2,
  kQoi = 1u << 3,
  kQoiGradient = 1u << 4,
  kAll = 0x1fu,
};

// Local blocks for one element. Only the requested fields are filled.
struct ElementEval {
  Vector residual;  // |own|
  Matrix dr_du;     // |own| x |own|
  Matrix dr_dunb;   // |own| x |nb|
  Matrix dr_dmu;    // |own| x N_mu
  double qoi = 0.0;
  Vector dq_du;     // |own|
  Vector dq_dmu;    // N_mu
};

// Optional quadratic representation of the QoI,
//   j(u, mu) = 1/2 (u - t)^T M (u - t) + c(mu)
// used to evaluate the reduced QoI exactly on the reduced side. The per
// element callbacks must still implement the same functional.
struct QuadraticQoi {
  SparseMatrix mass;
  Vector target;
};

class UnassembledSystem {
 public:
  virtual ~UnassembledSystem() = default;

  virtual Index num_states() const = 0;
  virtual Index num_params() const = 0;
  virtual const ElementConnectivity& connectivity() const = 0;
  Index num_elements() const { return connectivity().num_elements(); }

  virtual std::optional<ParameterBox> parameter_box() const { return std::nullopt; }
  virtual const QuadraticQoi* quadratic_qoi() const { return nullptr; }

  // Evaluates element e. ue and ue_nb are the gathered own and neighbor
  // values. Every call is counted, which lets tests check that skipped
  // elements are really skipped.
  void evaluate(Index e, const Vector& ue, const Vector& ue_nb, const Vector& mu,
                unsigned flags, ElementEval& out) const {
    ++evaluations_;
    do_evaluate(e, ue, ue_nb, mu, flags, out);
  }

  long evaluation_count() const { return evaluations_.load(); }
  void reset_evaluation_count() const { evaluations_ = 0; }

 protected:
  virtual void do_evaluate(Index e, const Vector& ue, const Vector& ue_nb, const Vector& mu,
                           unsigned flags, ElementEval& out) const = 0;

 private:
  mutable std::atomic<long> evaluations_{0};
};

Vector gather(const Vector& u, const IndexList& dofs);
void scatter_add(const Vector& local, const IndexList& dofs, Vector& global);

// Sparse Jacobian with the pattern built once from the connectivity.
class JacobianAssembler {
 public:
  explicit JacobianAssembler(const UnassembledSystem& sys);
  // Returns the Jacobian at (u, mu); values are refreshed into the cached pattern.
  const SparseMatrix& assemble(const Vector& u, const Vector& mu);
  const SparseMatrix& pattern() const { return matrix_; }

 private:
  const UnassembledSystem& sys_;
  SparseMatrix matrix_;
  // per element, row-major over (local row, local col) in own then neighbor
  // order: offset into matrix_.valuePtr()
  std::vector<std::vector<Index>> slots_;
};

struct GlobalEvaluation {
  Vector residual;
  SparseMatrix jacobian;
  double qoi = 0.0;
  Vector qoi_state_grad;
  Vector qoi_param_grad;
  Matrix residual_param_jac;
};

struct QoiDerivatives {
  Vector du;
  Vector dmu;
};

Vector assemble_residual(const UnassembledSystem& sys, const Vector& u, const Vector& mu);
SparseMatrix assemble_jacobian(const UnassembledSystem& sys, const Vector& u, const Vector& mu);
double assemble_qoi(const UnassembledSystem& sys, const Vector& u, const Vector& mu);
QoiDerivatives assemble_qoi_derivatives(const UnassembledSystem& sys, const Vector& u,
                                        const Vector& mu);
Matrix assemble_param_jacobian(const UnassembledSystem& sys, const Vector& u, const Vector& mu);
GlobalEvaluation evaluate_global(const UnassembledSystem& sys, const Vector& u,
                                 const Vector& mu);

// Checks sizes of u and mu against the system metadata.
void check_dimensions(const UnassembledSystem& sys, const Vector& u, const Vector& mu);
// Throws NumericError naming e if any requested output is non-finite.
void check_element_finite(Index e, unsigned flags, const ElementEval& ev);

}  // namespace eqptr
