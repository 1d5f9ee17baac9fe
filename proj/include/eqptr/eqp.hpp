#pragma once

#include "eqptr/lp.hpp"
#include "eqptr/reduced_model.hpp"

#include <limits>
#include <string>

namespace eqptr {

// Constraint families of the weight-training problem: domain volume,
// primal residual, adjoint residual, gradient reconstruction, QoI, and
// sensitivity residual.
enum class Family { dv, rp, ra, ga, q, rs };
std::string to_string(Family f);

struct ToleranceSet {
  static constexpr double kOff = std::numeric_limits<double>::infinity();
  double dv = kOff, rp = kOff, ra = kOff, ga = kOff, q = kOff, rs = kOff;

  double get(Family f) const;
  void set(Family f, double value);
  void validate() const;  // all >= 0 (infinity allowed: family omitted)
};

enum class ConstraintSet { C1, C2, C3 };
std::vector<Family> families(ConstraintSet set);
bool needs_sensitivities(ConstraintSet set);

struct TrainingPoint {
  Vector mu;
  Vector y;
  Vector lambda;
  std::optional<Matrix> sensitivity;
};

struct EqpTrainingData {
  std::vector<TrainingPoint> points;
};

// Solves the unweighted reduced model at every training parameter.
// guesses may be empty (zero initial guess) or hold one vector per mu.
EqpTrainingData prepare_training(const ReducedModel& rom, const std::vector<Vector>& mus,
                                 const std::vector<Vector>& guesses, bool with_sensitivities,
                                 const ReducedNewtonConfig& cfg = {});

struct ConstraintRows {
  Matrix A;  // rows x N_e
  Vector b;
  std::vector<Family> labels;
};

// Rows r with |A_r rho - b_r| <= delta_family. Order: dv, then per training
// point rp, ra, ga, q, rs as selected. rs is flattened row-major over
// (basis index, parameter index).
ConstraintRows assemble_constraint_rows(const ReducedModel& rom, const EqpTrainingData& training,
                                        ConstraintSet selection);

struct DedupResult {
  Matrix A;
  Vector b;
  IndexList kept;
};

// Column-pivoted QR of A^T; rows whose diagonal factor is below
// tol * (largest diagonal) are dropped.
DedupResult dedup_rows(const Matrix& A, const Vector& b, double tol = 1e-10);

struct TrainingReport {
  Index rows_total = 0;
  Index rows_kept = 0;
  long lp_pivots = 0;
  double max_violation = 0.0;  // max over rows of |A rho - b| - delta
  int resolves = 0;
};

// Minimizes sum(rho) subject to rho >= 0 and every active row. Rows of
// families with infinite tolerance are ignored.
WeightVector train_weights(const ConstraintRows& rows, const ToleranceSet& delta,
                           const LpOptions& lp = {}, TrainingReport* report = nullptr);

// Hyperreduced solves: thin wrappers around a weighted ReducedModel.
ReducedPrimal eqp_solve_primal(const UnassembledSystem& sys, const ReducedBasis& basis,
                               const WeightVector& rho, const Vector& mu, const Vector& guess,
                               bool structural_qoi = false);
Vector eqp_solve_adjoint(const UnassembledSystem& sys, const ReducedBasis& basis,
                         const WeightVector& rho, const Vector& mu, const Vector& y,
                         bool structural_qoi = false);
Vector eqp_gradient(const UnassembledSystem& sys, const ReducedBasis& basis,
                    const WeightVector& rho, const Vector& mu, const Vector& y,
                    const Vector& lambda, bool structural_qoi = false);
ReducedObjective eqp_objective(const UnassembledSystem& sys, const ReducedBasis& basis,
                               const WeightVector& rho, const Vector& mu, const Vector& guess,
                               bool structural_qoi = false);

// Debug dump: one line per row with label, b and the row entries, followed
// by the weights.
void write_constraint_dump(const std::string& path, const ConstraintRows& rows,
                           const WeightVector& rho);

}  // namespace eqptr
