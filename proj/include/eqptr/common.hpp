#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqptr {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using IndexList = std::vector<Index>;

// Precondition or dimension violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values produced by a callback.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, Index element = -1)
      : std::runtime_error(what), element_(element) {}
  Index element() const { return element_; }

 private:
  Index element_;
};

class LinearAlgebraError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solver gave up. Carries the residual history so callers can
// report how far it got.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  double last_residual() const {
    return history_.empty() ? std::numeric_limits<double>::quiet_NaN() : history_.back();
  }
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Box constraints on the parameters.
struct ParameterBox {
  Vector lower;
  Vector upper;

  void validate(Index n_mu) const;
  Vector project(const Vector& mu) const;
  bool contains(const Vector& mu, double tol = 0.0) const;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace eqptr
