#include "eqptr/lp.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace eqptr;
using namespace eqptr::testing;

namespace {

// Independent optimality certificate: primal feasibility, dual
// feasibility and complementary slackness.
void expect_certificate(const LinearProgram& lp, const LpResult& res, double tol = 1e-7) {
  ASSERT_EQ(res.status, LpStatus::optimal);
  const Vector slack = lp.h - lp.G * res.x;
  EXPECT_GE(slack.minCoeff(), -1e-9 * (1 + lp.h.cwiseAbs().maxCoeff()));
  EXPECT_GE(res.x.minCoeff(), -1e-9);
  ASSERT_EQ(res.duals.size(), lp.n_cons());
  EXPECT_GE(res.duals.size() ? res.duals.minCoeff() : 0.0, -tol);
  const Vector reduced = lp.c + lp.G.transpose() * res.duals;
  EXPECT_GE(reduced.minCoeff(), -tol);
  for (Index i = 0; i < lp.n_cons(); ++i) EXPECT_LE(std::abs(res.duals[i] * slack[i]), tol);
  for (Index j = 0; j < lp.n_vars(); ++j) EXPECT_LE(std::abs(res.x[j] * reduced[j]), tol);
  EXPECT_NEAR(res.objective, lp.c.dot(res.x), 1e-10 * (1 + std::abs(res.objective)));
}

// Random LP with a known feasible point and a bounding sum row. Sizes are
// kept so that exhaustive vertex enumeration stays cheap.
LinearProgram random_lp(std::mt19937& rng, Index n, Index m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 2.0);
  LinearProgram lp;
  lp.c.resize(n);
  for (Index j = 0; j < n; ++j) lp.c[j] = u(rng);
  lp.G.resize(m, n);
  lp.h.resize(m);
  Vector x0(n);
  for (Index j = 0; j < n; ++j) x0[j] = pos(rng);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) lp.G(i, j) = u(rng);
  lp.G.row(0).setOnes();  // sum x <= bound keeps the problem bounded
  for (Index i = 0; i < m; ++i) lp.h[i] = lp.G.row(i).dot(x0) + pos(rng) * (i % 3 == 0 ? 0.0 : 1.0);
  return lp;
}

}  // namespace

TEST(Lp, NoConstraintsGivesOrigin) {
  LinearProgram lp;
  lp.c = Vector::Ones(2);
  lp.G.resize(0, 2);
  lp.h.resize(0);
  const LpResult r = solve_lp(lp);
  EXPECT_EQ(r.status, LpStatus::optimal);
  EXPECT_EQ(r.x, Vector::Zero(2));
  EXPECT_EQ(r.objective, 0.0);
}

TEST(Lp, CoveringConstraintPicksCheaperVertex) {
  LinearProgram lp;
  lp.c = Vector::Ones(2);
  lp.G.resize(1, 2);
  lp.G << -2, -1;
  lp.h = Vector::Constant(1, -2.0);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 0.0, 1e-12);
  EXPECT_NEAR(r.objective, 1.0, 1e-12);
  Vector v;
  EXPECT_NEAR(vertex_enumeration(lp, &v), 1.0, 1e-12);
  expect_certificate(lp, r);
}

TEST(Lp, EqualityPairOnTwoElements) {
  // rho1 + 3 rho2 = 4 written as two inequalities
  LinearProgram lp;
  lp.c = Vector::Ones(2);
  lp.G.resize(2, 2);
  lp.G << 1, 3, -1, -3;
  lp.h = (Vector(2) << 4, -4).finished();
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.x[0], 0.0, 1e-12);
  EXPECT_NEAR(r.x[1], 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.objective, vertex_enumeration(lp), 1e-12);
}

TEST(Lp, InfeasibleIsReported) {
  LinearProgram lp;
  lp.c = Vector::Ones(1);
  lp.G = Matrix::Ones(1, 1);
  lp.h = Vector::Constant(1, -1.0);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::infeasible);
}

TEST(Lp, UnboundedIsReported) {
  LinearProgram lp;
  lp.c = (Vector(2) << -1, 0).finished();
  lp.G = (Matrix(1, 2) << -1, 1).finished();
  lp.h = Vector::Zero(1);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::unbounded);
}

TEST(Lp, MalformedInputIsContractViolation) {
  LinearProgram lp;
  lp.c = Vector::Ones(2);
  lp.G = Matrix::Ones(1, 3);
  lp.h = Vector::Ones(1);
  EXPECT_THROW(solve_lp(lp), ContractViolation);
  lp.G = Matrix::Ones(1, 2);
  lp.h[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_lp(lp), ContractViolation);
}

TEST(Lp, RandomProblemsMatchVertexEnumeration) {
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> nvar(2, 8), ncon(1, 5);
  for (int k = 0; k < 40; ++k) {
    const LinearProgram lp = random_lp(rng, nvar(rng), ncon(rng));
    const LpResult r = solve_lp(lp);
    const double ref = vertex_enumeration(lp);
    ASSERT_EQ(r.status, LpStatus::optimal) << "problem " << k;
    EXPECT_NEAR(r.objective, ref, 1e-8 * (1 + std::abs(ref))) << "problem " << k;
    expect_certificate(lp, r);
  }
}

TEST(Lp, NonnegativeCostsWithNarrowBandsMatchVertexEnumeration) {
  // |G x - g| <= w around a known nonnegative point, unit-ish costs: the
  // shape of the weight-training problems
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 2.0), cost(0.5, 1.5);
  for (int k = 0; k < 30; ++k) {
    const Index n = 4 + k % 5, m = 1 + k % 3;
    Vector x0(n);
    for (Index j = 0; j < n; ++j) x0[j] = pos(rng);
    LinearProgram lp;
    lp.c.resize(n);
    for (Index j = 0; j < n; ++j) lp.c[j] = k % 2 ? 1.0 : cost(rng);
    lp.G.resize(2 * m, n);
    lp.h.resize(2 * m);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) lp.G(i, j) = u(rng);
      lp.G.row(m + i) = -lp.G.row(i);
      const double w = std::pow(10.0, -1.0 - k % 6);
      lp.h[i] = lp.G.row(i).dot(x0) + w;
      lp.h[m + i] = -lp.G.row(i).dot(x0) + w;
    }
    const LpResult r = solve_lp(lp);
    const double ref = vertex_enumeration(lp);
    ASSERT_EQ(r.status, LpStatus::optimal) << "problem " << k;
    EXPECT_NEAR(r.objective, ref, 1e-8 * (1 + std::abs(ref))) << "problem " << k;
    expect_certificate(lp, r);
  }
}

TEST(Lp, DegenerateProblemTerminates) {
  // many constraints active at the optimum, all passing through the origin
  LinearProgram lp;
  lp.c = (Vector(3) << -1, -1, 1).finished();
  lp.G.resize(5, 3);
  lp.G << 1, 1, -1, 1, -1, 0, -1, 1, 0, 1, 0, -1, 0, 1, -1;
  lp.h = Vector::Zero(5);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.objective, vertex_enumeration(lp), 1e-10);
}

TEST(Lp, DeterministicPivots) {
  std::mt19937 rng(9);
  const LinearProgram lp = random_lp(rng, 10, 4);
  const LpResult a = solve_lp(lp), b = solve_lp(lp);
  EXPECT_EQ(a.pivots, b.pivots);
  EXPECT_EQ(a.x, b.x);
}

TEST(Lp, PivotLimitIsReported) {
  std::mt19937 rng(10);
  const LinearProgram lp = random_lp(rng, 10, 5);
  LpOptions opts;
  opts.max_pivots = 0;
  const LpResult r = solve_lp(lp, opts);
  EXPECT_EQ(r.status, LpStatus::iteration_limit);
}
