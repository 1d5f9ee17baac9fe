#include "eqptr/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <unordered_map>

namespace eqptr {

void LinearProgram::validate() const {
  require(G.cols() == c.size() || G.rows() == 0, "LP: G column count differs from c");
  require(G.rows() == h.size(), "LP: G row count differs from h");
  require(c.allFinite() && G.allFinite() && h.allFinite(), "LP: non-finite data");
}

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

// The simplex works in extended precision: training LPs with tight
// tolerances produce bases with condition numbers near 1e10.
using Real = long double;
using MatL = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VecL = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
constexpr Real kInf = std::numeric_limits<Real>::infinity();

// Exact bit pattern of a row, with -0 folded into +0, for pair lookup.
std::size_t row_hash(const Matrix& g, Index i, double sign) {
  std::size_t h = 1469598103934665603ull;
  for (Index j = 0; j < g.cols(); ++j) {
    double v = sign * g(i, j);
    if (v == 0.0) v = 0.0;
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = (h ^ std::size_t(bits)) * 1099511628211ull;
  }
  return h;
}

// One equality row  G_upper x + s = h_upper  with 0 <= s <= range. A row
// whose exact negation also appears becomes a single ranged row; this keeps
// narrow two-sided bands from turning into long zig-zags in phase one.
struct RangedRow {
  Index upper = -1;
  Index lower = -1;  // original index of the negated partner, or -1
};

std::vector<RangedRow> pair_rows(const Matrix& g) {
  std::vector<RangedRow> rows;
  std::unordered_map<std::size_t, std::vector<Index>> open;  // unpaired rows by hash
  std::vector<Index> slot(static_cast<std::size_t>(g.rows()), -1);
  for (Index i = 0; i < g.rows(); ++i) {
    bool paired = false;
    if (g.row(i).any()) {
      auto it = open.find(row_hash(g, i, -1.0));
      if (it != open.end()) {
        auto& cand = it->second;
        for (auto c = cand.begin(); c != cand.end(); ++c) {
          if ((g.row(*c) + g.row(i)).isZero(0.0)) {
            rows[std::size_t(slot[std::size_t(*c)])].lower = i;
            cand.erase(c);
            paired = true;
            break;
          }
        }
      }
    }
    if (paired) continue;
    slot[std::size_t(i)] = static_cast<Index>(rows.size());
    rows.push_back({i, -1});
    open[row_hash(g, i, 1.0)].push_back(i);
  }
  return rows;
}

// Bounded-variable revised simplex on  A z = b, 0 <= z <= u, with columns
// [structural | slacks | artificials].
class Simplex {
 public:
  Simplex(const LinearProgram& lp, const LpOptions& opts) : opts_(opts), lp_(lp) {
    n_ = lp.n_vars();
    rows_ = pair_rows(lp.G);
    m_ = static_cast<Index>(rows_.size());
    Index n_art = 0;
    std::vector<Real> range(static_cast<std::size_t>(m_), kInf);
    for (Index r = 0; r < m_; ++r) {
      const auto& row = rows_[std::size_t(r)];
      if (row.lower >= 0) {
        Real w = lp.h[row.upper] + lp.h[row.lower];
        if (w < 0) {
          if (w < -opts.feas_tol * (1.0 + std::fabs(lp.h[row.upper]))) empty_range_ = true;
          w = 0.0;
        }
        range[std::size_t(r)] = w;
      }
      const Real h = lp.h[row.upper];
      if (h < 0 || h > range[std::size_t(r)]) ++n_art;
    }
    ncols_ = n_ + m_ + n_art;
    first_art_ = n_ + m_;
    a_ = MatL::Zero(m_, ncols_);
    b_ = VecL(m_);
    up_ = VecL::Constant(ncols_, kInf);
    state_.assign(static_cast<std::size_t>(ncols_), kLower);
    basis_.resize(m_);
    Index art = first_art_;
    for (Index r = 0; r < m_; ++r) {
      const auto& row = rows_[std::size_t(r)];
      if (n_ > 0) a_.row(r).head(n_) = lp.G.row(row.upper).cast<Real>();
      const Index s = n_ + r;
      a_(r, s) = 1.0;
      up_[s] = range[std::size_t(r)];
      b_[r] = lp.h[row.upper];
      if (b_[r] >= 0 && b_[r] <= up_[s]) {
        basis_[r] = s;
        state_[std::size_t(s)] = kBasic;
      } else {
        if (b_[r] > up_[s]) state_[std::size_t(s)] = kUpper;
        a_(r, art) = b_[r] < 0 ? -1.0 : 1.0;
        basis_[r] = art;
        state_[std::size_t(art)] = kBasic;
        ++art;
      }
    }
    max_pivots_ = opts.max_pivots.value_or(50L * (n_ + lp.n_cons()));
    cost2_ = VecL::Zero(ncols_);
    cost2_.head(n_) = lp.c.cast<Real>();
  }

  // Two-phase primal method.
  LpResult run() {
    LpResult res;
    res.x = Vector::Zero(n_);
    if (empty_range_) return finish(res, LpStatus::infeasible);
    refactor();
    if (ncols_ > first_art_) {
      VecL c1 = VecL::Zero(ncols_);
      c1.tail(ncols_ - first_art_).setOnes();
      const Phase p1 = iterate(c1, true);
      if (p1 == Phase::limit) return finish(res, LpStatus::iteration_limit);
      const Real infeas = c1.dot(full_solution());
      if (infeas > opts_.feas_tol * std::max<Real>(1.0, b_.lpNorm<Eigen::Infinity>()))
        return finish(res, LpStatus::infeasible);
      drive_out_artificials();
    }
    return polish(res, iterate(cost2_, false));
  }

  // Dual method from the all-slack basis, which is dual feasible when the
  // costs are nonnegative. Anything but an optimal finish is reported as
  // iteration_limit so the caller can retry with the primal method.
  LpResult run_dual() {
    LpResult res;
    res.x = Vector::Zero(n_);
    if (empty_range_) return finish(res, LpStatus::infeasible);
    for (Index j = first_art_; j < ncols_; ++j) {
      up_[j] = 0.0;
      state_[std::size_t(j)] = kLower;
    }
    for (Index r = 0; r < m_; ++r) {
      state_[std::size_t(n_ + r)] = kBasic;
      basis_[r] = n_ + r;
    }
    refactor();
    // Costs of equal size leave every structural reduced cost at zero once
    // a covering row is basic-tight, and the dual method then stalls. A
    // small deterministic spread breaks the ties; the primal pass below
    // restores the true costs.
    VecL c = cost2_;
    for (Index j = 0; j < n_; ++j)
      c[j] += kCostSpread * (1.0 + std::fabs(cost2_[j])) * (1.0 + Real((j * 7919) % 1009) / 1009);
    if (dual_iterate(c) != Phase::optimal) return finish(res, LpStatus::iteration_limit);
    return polish(res, iterate(cost2_, false));
  }

 private:
  enum class Phase { optimal, unbounded, limit };
  static constexpr char kBasic = 0, kLower = 1, kUpper = 2;

  LpResult polish(LpResult& res, Phase p2) {
    // fresh factorization of the final basis, then confirm optimality
    for (int round = 0; p2 == Phase::optimal && round < 5; ++round) {
      refactor();
      const long before = pivots_;
      p2 = iterate(cost2_, false);
      if (pivots_ == before) break;
    }
    if (p2 == Phase::limit) return finish(res, LpStatus::iteration_limit);
    if (p2 == Phase::unbounded) return finish(res, LpStatus::unbounded);
    finish(res, LpStatus::optimal);
    // multipliers of the original inequalities; a ranged row splits its
    // multiplier between the two sides by sign
    const VecL y = binv_.transpose() * cost_basic(cost2_);
    res.duals = Vector::Zero(lp_.n_cons());
    for (Index r = 0; r < m_; ++r) {
      const auto& row = rows_[std::size_t(r)];
      if (row.lower < 0) {
        res.duals[row.upper] = double(-y[r]);
      } else {
        res.duals[row.upper] = double(std::max<Real>(-y[r], 0));
        res.duals[row.lower] = double(std::max<Real>(y[r], 0));
      }
    }
    return res;
  }

  // Leaving row by largest bound violation, Harris ratio test on the
  // reduced costs. Phase::unbounded here means the row admits no entering
  // column, i.e. the primal is infeasible.
  Phase dual_iterate(const VecL& c) {
    const Index nc = first_art_;
    const long stall_limit = std::max<long>(200, 2 * m_);
    long stall = 0;
    Real best_obj = -kInf;
    for (;;) {
      const Real obj = c.dot(full_solution());
      if (obj > best_obj + 1e-14 * (1.0 + std::fabs(obj))) {
        best_obj = obj;
        stall = 0;
      } else if (++stall > stall_limit) {
        return Phase::limit;
      }
      Index r = -1;
      char to = kLower;
      Real worst = opts_.feas_tol;
      for (Index i = 0; i < m_; ++i) {
        if (-xb_[i] > worst) {
          worst = -xb_[i];
          r = i;
          to = kLower;
        }
        if (xb_[i] - up_[basis_[i]] > worst) {
          worst = xb_[i] - up_[basis_[i]];
          r = i;
          to = kUpper;
        }
      }
      if (r < 0) return Phase::optimal;
      if (pivots_ >= max_pivots_) return Phase::limit;

      const VecL y = binv_.transpose() * cost_basic(c);
      const VecL d = c.head(nc) - a_.leftCols(nc).transpose() * y;
      const VecL arow = a_.leftCols(nc).transpose() * binv_.row(r).transpose();
      const Real piv_tol = kPivotTol * std::max<Real>(1.0, arow.lpNorm<Eigen::Infinity>());
      // x_r has to rise (to lower bound) or fall (to upper bound); moving
      // nonbasic j by t shifts x_r by -arow_j t
      const Real want = to == kLower ? 1.0 : -1.0;
      auto eligible = [&](Index j) {
        const char st = state_[std::size_t(j)];
        if (st == kBasic || up_[j] == 0.0) return false;
        const Real dirj = st == kLower ? 1.0 : -1.0;
        return -arow[j] * dirj * want > piv_tol;
      };
      auto slack_of = [&](Index j) {
        return std::max<Real>(state_[std::size_t(j)] == kLower ? d[j] : -d[j], 0);
      };
      // bound-flipping ratio test: walk the breakpoints in order, flipping
      // boxed columns while the row stays infeasible past them
      std::vector<std::pair<Real, Index>> breaks;
      for (Index j = 0; j < nc; ++j)
        if (eligible(j)) breaks.emplace_back(slack_of(j) / std::fabs(arow[j]), j);
      if (breaks.empty()) return Phase::unbounded;
      std::sort(breaks.begin(), breaks.end());
      Real slope = worst;
      std::size_t k = 0;
      for (; k + 1 < breaks.size(); ++k) {
        const Index j = breaks[k].second;
        const Real drop = up_[j] * std::fabs(arow[j]);
        if (up_[j] == kInf || slope - drop <= 0) break;
        slope -= drop;
      }
      // among breakpoints tied with the chosen one take the largest pivot
      Index q = breaks[k].second;
      for (std::size_t t = k + 1; t < breaks.size(); ++t) {
        const Index j = breaks[t].second;
        if (breaks[t].first > breaks[k].first + opts_.opt_tol / std::fabs(arow[j])) break;
        if (std::fabs(arow[j]) > std::fabs(arow[q])) q = j;
      }
      if (k > 0) {
        VecL shift = VecL::Zero(m_);
        for (std::size_t t = 0; t < k; ++t) {
          const Index j = breaks[t].second;
          if (j == q) continue;
          const bool up = state_[std::size_t(j)] == kLower;
          shift += (up ? up_[j] : -up_[j]) * a_.col(j);
          state_[std::size_t(j)] = up ? kUpper : kLower;
        }
        xb_ -= binv_ * shift;
      }
      const VecL alpha = binv_ * a_.col(q);
      const Real target = to == kLower ? 0.0 : up_[basis_[r]];
      const Real step = (xb_[r] - target) / alpha[r];
      xb_ -= step * alpha;
      const Real start = state_[std::size_t(q)] == kUpper ? up_[q] : 0.0;
      pivot(r, q, alpha, start + step, to);
    }
  }

  VecL cost_basic(const VecL& c) const {
    VecL cb(m_);
    for (Index i = 0; i < m_; ++i) cb[i] = c[basis_[i]];
    return cb;
  }

  VecL full_solution() const {
    VecL z = VecL::Zero(ncols_);
    for (Index j = 0; j < ncols_; ++j)
      if (state_[std::size_t(j)] == kUpper) z[j] = up_[j];
    for (Index i = 0; i < m_; ++i) z[basis_[i]] = xb_[i];
    return z;
  }

  LpResult& finish(LpResult& res, LpStatus status) {
    if (xb_.size() == m_) {
      const VecL z = full_solution();
      res.x = z.head(n_).cwiseMax(Real(0)).cast<double>();
    }
    res.objective = lp_.c.dot(res.x);
    res.status = status;
    res.pivots = pivots_;
    return res;
  }

  void refactor() {
    MatL bmat(m_, m_);
    for (Index i = 0; i < m_; ++i) bmat.col(i) = a_.col(basis_[i]);
    Eigen::FullPivLU<MatL> lu(bmat);
    if (!lu.isInvertible()) throw LinearAlgebraError("simplex basis became singular");
    binv_ = lu.inverse();
    VecL rhs = b_;
    for (Index j = 0; j < ncols_; ++j)
      if (state_[std::size_t(j)] == kUpper) rhs -= up_[j] * a_.col(j);
    // residual of the basic equations matters more than x itself here, so
    // solve through the factorization with one refinement step
    xb_ = lu.solve(rhs);
    xb_ += lu.solve(rhs - bmat * xb_);
    since_refactor_ = 0;
    since_flip_sync_ = 0;
  }

  // Basic values from the current inverse; flips drift only these.
  void sync_basic_values() {
    VecL rhs = b_;
    for (Index j = 0; j < ncols_; ++j)
      if (state_[std::size_t(j)] == kUpper) rhs -= up_[j] * a_.col(j);
    xb_ = binv_ * rhs;
    since_flip_sync_ = 0;
  }

  // Entering column q becomes basic in row r with value `value`.
  void pivot(Index r, Index q, const VecL& alpha, Real value, char leaving_state) {
    const VecL prow = binv_.row(r) / alpha[r];
    for (Index i = 0; i < m_; ++i) {
      if (i == r) continue;
      if (alpha[i] != 0.0) binv_.row(i) -= alpha[i] * prow.transpose();
    }
    binv_.row(r) = prow.transpose();
    state_[std::size_t(basis_[r])] = leaving_state;
    basis_[r] = q;
    state_[std::size_t(q)] = kBasic;
    xb_[r] = value;
    ++pivots_;
    if (++since_refactor_ >= opts_.refactor_interval) refactor();
  }

  // Dantzig pricing; after kStallLimit iterations without objective
  // progress switch to Bland's rule (lowest index entering, lowest basic
  // index on ratio ties) until the objective moves again. Outside Bland mode
  // ratio ties go to the largest pivot element.
  Phase iterate(const VecL& c, bool phase_one) {
    int stall = 0;
    Real last_obj = kInf;
    const Index limit = phase_one ? ncols_ : first_art_;
    // reduced costs only change when the basis does, not on bound flips
    VecL d;
    bool stale = true;
    for (;;) {
      const VecL cb = cost_basic(c);
      Real obj = cb.dot(xb_);
      for (Index j = 0; j < ncols_; ++j)
        if (state_[std::size_t(j)] == kUpper) obj += c[j] * up_[j];
      if (obj < last_obj - 1e-12 * (1.0 + std::fabs(obj))) {
        stall = 0;
        last_obj = obj;
      } else {
        ++stall;
      }
      const bool bland = stall > kStallLimit;
      if (stale) {
        const VecL y = binv_.transpose() * cb;
        d = c.head(limit) - a_.leftCols(limit).transpose() * y;
        stale = false;
      }
      Index q = -1;
      Real most = opts_.opt_tol;
      for (Index j = 0; j < limit; ++j) {
        const char st = state_[std::size_t(j)];
        if (st == kBasic || up_[j] == 0.0) continue;
        const Real gain = st == kLower ? -d[j] : d[j];
        if (gain > most) {
          q = j;
          if (bland) break;
          most = gain;
        }
      }
      if (q < 0) return Phase::optimal;
      if (pivots_ >= max_pivots_) return Phase::limit;

      const Real dir = state_[std::size_t(q)] == kLower ? 1.0 : -1.0;
      const VecL alpha = binv_ * a_.col(q);
      const Real piv_tol = kPivotTol * std::max<Real>(1.0, alpha.lpNorm<Eigen::Infinity>());
      // distance of basic i to the bound it moves toward, per unit step
      auto bound_gap = [&](Index i, Real rate, char& to) -> Real {
        if (rate < -piv_tol) {
          to = kLower;
          return xb_[i];
        }
        if (rate > piv_tol && up_[basis_[i]] < kInf) {
          to = kUpper;
          return up_[basis_[i]] - xb_[i];
        }
        return kInf;
      };
      Index r = -1;
      char leave = kLower;
      Real best = kInf;
      if (bland) {
        // textbook ratio test, lowest basic index on ties
        for (Index i = 0; i < m_; ++i) {
          const Real rate = -dir * alpha[i];
          char to;
          const Real gap = bound_gap(i, rate, to);
          if (gap == kInf) continue;
          const Real t = std::max<Real>(gap, 0.0) / std::fabs(rate);
          const Real tie = 1e-12 * std::max<Real>(1.0, best);
          if (r < 0 || t < best - tie || (std::fabs(t - best) <= tie && basis_[i] < basis_[r])) {
            best = r < 0 ? t : std::min<Real>(best, t);
            r = i;
            leave = to;
          }
        }
      } else {
        // Harris: bound the step with the feasibility tolerance, then take
        // the largest pivot among rows blocking within that bound
        Real tmax = kInf;
        for (Index i = 0; i < m_; ++i) {
          const Real rate = -dir * alpha[i];
          char to;
          const Real gap = bound_gap(i, rate, to);
          if (gap == kInf) continue;
          tmax = std::min<Real>(tmax, (std::max<Real>(gap, 0.0) + opts_.feas_tol) / std::fabs(rate));
        }
        Real big = 0.0;
        for (Index i = 0; i < m_; ++i) {
          const Real rate = -dir * alpha[i];
          char to;
          const Real gap = bound_gap(i, rate, to);
          if (gap == kInf) continue;
          const Real t = std::max<Real>(gap, 0.0) / std::fabs(rate);
          if (t <= tmax && std::fabs(alpha[i]) > big) {
            big = std::fabs(alpha[i]);
            best = t;
            r = i;
            leave = to;
          }
        }
      }
      const Real flip = up_[q];
      if (flip <= best || r < 0) {
        // the entering variable reaches its other bound first
        if (flip == kInf) return Phase::unbounded;
        xb_ -= dir * flip * alpha;
        state_[std::size_t(q)] = dir > 0 ? kUpper : kLower;
        ++pivots_;
        if (++since_flip_sync_ >= opts_.refactor_interval) sync_basic_values();
        continue;
      }
      xb_ -= dir * best * alpha;
      const Real value = dir > 0 ? best : up_[q] - best;
      pivot(r, q, alpha, value, leave);
      stale = true;
    }
  }

  // Replace zero-level basic artificials by structural or slack columns and
  // pin every artificial at zero. Rows where no replacement exists are
  // redundant and keep their (fixed) artificial.
  void drive_out_artificials() {
    for (Index r = 0; r < m_; ++r) {
      if (basis_[r] < first_art_) continue;
      const VecL row = binv_.row(r);
      Index best = -1;
      Real best_a = 1e-9;
      for (Index j = 0; j < first_art_; ++j) {
        if (state_[std::size_t(j)] == kBasic) continue;
        const Real a = std::fabs(row.dot(a_.col(j)));
        if (a > best_a) {
          best_a = a;
          best = j;
        }
      }
      if (best < 0) continue;
      const Real value = state_[std::size_t(best)] == kUpper ? up_[best] : 0.0;
      pivot(r, best, binv_ * a_.col(best), value, kLower);
    }
    for (Index j = first_art_; j < ncols_; ++j) up_[j] = 0.0;
    refactor();
  }

  static constexpr Real kPivotTol = 1e-9;
  static constexpr Real kCostSpread = 1e-5;
  static constexpr int kStallLimit = 50;
  const LpOptions& opts_;
  const LinearProgram& lp_;
  std::vector<RangedRow> rows_;
  bool empty_range_ = false;
  Index n_ = 0, m_ = 0, ncols_ = 0, first_art_ = 0;
  MatL a_;
  VecL b_, up_, cost2_;
  std::vector<char> state_;
  std::vector<Index> basis_;
  MatL binv_;
  VecL xb_;
  long pivots_ = 0, max_pivots_ = 0;
  int since_refactor_ = 0;
  int since_flip_sync_ = 0;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts) {
  lp.validate();
  require(opts.opt_tol > 0 && opts.feas_tol > 0, "LP tolerances must be positive");
  if (lp.n_cons() == 0) {
    // only x >= 0: optimal at zero unless some cost is negative
    LpResult res;
    res.x = Vector::Zero(lp.n_vars());
    res.duals = Vector(0);
    res.status = (lp.c.array() < -opts.opt_tol).any() ? LpStatus::unbounded : LpStatus::optimal;
    return res;
  }
  try {
    // nonnegative costs make the slack basis dual feasible
    if (lp.c.minCoeff() >= 0.0) {
      LpResult res = Simplex(lp, opts).run_dual();
      if (res.status == LpStatus::optimal || res.status == LpStatus::infeasible) return res;
    }
    return Simplex(lp, opts).run();
  } catch (const LinearAlgebraError&) {
    LpResult res;
    res.x = Vector::Zero(lp.n_vars());
    res.status = LpStatus::iteration_limit;
    return res;
  }
}

}  // namespace eqptr
