#include "eqptr/eqp.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace eqptr {

std::string to_string(Family f) {
  switch (f) {
    case Family::dv: return "dv";
    case Family::rp: return "rp";
    case Family::ra: return "ra";
    case Family::ga: return "ga";
    case Family::q: return "q";
    case Family::rs: return "rs";
  }
  return "?";
}

double ToleranceSet::get(Family f) const {
  switch (f) {
    case Family::dv: return dv;
    case Family::rp: return rp;
    case Family::ra: return ra;
    case Family::ga: return ga;
    case Family::q: return q;
    case Family::rs: return rs;
  }
  return kOff;
}

void ToleranceSet::set(Family f, double value) {
  switch (f) {
    case Family::dv: dv = value; break;
    case Family::rp: rp = value; break;
    case Family::ra: ra = value; break;
    case Family::ga: ga = value; break;
    case Family::q: q = value; break;
    case Family::rs: rs = value; break;
  }
}

void ToleranceSet::validate() const {
  for (double d : {dv, rp, ra, ga, q, rs})
    require(d >= 0.0 && !std::isnan(d), "tolerances must be nonnegative");
}

std::vector<Family> families(ConstraintSet set) {
  switch (set) {
    case ConstraintSet::C1: return {Family::dv, Family::rp, Family::ra, Family::ga, Family::q};
    case ConstraintSet::C2: return {Family::dv, Family::rp, Family::ra, Family::ga, Family::rs};
    case ConstraintSet::C3:
      return {Family::dv, Family::rp, Family::ra, Family::ga, Family::q, Family::rs};
  }
  return {};
}

bool needs_sensitivities(ConstraintSet set) { return set != ConstraintSet::C1; }

EqpTrainingData prepare_training(const ReducedModel& rom, const std::vector<Vector>& mus,
                                 const std::vector<Vector>& guesses, bool with_sensitivities,
                                 const ReducedNewtonConfig& cfg) {
  require(!mus.empty(), "training set is empty");
  require(guesses.empty() || guesses.size() == mus.size(), "one guess per training parameter");
  EqpTrainingData data;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    TrainingPoint tp;
    tp.mu = mus[i];
    const Vector guess = guesses.empty() ? Vector::Zero(rom.size()) : guesses[i];
    tp.y = rom.solve_primal(mus[i], guess, cfg).y;
    tp.lambda = rom.solve_adjoint(mus[i], tp.y);
    if (with_sensitivities) tp.sensitivity = rom.solve_sensitivity(mus[i], tp.y);
    data.points.push_back(std::move(tp));
  }
  return data;
}

ConstraintRows assemble_constraint_rows(const ReducedModel& rom, const EqpTrainingData& training,
                                        ConstraintSet selection) {
  require(!training.points.empty(), "training set is empty");
  const UnassembledSystem& sys = rom.system();
  const Index ne = sys.num_elements();
  const Index n = rom.size();
  const Index nmu = sys.num_params();
  const auto fams = families(selection);
  const bool structural = rom.structural_qoi();

  auto kind_of = [](Family f) {
    switch (f) {
      case Family::rp: return ReducedKind::residual;
      case Family::ra: return ReducedKind::adjoint_residual;
      case Family::ga: return ReducedKind::gradient_recon;
      case Family::q: return ReducedKind::qoi;
      default: return ReducedKind::sensitivity_residual;
    }
  };

  std::vector<Matrix> blocks;
  std::vector<Vector> rhs;
  std::vector<Family> labels;

  // domain volume
  {
    const auto& conn = sys.connectivity();
    Matrix a(1, ne);
    for (Index e = 0; e < ne; ++e) a(0, e) = conn.element_volume[e];
    blocks.push_back(a);
    rhs.push_back(Vector::Constant(1, conn.domain_volume));
    labels.push_back(Family::dv);
  }

  for (const auto& tp : training.points) {
    ReducedAux aux;
    aux.lambda = &tp.lambda;
    if (tp.sensitivity) aux.sensitivity = &*tp.sensitivity;
    for (Family f : fams) {
      if (f == Family::dv) continue;
      if (f == Family::q && structural) continue;  // QoI is exact on the reduced side
      if (f == Family::rs)
        require(tp.sensitivity.has_value(), "sensitivity rows need reduced sensitivities");
      const ReducedKind kind = kind_of(f);
      const Index len = kind_length(kind, n, nmu);
      Matrix a(len, ne);
      for (Index e = 0; e < ne; ++e) a.col(e) = rom.element_contribution(e, kind, tp.y, tp.mu, aux);
      const Vector c = rom.constant_term(kind, tp.y, tp.mu, aux);
      Vector b;
      if (f == Family::ga || f == Family::q) {
        // reproduce the unweighted reduced quantity
        b = a.rowwise().sum();
      } else {
        // residual-type rows: the reduced residual vanishes at the solution
        b = -c;
      }
      blocks.push_back(std::move(a));
      rhs.push_back(std::move(b));
      for (Index i = 0; i < len; ++i) labels.push_back(f);
    }
  }

  Index total = 0;
  for (const auto& b : blocks) total += b.rows();
  ConstraintRows out;
  out.A.resize(total, ne);
  out.b.resize(total);
  Index r = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    out.A.middleRows(r, blocks[k].rows()) = blocks[k];
    out.b.segment(r, blocks[k].rows()) = rhs[k];
    r += blocks[k].rows();
  }
  out.labels = std::move(labels);
  return out;
}

DedupResult dedup_rows(const Matrix& A, const Vector& b, double tol) {
  require(tol > 0, "dedup tolerance must be positive");
  require(A.rows() == b.size(), "dedup: row count mismatch");
  DedupResult out;
  if (A.rows() == 0) {
    out.A = A;
    out.b = b;
    return out;
  }
  const Matrix at = A.transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(at);
  const Index k = std::min(at.rows(), at.cols());
  const auto& r = qr.matrixR();
  const double rmax = k > 0 ? std::abs(r(0, 0)) : 0.0;
  const auto& perm = qr.colsPermutation().indices();
  for (Index i = 0; i < k; ++i) {
    if (rmax == 0.0 || std::abs(r(i, i)) < tol * rmax) break;
    out.kept.push_back(perm[i]);
  }
  std::sort(out.kept.begin(), out.kept.end());
  out.A.resize(static_cast<Index>(out.kept.size()), A.cols());
  out.b.resize(static_cast<Index>(out.kept.size()));
  for (std::size_t i = 0; i < out.kept.size(); ++i) {
    out.A.row(static_cast<Index>(i)) = A.row(out.kept[i]);
    out.b[static_cast<Index>(i)] = b[out.kept[i]];
  }
  return out;
}

WeightVector train_weights(const ConstraintRows& rows, const ToleranceSet& delta,
                           const LpOptions& lp, TrainingReport* report) {
  delta.validate();
  require(rows.A.rows() == rows.b.size() &&
              static_cast<Index>(rows.labels.size()) == rows.A.rows(),
          "constraint rows are inconsistent");
  const Index ne = rows.A.cols();

  // Active rows, scaled to unit infinity norm. The tolerance of a residual
  // row is floored at the residual of the all-ones weights, which absorbs the
  // reduced solver's own roundoff and keeps rho = 1 feasible.
  IndexList active;
  std::vector<double> scale, tol;
  const Vector ones_residual = rows.A * Vector::Ones(ne) - rows.b;
  for (Index i = 0; i < rows.A.rows(); ++i) {
    const double d = delta.get(rows.labels[i]);
    if (std::isinf(d)) continue;
    const double s = rows.A.row(i).lpNorm<Eigen::Infinity>();
    if (s == 0.0) continue;  // 0 = b: independent of the weights
    active.push_back(i);
    scale.push_back(s);
    tol.push_back(std::max(d, std::abs(ones_residual[i])));
  }

  const Index na = static_cast<Index>(active.size());
  Matrix as(na, ne);
  Vector bs(na), ds(na);
  for (Index k = 0; k < na; ++k) {
    as.row(k) = rows.A.row(active[k]) / scale[k];
    bs[k] = rows.b[active[k]] / scale[k];
    ds[k] = tol[k] / scale[k];
  }

  TrainingReport rep;
  rep.rows_total = na;
  DedupResult dd = dedup_rows(as, bs);
  IndexList use = dd.kept;

  Vector rho = Vector::Zero(ne);
  for (int round = 0;; ++round) {
    const Index m = static_cast<Index>(use.size());
    LinearProgram prog;
    prog.c = Vector::Ones(ne);
    prog.G.resize(2 * m, ne);
    prog.h.resize(2 * m);
    for (Index k = 0; k < m; ++k) {
      prog.G.row(k) = as.row(use[k]);
      prog.h[k] = bs[use[k]] + ds[use[k]];
      prog.G.row(m + k) = -as.row(use[k]);
      prog.h[m + k] = -bs[use[k]] + ds[use[k]];
    }
    const LpResult res = solve_lp(prog, lp);
    rep.lp_pivots += res.pivots;
    if (res.status != LpStatus::optimal) {
      throw SolverFailure("weight training LP ended with status " + to_string(res.status) +
                              " although the all-ones weights are feasible",
                          {});
    }
    rho = res.x.cwiseMax(0.0);

    // verify every active row, including those removed as dependent
    IndexList violated;
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < na; ++k) {
      const Index i = active[k];
      const double v = std::abs(rows.A.row(i).dot(rho) - rows.b[i]) - tol[k];
      rep.max_violation = std::max(rep.max_violation, v);
      if (v > 1e-9 && std::find(use.begin(), use.end(), k) == use.end()) violated.push_back(k);
    }
    if (rep.max_violation <= 1e-9) break;
    if (violated.empty() || round >= 5) {
      std::ostringstream os;
      os << "trained weights violate the constraints by " << rep.max_violation;
      throw SolverFailure(os.str(), {});
    }
    use.insert(use.end(), violated.begin(), violated.end());
    std::sort(use.begin(), use.end());
    ++rep.resolves;
  }
  rep.rows_kept = static_cast<Index>(use.size());
  if (report) *report = rep;
  return WeightVector(rho);
}

ReducedPrimal eqp_solve_primal(const UnassembledSystem& sys, const ReducedBasis& basis,
                               const WeightVector& rho, const Vector& mu, const Vector& guess,
                               bool structural_qoi) {
  return ReducedModel(sys, basis, rho, structural_qoi).solve_primal(mu, guess);
}

Vector eqp_solve_adjoint(const UnassembledSystem& sys, const ReducedBasis& basis,
                         const WeightVector& rho, const Vector& mu, const Vector& y,
                         bool structural_qoi) {
  return ReducedModel(sys, basis, rho, structural_qoi).solve_adjoint(mu, y);
}

Vector eqp_gradient(const UnassembledSystem& sys, const ReducedBasis& basis,
                    const WeightVector& rho, const Vector& mu, const Vector& y,
                    const Vector& lambda, bool structural_qoi) {
  return ReducedModel(sys, basis, rho, structural_qoi).gradient(mu, y, lambda);
}

ReducedObjective eqp_objective(const UnassembledSystem& sys, const ReducedBasis& basis,
                               const WeightVector& rho, const Vector& mu, const Vector& guess,
                               bool structural_qoi) {
  return ReducedModel(sys, basis, rho, structural_qoi).objective_and_gradient(mu, guess);
}

void write_constraint_dump(const std::string& path, const ConstraintRows& rows,
                           const WeightVector& rho) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << std::setprecision(17);
  for (Index i = 0; i < rows.A.rows(); ++i) {
    out << to_string(rows.labels[i]) << ',' << rows.b[i];
    for (Index e = 0; e < rows.A.cols(); ++e) out << ',' << rows.A(i, e);
    out << '\n';
  }
  out << "rho,";
  for (Index e = 0; e < rho.size(); ++e) out << ',' << rho.values()[e];
  out << '\n';
}

}  // namespace eqptr
