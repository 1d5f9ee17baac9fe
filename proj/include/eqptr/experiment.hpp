#pragma once

#include "eqptr/hdm_optimizer.hpp"
#include "eqptr/shape_diffusion.hpp"
#include "eqptr/trust_region.hpp"

#include <stdexcept>
#include <string>

namespace eqptr {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Problem { burgers, shape_diffusion };
enum class Method { HDM, ROM, ROM_d0, EQP1, EQP2, EQP3, EQP1_d0, EQP2_d0, EQP3_d0 };

std::string to_string(Method m);
Method parse_method(const std::string& name);  // throws ParseError
std::string to_string(Problem p);

// Turns a method label into trust-region options (model kind, constraint
// set, initial sensitivities). HDM has no trust-region options.
void apply_method(Method m, MethodOptions& opts);

struct RunConfig {
  Problem problem = Problem::burgers;
  Method method = Method::EQP3_d0;
  unsigned long seed = 0;
  TrConfig tr;
  ToleranceSet fixed = default_fixed_tolerances();
  std::optional<Index> p_max, q_max;
  bool affine = false;
  bool structural_qoi = false;
  bool force_unit_weights = false;
  bool run_baseline = true;
  int baseline_max_iters = 200;
  std::vector<double> cutoffs{1e-3, 1e-5, 1e-8, 1e-10};
  std::string out_dir = "out";

  Index burgers_elems = 128;
  double burgers_nu = 0.1;
  Index burgers_n_mu = 4;

  ShapeMeshSpec shape_mesh;
  Index shape_n_mu = 6;
  double shape_alpha = 1e-3;
  std::optional<double> shape_f_star;
  MotionMode shape_motion = MotionMode::reduced;
};

// Flat "key = value" lines, '#' starts a comment. Unknown keys and
// malformed values raise ParseError naming the key and line.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);
std::vector<double> parse_cutoffs(const std::string& list);  // "1e-3,1e-5"

// One row of the history CSV.
struct HistoryRow {
  int iter = 0;
  double m_k = 0, abs_f_minus_m = 0, grad_norm = 0, s_k = 0, rho_ratio = 0, nnz_pct = 0;
  Index n_k = 0;
  double t_basis = 0, t_eqp = 0, t_subprob = 0, t_hdm = 0;
};

extern const char* const kHistoryHeader;
std::vector<HistoryRow> history_rows(const std::vector<IterationRecord>& records);
void write_history(const std::vector<HistoryRow>& rows, const std::string& path);
void write_history(const std::vector<IterationRecord>& records, const std::string& path);
std::vector<HistoryRow> read_history(const std::string& path);

struct SummaryRow {
  std::string method;
  double cutoff = 0;
  bool reached = false;
  long n_hdm = 0, n_rom = 0, n_eqp = 0;
  double cost = 0;
  double speedup = 0;
};

// First record with S_k <= cutoff, per cutoff; speedup relative to baseline.
std::vector<SummaryRow> summarize(const std::string& label, const TrResult& run,
                                  const std::vector<double>& cutoffs,
                                  const TrResult* baseline);
void write_summary(const std::vector<SummaryRow>& rows, const std::string& path);

struct ExperimentResult {
  TrResult run;
  std::optional<TrResult> baseline;
  std::optional<double> f_star;
  std::vector<SummaryRow> summary;
  std::string history_path, baseline_history_path, summary_path;
};

// Builds the problem, runs the HDM baseline (unless disabled or the method
// is HDM itself) and the selected method, and writes the CSV files.
ExperimentResult run_experiment(const RunConfig& cfg);

}  // namespace eqptr
