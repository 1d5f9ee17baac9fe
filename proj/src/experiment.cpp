#include "eqptr/experiment.hpp"

#include "eqptr/burgers.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

namespace eqptr {

namespace {

const std::map<std::string, Method>& method_table() {
  static const std::map<std::string, Method> table = {
      {"HDM", Method::HDM},         {"ROM", Method::ROM},         {"ROM_d0", Method::ROM_d0},
      {"EQP1", Method::EQP1},       {"EQP2", Method::EQP2},       {"EQP3", Method::EQP3},
      {"EQP1_d0", Method::EQP1_d0}, {"EQP2_d0", Method::EQP2_d0}, {"EQP3_d0", Method::EQP3_d0},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(int line, const std::string& key) {
  return "line " + std::to_string(line) + ": key '" + key + "'";
}

double to_double(const std::string& v, int line, const std::string& key) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    throw ParseError(where(line, key) + ": malformed number '" + v + "'");
  return d;
}

long to_integer(const std::string& v, int line, const std::string& key) {
  std::size_t pos = 0;
  long n = 0;
  try {
    n = std::stol(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    throw ParseError(where(line, key) + ": malformed integer '" + v + "'");
  return n;
}

bool to_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError(where(line, key) + ": malformed boolean '" + v + "'");
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [name, value] : method_table())
    if (value == m) return name;
  return "?";
}

Method parse_method(const std::string& name) {
  const auto it = method_table().find(name);
  if (it == method_table().end()) throw ParseError("unknown method '" + name + "'");
  return it->second;
}

std::string to_string(Problem p) { return p == Problem::burgers ? "burgers" : "shape_diffusion"; }

void apply_method(Method m, MethodOptions& opts) {
  switch (m) {
    case Method::HDM:
      throw ContractViolation("HDM is not a trust-region method");
    case Method::ROM:
    case Method::ROM_d0:
      opts.model = ModelKind::rom;
      break;
    case Method::EQP1:
    case Method::EQP1_d0:
      opts.model = ModelKind::eqp;
      opts.selection = ConstraintSet::C1;
      break;
    case Method::EQP2:
    case Method::EQP2_d0:
      opts.model = ModelKind::eqp;
      opts.selection = ConstraintSet::C2;
      break;
    case Method::EQP3:
    case Method::EQP3_d0:
      opts.model = ModelKind::eqp;
      opts.selection = ConstraintSet::C3;
      break;
  }
  opts.basis.include_initial_sensitivities = m == Method::ROM_d0 || m == Method::EQP1_d0 ||
                                             m == Method::EQP2_d0 || m == Method::EQP3_d0;
}

std::vector<double> parse_cutoffs(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const double v = to_double(item, 0, "cutoffs");
    if (!(v > 0)) throw ParseError("cutoffs must be positive");
    out.push_back(v);
  }
  if (out.empty()) throw ParseError("empty cutoff list");
  return out;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&, int, const std::string&)>;
  auto dbl = [](double& target) -> Setter {
    return [&target](const std::string& v, int l, const std::string& k) { target = to_double(v, l, k); };
  };
  auto idx = [](Index& target) -> Setter {
    return [&target](const std::string& v, int l, const std::string& k) { target = to_integer(v, l, k); };
  };
  auto boolean = [](bool& target) -> Setter {
    return [&target](const std::string& v, int l, const std::string& k) { target = to_bool(v, l, k); };
  };
  std::map<std::string, Setter> keys = {
      {"problem",
       [&](const std::string& v, int l, const std::string& k) {
         if (v == "burgers")
           cfg.problem = Problem::burgers;
         else if (v == "shape_diffusion")
           cfg.problem = Problem::shape_diffusion;
         else
           throw ParseError(where(l, k) + ": unknown problem '" + v + "'");
       }},
      {"method",
       [&](const std::string& v, int l, const std::string& k) {
         try {
           cfg.method = parse_method(v);
         } catch (const ParseError&) {
           throw ParseError(where(l, k) + ": unknown method '" + v + "'");
         }
       }},
      {"seed",
       [&](const std::string& v, int l, const std::string& k) {
         const long s = to_integer(v, l, k);
         if (s < 0) throw ParseError(where(l, k) + ": seed must be nonnegative");
         cfg.seed = static_cast<unsigned long>(s);
       }},
      {"tr.eta1", dbl(cfg.tr.eta1)},
      {"tr.eta2", dbl(cfg.tr.eta2)},
      {"tr.gamma1", dbl(cfg.tr.gamma1)},
      {"tr.gamma2", dbl(cfg.tr.gamma2)},
      {"tr.delta0", dbl(cfg.tr.delta0)},
      {"tr.delta_max", dbl(cfg.tr.delta_max)},
      {"tr.kappa", dbl(cfg.tr.kappa_ratio)},
      {"tr.kappa1", dbl(cfg.tr.kappa_weights[0])},
      {"tr.kappa2", dbl(cfg.tr.kappa_weights[1])},
      {"tr.kappa3", dbl(cfg.tr.kappa_weights[2])},
      {"tr.fd_step", dbl(cfg.tr.fd_step)},
      {"tr.grad_stop", dbl(cfg.tr.grad_stop)},
      {"tr.cg_tol", dbl(cfg.tr.cg_tol)},
      {"tr.max_iters",
       [&](const std::string& v, int l, const std::string& k) {
         cfg.tr.max_iters = static_cast<int>(to_integer(v, l, k));
       }},
      {"tr.max_cg",
       [&](const std::string& v, int l, const std::string& k) {
         cfg.tr.max_cg = static_cast<int>(to_integer(v, l, k));
       }},
      {"eqp.delta_dv", dbl(cfg.fixed.dv)},
      {"eqp.delta_q", dbl(cfg.fixed.q)},
      {"eqp.delta_rs", dbl(cfg.fixed.rs)},
      {"eqp.structural_qoi", boolean(cfg.structural_qoi)},
      {"eqp.force_unit_weights", boolean(cfg.force_unit_weights)},
      {"basis.p_max",
       [&](const std::string& v, int l, const std::string& k) { cfg.p_max = to_integer(v, l, k); }},
      {"basis.q_max",
       [&](const std::string& v, int l, const std::string& k) { cfg.q_max = to_integer(v, l, k); }},
      {"basis.affine", boolean(cfg.affine)},
      {"baseline.run", boolean(cfg.run_baseline)},
      {"baseline.max_iters",
       [&](const std::string& v, int l, const std::string& k) {
         cfg.baseline_max_iters = static_cast<int>(to_integer(v, l, k));
       }},
      {"output.dir", [&](const std::string& v, int, const std::string&) { cfg.out_dir = v; }},
      {"output.cutoffs",
       [&](const std::string& v, int l, const std::string& k) {
         try {
           cfg.cutoffs = parse_cutoffs(v);
         } catch (const ParseError& e) {
           throw ParseError(where(l, k) + ": " + e.what());
         }
       }},
      {"burgers.n_elems", idx(cfg.burgers_elems)},
      {"burgers.nu", dbl(cfg.burgers_nu)},
      {"burgers.n_mu", idx(cfg.burgers_n_mu)},
      {"shape.nx", idx(cfg.shape_mesh.nx)},
      {"shape.ny", idx(cfg.shape_mesh.ny)},
      {"shape.amplitude", dbl(cfg.shape_mesh.amplitude)},
      {"shape.source", dbl(cfg.shape_mesh.source)},
      {"shape.beta", dbl(cfg.shape_mesh.beta)},
      {"shape.n_mu", idx(cfg.shape_n_mu)},
      {"shape.alpha", dbl(cfg.shape_alpha)},
      {"shape.f_star",
       [&](const std::string& v, int l, const std::string& k) { cfg.shape_f_star = to_double(v, l, k); }},
      {"shape.motion",
       [&](const std::string& v, int l, const std::string& k) {
         if (v == "reduced")
           cfg.shape_motion = MotionMode::reduced;
         else if (v == "full")
           cfg.shape_motion = MotionMode::full;
         else
           throw ParseError(where(l, k) + ": unknown motion mode '" + v + "'");
       }},
  };

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw ParseError(where(line, key) + ": unknown key");
    if (value.empty()) throw ParseError(where(line, key) + ": missing value");
    it->second(value, line, key);
  }

  try {
    cfg.tr.validate();
    cfg.fixed.validate();
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("invalid configuration: ") + e.what());
  }
  if (cfg.p_max && *cfg.p_max < 0) throw ParseError("basis.p_max must be nonnegative");
  if (cfg.q_max && *cfg.q_max < 0) throw ParseError("basis.q_max must be nonnegative");
  if (cfg.burgers_elems < 8) throw ParseError("burgers.n_elems must be at least 8");
  if (!(cfg.burgers_nu > 0)) throw ParseError("burgers.nu must be positive");
  if (cfg.burgers_n_mu < 1 || cfg.shape_n_mu < 1) throw ParseError("n_mu must be positive");
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

const char* const kHistoryHeader =
    "iter,m_k,abs_f_minus_m,grad_norm,S_k,rho_ratio,nnz_pct,n_k,t_basis,t_eqp,t_subprob,t_hdm";

std::vector<HistoryRow> history_rows(const std::vector<IterationRecord>& records) {
  std::vector<HistoryRow> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    HistoryRow h;
    h.iter = r.iter;
    h.m_k = r.m_k;
    h.abs_f_minus_m = r.abs_f_minus_m;
    h.grad_norm = r.grad_norm;
    h.s_k = r.s_k;
    h.rho_ratio = r.rho_ratio;
    h.nnz_pct = r.nnz_pct;
    h.n_k = r.n_k;
    h.t_basis = r.t_basis;
    h.t_eqp = r.t_eqp;
    h.t_subprob = r.t_subprob;
    h.t_hdm = r.t_hdm;
    rows.push_back(h);
  }
  return rows;
}

void write_history(const std::vector<HistoryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history file '" + path + "'");
  out << kHistoryHeader << '\n' << std::setprecision(12);
  for (const auto& h : rows) {
    out << h.iter << ',' << h.m_k << ',' << h.abs_f_minus_m << ',' << h.grad_norm << ',' << h.s_k
        << ',' << h.rho_ratio << ',' << h.nnz_pct << ',' << h.n_k << ',' << h.t_basis << ','
        << h.t_eqp << ',' << h.t_subprob << ',' << h.t_hdm << '\n';
  }
  if (!out) throw std::runtime_error("error while writing '" + path + "'");
}

void write_history(const std::vector<IterationRecord>& records, const std::string& path) {
  write_history(history_rows(records), path);
}

std::vector<HistoryRow> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read history file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != kHistoryHeader)
    throw ParseError("history file '" + path + "' has an unexpected header");
  std::vector<HistoryRow> rows;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(trim(item));
    if (f.size() != 12) throw ParseError("line " + std::to_string(ln) + ": expected 12 fields");
    auto num = [&](int i) { return to_double(f[i], ln, "column " + std::to_string(i)); };
    HistoryRow h;
    h.iter = static_cast<int>(to_integer(f[0], ln, "iter"));
    h.m_k = num(1);
    h.abs_f_minus_m = num(2);
    h.grad_norm = num(3);
    h.s_k = num(4);
    h.rho_ratio = num(5);
    h.nnz_pct = num(6);
    h.n_k = to_integer(f[7], ln, "n_k");
    h.t_basis = num(8);
    h.t_eqp = num(9);
    h.t_subprob = num(10);
    h.t_hdm = num(11);
    rows.push_back(h);
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::string& label, const TrResult& run,
                                  const std::vector<double>& cutoffs, const TrResult* baseline) {
  auto first_hit = [](const TrResult& r, double cutoff) -> const IterationRecord* {
    for (const auto& rec : r.history)
      if (rec.s_k <= cutoff) return &rec;
    return nullptr;
  };
  std::vector<SummaryRow> rows;
  for (double c : cutoffs) {
    SummaryRow row;
    row.method = label;
    row.cutoff = c;
    const IterationRecord* hit = first_hit(run, c);
    row.speedup = std::numeric_limits<double>::quiet_NaN();
    if (hit) {
      row.reached = true;
      row.n_hdm = hit->counters.hdm_primal;
      row.n_rom = hit->counters.rom_solves;
      row.n_eqp = hit->counters.eqp_solves;
      row.cost = hit->elapsed;
      if (baseline) {
        const IterationRecord* b = first_hit(*baseline, c);
        if (b && hit->elapsed > 0) row.speedup = b->elapsed / hit->elapsed;
      }
    } else {
      row.cost = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

void write_summary(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary file '" + path + "'");
  out << "method,cutoff,#HDM,#ROM,#EQP,cost(s),speedup\n" << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.method << ',' << r.cutoff << ',';
    if (r.reached)
      out << r.n_hdm << ',' << r.n_rom << ',' << r.n_eqp << ',' << r.cost << ',' << r.speedup;
    else
      out << "nan,nan,nan,nan,nan";
    out << '\n';
  }
}

ExperimentResult run_experiment(const RunConfig& cfg) {
  std::unique_ptr<UnassembledSystem> sys;
  Vector mu0;
  std::optional<double> f_star;
  if (cfg.problem == Problem::burgers) {
    BurgersSetup s = make_burgers(cfg.burgers_elems, cfg.burgers_nu, cfg.burgers_n_mu);
    mu0 = s.mu0;
    sys = std::move(s.system);
    f_star = 0.0;
  } else {
    ShapeSetup s = make_shape_diffusion(cfg.shape_mesh, cfg.shape_n_mu, cfg.shape_alpha,
                                        std::nullopt, cfg.shape_motion);
    mu0 = s.mu0;
    sys = std::move(s.system);
  }
  if (cfg.seed != 0) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    for (Index i = 0; i < mu0.size(); ++i) mu0[i] += dist(rng);
  }
  if (cfg.problem == Problem::shape_diffusion) {
    if (cfg.shape_f_star) {
      f_star = cfg.shape_f_star;
    } else {
      // tight reference run for the optimal value
      BfgsConfig ref;
      ref.grad_stop = 1e-10;
      ref.max_iters = 500;
      f_star = run_hdm_opt(*sys, mu0, ref).f;
    }
  }

  ExperimentResult res;
  res.f_star = f_star;
  std::filesystem::create_directories(cfg.out_dir);

  BfgsConfig bfgs;
  bfgs.grad_stop = cfg.tr.grad_stop;
  bfgs.max_iters = cfg.baseline_max_iters;
  bfgs.first_step = cfg.tr.delta0;
  bfgs.f_star = f_star;

  if (cfg.method == Method::HDM) {
    res.run = run_hdm_opt(*sys, mu0, bfgs);
  } else {
    if (cfg.run_baseline) res.baseline = run_hdm_opt(*sys, mu0, bfgs);
    MethodOptions opts;
    apply_method(cfg.method, opts);
    opts.fixed = cfg.fixed;
    opts.basis.p_max = cfg.p_max;
    opts.basis.q_max = cfg.q_max;
    opts.basis.affine = cfg.affine;
    opts.structural_qoi = cfg.structural_qoi;
    opts.force_unit_weights = cfg.force_unit_weights;
    opts.f_star = f_star;
    res.run = run_eqp_tr(*sys, mu0, cfg.tr, opts);
  }

  const std::string label = to_string(cfg.method);
  const std::filesystem::path dir(cfg.out_dir);
  res.history_path = (dir / ("history_" + label + ".csv")).string();
  write_history(res.run.history, res.history_path);
  const TrResult* base = cfg.method == Method::HDM ? &res.run
                                                   : (res.baseline ? &*res.baseline : nullptr);
  if (res.baseline) {
    res.baseline_history_path = (dir / "history_HDM.csv").string();
    write_history(res.baseline->history, res.baseline_history_path);
    res.summary = summarize("HDM", *res.baseline, cfg.cutoffs, base);
  }
  const auto mine = summarize(label, res.run, cfg.cutoffs, base);
  res.summary.insert(res.summary.end(), mine.begin(), mine.end());
  res.summary_path = (dir / "summary.csv").string();
  write_summary(res.summary, res.summary_path);
  return res;
}

}  // namespace eqptr
