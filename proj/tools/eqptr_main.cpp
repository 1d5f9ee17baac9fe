#include "eqptr/experiment.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Trust-region optimization with hyperreduced models"};
  std::string config_path, method, out_dir, cutoffs;
  long seed = -1;
  app.add_option("--config", config_path, "configuration file (key = value lines)");
  app.add_option("--method", method, "HDM, ROM, ROM_d0, EQP1, EQP2, EQP3, EQP1_d0, EQP2_d0, EQP3_d0");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--cutoffs", cutoffs, "comma-separated S_k cutoffs");
  app.add_option("--seed", seed, "seed for the starting-point perturbation (0: none)");
  CLI11_PARSE(app, argc, argv);

  try {
    eqptr::RunConfig cfg = config_path.empty() ? eqptr::parse_config_text("")
                                               : eqptr::parse_config(config_path);
    if (!method.empty()) cfg.method = eqptr::parse_method(method);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!cutoffs.empty()) cfg.cutoffs = eqptr::parse_cutoffs(cutoffs);
    if (seed >= 0) cfg.seed = static_cast<unsigned long>(seed);

    const eqptr::ExperimentResult res = eqptr::run_experiment(cfg);
    std::cout << "problem " << eqptr::to_string(cfg.problem) << ", method "
              << eqptr::to_string(cfg.method) << ": " << eqptr::to_string(res.run.status)
              << " after " << res.run.history.size() << " records, f = " << std::setprecision(12)
              << res.run.f << "\n";
    if (!res.run.message.empty()) std::cout << "  " << res.run.message << "\n";
    std::cout << "history: " << res.history_path << "\nsummary: " << res.summary_path << "\n";
    std::cout << "method,cutoff,#HDM,#ROM,#EQP,cost(s),speedup\n";
    for (const auto& r : res.summary) {
      std::cout << r.method << ',' << r.cutoff << ',';
      if (r.reached)
        std::cout << r.n_hdm << ',' << r.n_rom << ',' << r.n_eqp << ',' << r.cost << ','
                  << r.speedup << '\n';
      else
        std::cout << "not reached\n";
    }
    return res.run.status == eqptr::TrStatus::converged ? 0 : 1;
  } catch (const eqptr::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
