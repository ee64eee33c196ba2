// nepbroyden: run one solver configuration and write its convergence
// history as CSV, or compare several such files.
//
//   nepbroyden --problem qdep --method T --sigma 0 --output qdep_T.csv
//   nepbroyden compare qdep_J.csv qdep_T.csv

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nepbroyden/bench.hpp"
#include "nepbroyden/problems.hpp"

namespace nb = nepbroyden;

int main(int argc, char** argv) {
  CLI::App app{"Broyden-type solvers for nonlinear eigenvalue problems"};
  app.set_help_all_flag("--help-all");

  nb::RunConfig cfg;
  std::string sigma_text;
  std::string damping_text;
  std::string config_path;

  std::vector<std::pair<std::string, CLI::Option*>> flags;
  auto track = [&](const std::string& key, CLI::Option* opt) { flags.emplace_back(key, opt); };

  track("problem", app.add_option("--problem", cfg.problem, "problem id")
                       ->check(CLI::IsMember(nb::problem_ids())));
  track("method", app.add_option("--method", cfg.method, "J, H, T, resinv or deflated")
                      ->check(CLI::IsMember(nb::method_ids())));
  track("sigma", app.add_option("--sigma", sigma_text, "shift as re or re,im"));
  track("c", app.add_option("--c", cfg.c_choice, "normalization vector: ones, e1, random")
                 ->check(CLI::IsMember({"ones", "e1", "random"})));
  track("tol", app.add_option("--tol", cfg.tol, "residual tolerance")->check(CLI::PositiveNumber));
  track("maxit", app.add_option("--maxit", cfg.maxit, "iteration limit")->check(CLI::NonNegativeNumber));
  track("damping", app.add_option("--damping", damping_text, "step cap t (inf for none)"));
  track("p", app.add_option("--p", cfg.p_target, "eigenvalues to lock (deflated)")->check(CLI::PositiveNumber));
  bool no_conjugate = false;
  track("conjugate", app.add_flag("--no-conjugate", no_conjugate, "do not lock conjugate pairs (deflated)"));
  track("seed", app.add_option("--seed", cfg.seed, "random seed"));
  track("precision", app.add_option("--precision", cfg.precision, "single or double")
                         ->check(CLI::IsMember({"single", "double"})));
  track("n", app.add_option("--n", cfg.n, "problem size (n_space for milling-pde)")->check(CLI::PositiveNumber));
  track("ode_steps", app.add_option("--ode-steps", cfg.ode_steps, "time steps N")->check(CLI::PositiveNumber));
  track("ode_coarse_steps", app.add_option("--ode-coarse-steps", cfg.ode_coarse_steps,
                                           "time steps for the M(sigma) approximation")
                                ->check(CLI::PositiveNumber));
  track("scheme", app.add_option("--scheme", cfg.scheme, "rk4, implicit-euler or trapezoidal"));
  track("output", app.add_option("--output,-o", cfg.output, "CSV path (stdout when absent)"));
  app.add_option("--config", config_path, "flat key = value file; explicit flags win")
      ->check(CLI::ExistingFile);

  std::vector<std::string> files;
  CLI::App* compare = app.add_subcommand("compare", "compare convergence histories");
  compare->add_option("files", files, "CSV histories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return nb::kUsage;
  }

  if (compare->parsed()) {
    try {
      std::vector<nb::ConvergenceHistory> runs;
      for (const auto& f : files) runs.push_back(nb::read_csv_file(f));
      nb::print_summary(std::cout, nb::compare_runs(files, runs));
      return 0;
    } catch (const nb::CsvError& e) {
      std::cerr << "compare: " << e.what() << '\n';
      return nb::kDataError;
    }
  }

  nb::RunOutcome outcome;
  try {
    if (!config_path.empty()) {
      std::vector<std::string> explicit_keys;
      for (const auto& [key, opt] : flags) {
        if (opt->count() > 0) explicit_keys.push_back(key);
      }
      nb::apply_config_file(nb::read_flat_config(config_path), cfg, explicit_keys);
    }
    if (!sigma_text.empty()) {
      cfg.sigma = nb::parse_complex(sigma_text);
      cfg.sigma_given = true;
    }
    if (no_conjugate) cfg.conjugate = false;
    if (!damping_text.empty()) {
      cfg.damping = damping_text == "inf" ? std::numeric_limits<double>::infinity() : std::stod(damping_text);
    }
    outcome = nb::run_benchmark(cfg);
  } catch (const std::exception& e) {
    std::cerr << "usage: " << e.what() << '\n';
    return nb::kUsage;
  }

  if (cfg.output.empty()) {
    nb::write_csv(std::cout, outcome.history);
  } else {
    std::ofstream out(cfg.output);
    if (!out) {
      std::cerr << "cannot write " << cfg.output << '\n';
      return nb::kSolverError;
    }
    nb::write_csv(out, outcome.history);
  }
  for (const auto& m : outcome.messages) std::cerr << m << '\n';
  for (const auto& l : outcome.eigenvalues) {
    std::cerr << "lambda = " << l.real() << (l.imag() < 0 ? " - " : " + ") << std::abs(l.imag()) << "i\n";
  }
  return outcome.exit_code;
}
