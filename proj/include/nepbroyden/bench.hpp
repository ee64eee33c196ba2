#pragma once

// Benchmark runs behind the command line tool: problem registry, start-up
// of each method from a shift, CSV histories and their comparison.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nepbroyden/history.hpp"

namespace nepbroyden {

/// Invalid run configuration; maps to exit status 64.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unreadable or malformed history file; maps to exit status 65.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kConverged = 0, kSolverError = 1, kNotConverged = 2, kUsage = 64, kDataError = 65 };

struct RunConfig {
  std::string problem = "diag-toy";
  std::string method = "T";  // J, H, T, resinv, deflated
  std::complex<double> sigma{0, 0};
  bool sigma_given = false;  // otherwise the problem's default shift
  std::string c_choice = "ones";  // ones, e1, random
  double tol = 1e-10;
  int maxit = 100;
  double damping = std::numeric_limits<double>::infinity();
  int p_target = 1;
  std::optional<bool> conjugate;  // lock conjugate pairs; unset uses the problem default
  std::uint64_t seed = 1;
  std::string precision = "double";  // single, double
  int n = 0;                 // 0 selects the problem default
  int ode_steps = 0;         // 0 selects the problem default
  int ode_coarse_steps = 0;  // 0 uses ode_steps
  std::string scheme;        // empty selects the problem default
  std::string output;        // empty writes to stdout
  std::map<std::string, std::string> problem_params;  // milling keys
};

const std::vector<std::string>& problem_ids();
const std::vector<std::string>& method_ids();

/// Checks ids and numeric ranges; throws UsageError.
void validate(const RunConfig& cfg);

/// Applies flat config keys (flag names without dashes, '-' or '_') to cfg,
/// skipping keys listed in keep. Milling keys go to problem_params.
void apply_config_file(const std::map<std::string, std::string>& kv, RunConfig& cfg,
                       const std::vector<std::string>& keep = {});

std::complex<double> parse_complex(const std::string& text);

struct RunOutcome {
  int exit_code = kConverged;
  ConvergenceHistory history;  // deflated runs: concatenated, k global
  std::vector<std::complex<double>> eigenvalues;
  std::vector<std::string> messages;
  long actions = 0;  // NEP actions in the solve, excluding set-up
};

/// Runs one configuration. Throws UsageError for bad ids; solver failures
/// are reported through exit_code = 1 with the partial history.
RunOutcome run_benchmark(const RunConfig& cfg);

void write_csv(std::ostream& out, const ConvergenceHistory& history);
ConvergenceHistory read_csv(std::istream& in);
ConvergenceHistory read_csv_file(const std::string& path);

struct CompareSummary {
  std::vector<std::string> names;
  std::vector<std::size_t> iterations;
  std::vector<double> final_residuals;
  std::vector<double> total_wall_time;
  // lambda_differences[f][k]: |lambda_k(file f) - lambda_k(file 0)| over the common prefix.
  std::vector<std::vector<double>> lambda_differences;
  std::size_t overlap = 0;
};

/// Throws CsvError for fewer than two histories or an empty overlap.
CompareSummary compare_runs(const std::vector<std::string>& names, const std::vector<ConvergenceHistory>& runs);
void print_summary(std::ostream& out, const CompareSummary& summary);

}  // namespace nepbroyden
