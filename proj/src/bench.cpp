#include "nepbroyden/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "nepbroyden/deflation.hpp"
#include "nepbroyden/problems.hpp"
#include "nepbroyden/resinv.hpp"

namespace nepbroyden {

const std::vector<std::string>& problem_ids() {
  static const std::vector<std::string> ids{"diag-toy",     "random-qep",   "qdep",       "dep-double",
                                            "tpdde-scalar", "milling-1dof", "milling-pde"};
  return ids;
}

const std::vector<std::string>& method_ids() {
  static const std::vector<std::string> ids{"J", "H", "T", "resinv", "deflated"};
  return ids;
}

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("bad number for " + key + ": " + text);
}

int to_int(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw UsageError("bad integer for " + key + ": " + text);
  return static_cast<int>(v);
}

}  // namespace

std::complex<double> parse_complex(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) return {to_double("sigma", text), 0.0};
  return {to_double("sigma", text.substr(0, comma)), to_double("sigma", text.substr(comma + 1))};
}

void validate(const RunConfig& cfg) {
  if (!contains(problem_ids(), cfg.problem)) throw UsageError("unknown problem: " + cfg.problem);
  if (!contains(method_ids(), cfg.method)) throw UsageError("unknown method: " + cfg.method);
  if (cfg.c_choice != "ones" && cfg.c_choice != "e1" && cfg.c_choice != "random") {
    throw UsageError("unknown c choice: " + cfg.c_choice);
  }
  if (cfg.precision != "single" && cfg.precision != "double") {
    throw UsageError("unknown precision: " + cfg.precision);
  }
  if (!(cfg.tol > 0)) throw UsageError("tol must be positive");
  if (cfg.maxit < 0) throw UsageError("maxit must be nonnegative");
  if (!(cfg.damping > 0)) throw UsageError("damping must be positive");
  if (cfg.p_target < 1) throw UsageError("p must be at least 1");
  if (cfg.n < 0 || cfg.ode_steps < 0 || cfg.ode_coarse_steps < 0) throw UsageError("sizes must be positive");
  if (!cfg.scheme.empty()) {
    try {
      parse_scheme(cfg.scheme);
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
  }
}

void apply_config_file(const std::map<std::string, std::string>& kv, RunConfig& cfg,
                       const std::vector<std::string>& keep) {
  static const std::vector<std::string> milling_keys{"a_p", "m",   "omega0", "zeta", "tau", "k_r",
                                                     "k_t", "eps", "d",      "area", "n_space", "dxx_inverse_h2", "literal_signs"};
  for (const auto& [raw_key, value] : kv) {
    const std::string key = normalize_key(raw_key);
    if (contains(keep, key)) continue;
    if (key == "problem") {
      cfg.problem = value;
    } else if (key == "method") {
      cfg.method = value;
    } else if (key == "sigma") {
      cfg.sigma = parse_complex(value);
      cfg.sigma_given = true;
    } else if (key == "c") {
      cfg.c_choice = value;
    } else if (key == "tol") {
      cfg.tol = to_double(key, value);
    } else if (key == "maxit") {
      cfg.maxit = to_int(key, value);
    } else if (key == "damping") {
      cfg.damping = value == "inf" ? std::numeric_limits<double>::infinity() : to_double(key, value);
    } else if (key == "p") {
      cfg.p_target = to_int(key, value);
    } else if (key == "conjugate") {
      if (value != "true" && value != "false" && value != "1" && value != "0") {
        throw UsageError("config: conjugate must be true or false");
      }
      cfg.conjugate = value == "true" || value == "1";
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key == "precision") {
      cfg.precision = value;
    } else if (key == "n") {
      cfg.n = to_int(key, value);
    } else if (key == "ode_steps") {
      cfg.ode_steps = to_int(key, value);
    } else if (key == "ode_coarse_steps") {
      cfg.ode_coarse_steps = to_int(key, value);
    } else if (key == "scheme") {
      cfg.scheme = value;
    } else if (key == "output") {
      cfg.output = value;
    } else if (contains(milling_keys, key)) {
      cfg.problem_params[key] = value;
    } else {
      throw UsageError("unknown config key: " + raw_key);
    }
  }
}

namespace {

template <typename Real>
struct Problem {
  NepPtr<Real> nep;
  std::shared_ptr<const OdeNep<Real>> ode;
  std::complex<double> sigma;
  int coarse_steps = 0;
  bool conjugate = true;
};

template <typename Real>
Problem<Real> build_problem(const RunConfig& cfg) {
  Problem<Real> p;
  const auto& id = cfg.problem;
  auto steps = [&](int fallback) { return cfg.ode_steps > 0 ? cfg.ode_steps : fallback; };
  auto scheme = [&](OdeScheme fallback) { return cfg.scheme.empty() ? fallback : parse_scheme(cfg.scheme); };
  MillingConfig milling;
  try {
    apply_milling_config(cfg.problem_params, milling);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  if (id == "diag-toy") {
    p.nep = make_diag_toy<Real>();
    p.sigma = 1.9;
  } else if (id == "random-qep") {
    p.nep = make_random_qep<Real>(cfg.n > 0 ? cfg.n : 20, cfg.seed);
    p.sigma = 0.0;
  } else if (id == "qdep") {
    p.nep = make_qdep<Real>(cfg.n > 0 ? cfg.n : 40, cfg.seed);
    p.sigma = 0.0;
  } else if (id == "dep-double") {
    p.nep = make_dep_double<Real>();
    p.sigma = {0.0, 8.0};
    p.conjugate = false;  // n = 2: the conjugate would take the second slot
  } else if (id == "tpdde-scalar") {
    OdeNepConfig ode;
    ode.n = 1;
    ode.steps = steps(100);
    ode.scheme = scheme(OdeScheme::Rk4);
    ode.a = constant_coefficient(Eigen::MatrixXd::Constant(1, 1, 1.0));
    ode.b = constant_coefficient(Eigen::MatrixXd::Zero(1, 1));
    p.ode = make_tpdde<Real>(std::move(ode));
    p.sigma = 0.9;
  } else if (id == "milling-1dof") {
    p.ode = make_milling_1dof<Real>(milling, steps(64), scheme(OdeScheme::Rk4));
    p.sigma = {-0.5, 0.0};
  } else if (id == "milling-pde") {
    if (cfg.n > 0) milling.n_space = cfg.n;
    else if (!cfg.problem_params.count("n_space")) milling.n_space = 200;
    p.ode = make_milling_pde<Real>(milling, steps(15), scheme(OdeScheme::Trapezoidal));
    p.sigma = 0.0;
    p.coarse_steps = 7;
  }
  if (p.ode) p.nep = p.ode;
  if (cfg.ode_coarse_steps > 0) p.coarse_steps = cfg.ode_coarse_steps;
  if (p.ode && p.coarse_steps == 0) p.coarse_steps = p.ode->config().steps;
  if (cfg.sigma_given) p.sigma = cfg.sigma;
  if (cfg.conjugate) p.conjugate = *cfg.conjugate;
  return p;
}

template <typename Real>
ComplexVector<Real> make_c(const std::string& choice, Index n, std::uint64_t seed) {
  ComplexVector<Real> c(n);
  if (choice == "e1") {
    c.setZero();
    c(0) = Real(1);
  } else if (choice == "random") {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal;
    for (Index i = 0; i < n; ++i) c(i) = Complex<Real>(Real(normal(rng)), Real(normal(rng)));
    c /= c.norm();
  } else {
    c.setConstant(Real(1) / std::sqrt(Real(n)));
  }
  return c;
}

void finish(RunOutcome& out, const ConvergenceHistory& history) {
  out.history = history;
  out.exit_code = history.converged ? kConverged : kNotConverged;
}

template <typename Real>
RunOutcome run_typed(const RunConfig& cfg) {
  using Vector = ComplexVector<Real>;
  using Matrix = ComplexMatrix<Real>;
  RunOutcome out;
  const Problem<Real> problem = build_problem<Real>(cfg);
  const NepProblem<Real>& nep = *problem.nep;
  const Index n = nep.size();
  const Complex<Real> sigma(static_cast<Real>(problem.sigma.real()), static_cast<Real>(problem.sigma.imag()));
  const Vector c = make_c<Real>(cfg.c_choice, n, cfg.seed);

  SolverOptions opts;
  opts.tol = cfg.tol;
  opts.maxit = cfg.maxit;
  opts.damping = cfg.damping;

  const Matrix m1 = problem.ode ? approx_matrix(*problem.ode, sigma, problem.coarse_steps)
                                : assemble_or_probe(nep, sigma);

  if (cfg.method == "deflated") {
    DeflationOptions<Real> dopts;
    dopts.solver = opts;
    dopts.m1 = m1;
    dopts.seed = cfg.seed;
    dopts.use_conjugate_symmetry = problem.conjugate;
    nep.reset_action_count();
    const auto res = deflated_broyden(nep, sigma, c, cfg.p_target, dopts);
    out.actions = nep.action_count();
    ConvergenceHistory all;
    int k = 0;
    for (const auto& h : res.histories) {
      for (auto rec : h.records) {
        rec.k = ++k;
        all.records.push_back(rec);
      }
    }
    all.converged = res.complete;
    for (Index j = 0; j < res.pair.size(); ++j) out.eigenvalues.emplace_back(res.pair.s(j, j));
    out.messages = res.warnings;
    finish(out, all);
    return out;
  }

  const auto ctx = DeflationContext<Real>::empty(n);
  const auto start = starting_triplet(nep, ctx, sigma, c, m1, Matrix(n, 0));
  const Vector f1 = derivative_action(nep, sigma, start.v);

  if (cfg.method == "J" || cfg.method == "H") {
    const NepSystem<Real> sys = build_nep_system<Real>(problem.nep, c);
    Vector x0(n + 1);
    x0.head(n) = start.v;
    x0(n) = sigma;
    Matrix j0 = Matrix::Zero(n + 1, n + 1);
    j0.topLeftCorner(n, n) = m1;
    j0.topRightCorner(n, 1) = f1;
    j0.bottomLeftCorner(1, n) = c.adjoint();
    const bool h = cfg.method == "H";
    Matrix jh = h ? LuFactorization<Real>(j0).inverse() : j0;
    nep.reset_action_count();
    const auto res = solve_generic<Real>(sys.f, x0, std::move(jh), h ? BroydenVariant::H : BroydenVariant::J, opts);
    out.actions = nep.action_count();
    out.eigenvalues.emplace_back(res.state.x(n));
    finish(out, res.history);
  } else if (cfg.method == "T") {
    Matrix w1 = f1;
    auto state = init_structured(nep, ctx, start.v, Vector(0), sigma, LuFactorization<Real>(m1).inverse(),
                                 std::move(w1), Matrix(c));
    nep.reset_action_count();
    const auto res = solve_structured(std::move(state), nep, ctx, opts);
    out.actions = nep.action_count();
    out.eigenvalues.emplace_back(res.state.lambda);
    finish(out, res.history);
  } else {
    auto state = make_resinv_state(nep, c, sigma, start.v, sigma, std::optional<Matrix>(m1));
    nep.reset_action_count();
    const auto res = solve_resinv(std::move(state), nep, opts);
    out.actions = nep.action_count();
    out.eigenvalues.emplace_back(res.state.lambda);
    finish(out, res.history);
  }
  return out;
}

}  // namespace

RunOutcome run_benchmark(const RunConfig& cfg) {
  validate(cfg);
  try {
    return cfg.precision == "single" ? run_typed<float>(cfg) : run_typed<double>(cfg);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    RunOutcome out;
    out.exit_code = kSolverError;
    out.messages.emplace_back(e.what());
    return out;
  }
}

void write_csv(std::ostream& out, const ConvergenceHistory& history) {
  out << "k,residual_norm,lambda_re,lambda_im,wall_time_s\n";
  char line[160];
  for (const auto& r : history.records) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.6f\n", r.k, r.residual_norm, r.lambda.real(),
                  r.lambda.imag(), r.wall_time_s);
    out << line;
  }
}

ConvergenceHistory read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "k,residual_norm,lambda_re,lambda_im,wall_time_s") throw CsvError("unexpected header: " + line);
  ConvergenceHistory h;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw CsvError("row " + std::to_string(row) + ": expected 5 fields");
    double v[5];
    for (int i = 0; i < 5; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(fields[i], &used);
        if (used != fields[i].size()) throw CsvError("");
      } catch (const std::exception&) {
        throw CsvError("row " + std::to_string(row) + ": bad number '" + fields[i] + "'");
      }
    }
    IterationRecord r;
    r.k = static_cast<int>(v[0]);
    if (r.k != v[0]) throw CsvError("row " + std::to_string(row) + ": k must be an integer");
    r.residual_norm = v[1];
    r.lambda = {v[2], v[3]};
    r.wall_time_s = v[4];
    h.records.push_back(r);
  }
  return h;
}

ConvergenceHistory read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path);
  return read_csv(in);
}

CompareSummary compare_runs(const std::vector<std::string>& names, const std::vector<ConvergenceHistory>& runs) {
  if (runs.size() < 2) throw CsvError("need at least two histories");
  CompareSummary s;
  s.names = names;
  s.overlap = runs.front().size();
  for (const auto& r : runs) {
    s.overlap = std::min(s.overlap, r.size());
    s.iterations.push_back(r.size());
    s.final_residuals.push_back(r.empty() ? std::nan("") : r.records.back().residual_norm);
    s.total_wall_time.push_back(r.empty() ? 0.0 : r.records.back().wall_time_s);
  }
  if (s.overlap == 0) throw CsvError("empty overlap");
  for (const auto& r : runs) {
    std::vector<double> d(s.overlap);
    for (std::size_t k = 0; k < s.overlap; ++k) d[k] = std::abs(r.records[k].lambda - runs[0].records[k].lambda);
    s.lambda_differences.push_back(std::move(d));
  }
  return s;
}

void print_summary(std::ostream& out, const CompareSummary& s) {
  out << "file,iterations,final_residual,wall_time_s\n";
  for (std::size_t f = 0; f < s.names.size(); ++f) {
    out << s.names[f] << ',' << s.iterations[f] << ',' << std::setprecision(6) << s.final_residuals[f] << ','
        << s.total_wall_time[f] << '\n';
  }
  out << "\nk";
  for (std::size_t f = 1; f < s.names.size(); ++f) out << ",dlambda[" << s.names[f] << "]";
  out << '\n';
  for (std::size_t k = 0; k < s.overlap; ++k) {
    out << k + 1;
    for (std::size_t f = 1; f < s.names.size(); ++f) out << ',' << std::setprecision(6) << s.lambda_differences[f][k];
    out << '\n';
  }
}

}  // namespace nepbroyden
