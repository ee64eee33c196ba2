#include <doctest.h>

#include <sstream>

#include "nepbroyden/bench.hpp"

using namespace nepbroyden;

namespace {

std::string csv_of(const ConvergenceHistory& h) {
  std::ostringstream out;
  write_csv(out, h);
  return out.str();
}

// Drops the wall-time column.
std::string without_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

RunConfig config(const std::string& problem, const std::string& method) {
  RunConfig cfg;
  cfg.problem = problem;
  cfg.method = method;
  return cfg;
}

}  // namespace

TEST_CASE("validation of ids and ranges") {
  CHECK_NOTHROW(validate(RunConfig{}));
  CHECK_THROWS_AS(validate(config("nope", "T")), UsageError);
  CHECK_THROWS_AS(validate(config("diag-toy", "newton")), UsageError);
  RunConfig cfg;
  cfg.tol = -1;
  CHECK_THROWS_AS(validate(cfg), UsageError);
  cfg = RunConfig{};
  cfg.precision = "half";
  CHECK_THROWS_AS(validate(cfg), UsageError);
  CHECK(problem_ids().size() == 7);
  CHECK(method_ids().size() == 5);
}

TEST_CASE("complex shifts") {
  CHECK(parse_complex("1.5") == std::complex<double>(1.5, 0));
  CHECK(parse_complex("0,8") == std::complex<double>(0, 8));
  CHECK(parse_complex("-1e-3, 2") == std::complex<double>(-1e-3, 2));
  CHECK_THROWS_AS(parse_complex("x"), UsageError);
  CHECK_THROWS_AS(parse_complex("1,2,3"), UsageError);
}

TEST_CASE("config keys with explicit flags winning") {
  RunConfig cfg;
  cfg.tol = 1e-6;
  apply_config_file({{"problem", "qdep"}, {"tol", "1e-3"}, {"ode-steps", "12"}, {"k_r", "2"}, {"conjugate", "false"}},
                    cfg, {"tol"});
  CHECK(cfg.problem == "qdep");
  CHECK(cfg.tol == 1e-6);
  CHECK(cfg.ode_steps == 12);
  CHECK(cfg.problem_params.at("k_r") == "2");
  REQUIRE(cfg.conjugate.has_value());
  CHECK_FALSE(*cfg.conjugate);
  CHECK_THROWS_AS(apply_config_file({{"bogus", "1"}}, cfg), UsageError);
  CHECK_THROWS_AS(apply_config_file({{"maxit", "ten"}}, cfg), UsageError);
}

TEST_CASE("diagonal toy converges with every method") {
  for (const std::string m : {"J", "H", "T", "resinv", "deflated"}) {
    const auto out = run_benchmark(config("diag-toy", m));
    CHECK(out.exit_code == kConverged);
    REQUIRE_FALSE(out.history.empty());
    CHECK(out.history.records.back().residual_norm <= 1e-10);
    CHECK(std::abs(out.eigenvalues.front() - 2.0) < 1e-9);
  }
}

TEST_CASE("iteration cap gives exit code 2") {
  auto cfg = config("qdep", "T");
  cfg.maxit = 2;
  const auto out = run_benchmark(cfg);
  CHECK(out.exit_code == kNotConverged);
  CHECK(out.history.size() == 2);
}

TEST_CASE("structured run costs one action per step") {
  auto cfg = config("qdep", "T");
  cfg.damping = 1;
  const auto out = run_benchmark(cfg);
  CHECK(out.actions == static_cast<long>(out.history.size()));
}

TEST_CASE("CSV round trip and strict parsing") {
  const auto out = run_benchmark(config("diag-toy", "J"));
  const std::string text = csv_of(out.history);
  std::istringstream in(text);
  const auto back = read_csv(in);
  REQUIRE(back.size() == out.history.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back.records[k].k == out.history.records[k].k);
    CHECK(back.records[k].residual_norm == out.history.records[k].residual_norm);
    CHECK(back.records[k].lambda == out.history.records[k].lambda);
  }
  std::istringstream bad_header("k,res\n1,2\n");
  CHECK_THROWS_AS(read_csv(bad_header), CsvError);
  std::istringstream bad_row("k,residual_norm,lambda_re,lambda_im,wall_time_s\n1,2,3,x,0\n");
  CHECK_THROWS_AS(read_csv(bad_row), CsvError);
  std::istringstream short_row("k,residual_norm,lambda_re,lambda_im,wall_time_s\n1,2,3\n");
  CHECK_THROWS_AS(read_csv(short_row), CsvError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_csv(empty), CsvError);
}

TEST_CASE("repeated runs are byte identical apart from wall time") {
  for (const std::string m : {"T", "deflated"}) {
    auto cfg = config("random-qep", m);
    cfg.damping = 1;
    cfg.c_choice = "random";
    cfg.seed = 5;
    const auto a = csv_of(run_benchmark(cfg).history);
    const auto b = csv_of(run_benchmark(cfg).history);
    CHECK(without_time(a) == without_time(b));
  }
}

TEST_CASE("comparing histories") {
  const auto j = run_benchmark(config("diag-toy", "J")).history;
  const auto t = run_benchmark(config("diag-toy", "T")).history;
  const auto same = compare_runs({"a", "b"}, {j, j});
  for (double d : same.lambda_differences[1]) CHECK(d == 0.0);
  const auto jt = compare_runs({"J", "T"}, {j, t});
  CHECK(jt.overlap > 0);
  for (double d : jt.lambda_differences[1]) CHECK(d < 1e-8);
  CHECK_THROWS_AS(compare_runs({"a", "b"}, {j, ConvergenceHistory{}}), CsvError);
  CHECK_THROWS_AS(compare_runs({"a"}, {j}), CsvError);
  std::ostringstream out;
  print_summary(out, jt);
  CHECK(out.str().find("dlambda[T]") != std::string::npos);
}

TEST_CASE("single precision runs track the double reference early on") {
  auto cfg = config("qdep", "J");
  cfg.damping = 1;
  const auto ref = run_benchmark(cfg).history;
  for (const std::string m : {"J", "T"}) {
    cfg.method = m;
    cfg.precision = "single";
    const auto single = run_benchmark(cfg).history;
    REQUIRE_FALSE(single.empty());
    const auto cmp = compare_runs({"double", "single"}, {ref, single});
    CHECK(cmp.lambda_differences[1].front() < 1e-5);
  }
}

TEST_CASE("ODE problems run through the harness") {
  auto cfg = config("tpdde-scalar", "T");
  auto out = run_benchmark(cfg);
  CHECK(out.exit_code == kConverged);
  CHECK(std::abs(out.eigenvalues.front() - 1.0) < 1e-8);

  cfg = config("milling-pde", "deflated");
  cfg.n = 10;
  cfg.tol = 1e-6;
  out = run_benchmark(cfg);
  CHECK(out.exit_code == kConverged);

  cfg.scheme = "rk4";
  out = run_benchmark(cfg);
  CHECK(out.exit_code == kSolverError);
  REQUIRE_FALSE(out.messages.empty());
  CHECK(out.messages.front().find("explicit scheme") != std::string::npos);
}

TEST_CASE("double eigenvalue run keeps conjugates off by default") {
  auto cfg = config("dep-double", "deflated");
  cfg.p_target = 2;
  cfg.tol = 1e-7;
  const auto out = run_benchmark(cfg);
  REQUIRE(out.eigenvalues.size() == 2);
  for (const auto& l : out.eigenvalues) CHECK(l.imag() > 9.0);
}
