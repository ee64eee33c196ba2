#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <sstream>

#include "nepbroyden/bench.hpp"

namespace py = pybind11;
namespace nb = nepbroyden;

namespace {

nb::RunConfig make_config(const std::string& problem, const std::string& method, py::object sigma, double tol,
                          int maxit, double damping, int p, std::optional<bool> conjugate, std::uint64_t seed,
                          const std::string& precision, int n, int ode_steps, const std::string& scheme,
                          const std::map<std::string, std::string>& params) {
  nb::RunConfig cfg;
  cfg.problem = problem;
  cfg.method = method;
  if (!sigma.is_none()) {
    cfg.sigma = sigma.cast<std::complex<double>>();
    cfg.sigma_given = true;
  }
  cfg.tol = tol;
  cfg.maxit = maxit;
  cfg.damping = damping;
  cfg.p_target = p;
  cfg.conjugate = conjugate;
  cfg.seed = seed;
  cfg.precision = precision;
  cfg.n = n;
  cfg.ode_steps = ode_steps;
  cfg.scheme = scheme;
  cfg.problem_params = params;
  return cfg;
}

py::dict history_dict(const nb::ConvergenceHistory& h) {
  std::vector<int> k;
  std::vector<double> res, wall;
  std::vector<std::complex<double>> lambda;
  for (const auto& r : h.records) {
    k.push_back(r.k);
    res.push_back(r.residual_norm);
    lambda.push_back(r.lambda);
    wall.push_back(r.wall_time_s);
  }
  py::dict d;
  d["k"] = k;
  d["residual_norm"] = res;
  d["lambda"] = lambda;
  d["wall_time_s"] = wall;
  d["converged"] = h.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Broyden solvers for nonlinear eigenvalue problems";

  py::register_exception<nb::UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<nb::CsvError>(m, "CsvError", PyExc_ValueError);

  m.def("problem_ids", &nb::problem_ids);
  m.def("method_ids", &nb::method_ids);

  m.def(
      "run",
      [](const std::string& problem, const std::string& method, py::object sigma, double tol, int maxit,
         double damping, int p, std::optional<bool> conjugate, std::uint64_t seed, const std::string& precision,
         int n, int ode_steps, const std::string& scheme, const std::map<std::string, std::string>& params) {
        const auto cfg = make_config(problem, method, sigma, tol, maxit, damping, p, conjugate, seed, precision, n,
                                     ode_steps, scheme, params);
        nb::RunOutcome out;
        {
          py::gil_scoped_release release;
          out = nb::run_benchmark(cfg);
        }
        py::dict d = history_dict(out.history);
        d["exit_code"] = out.exit_code;
        d["eigenvalues"] = out.eigenvalues;
        d["messages"] = out.messages;
        d["actions"] = out.actions;
        return d;
      },
      py::arg("problem") = "diag-toy", py::arg("method") = "T", py::arg("sigma") = py::none(),
      py::arg("tol") = 1e-10, py::arg("maxit") = 100, py::arg("damping") = std::numeric_limits<double>::infinity(),
      py::arg("p") = 1, py::arg("conjugate") = py::none(), py::arg("seed") = 1, py::arg("precision") = "double",
      py::arg("n") = 0, py::arg("ode_steps") = 0, py::arg("scheme") = "",
      py::arg("params") = std::map<std::string, std::string>{},
      "Runs one benchmark configuration and returns its history.");

  m.def(
      "read_csv",
      [](const std::string& text) {
        std::istringstream in(text);
        return history_dict(nb::read_csv(in));
      },
      py::arg("text"));
}
