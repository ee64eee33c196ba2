#include "nepbroyden/resinv.hpp"

#include <cmath>

namespace nepbroyden {

template <typename Real>
ResinvState<Real> make_resinv_state(const NepProblem<Real>& nep, const ComplexVector<Real>& c,
                                    Complex<Real> sigma, ComplexVector<Real> v0, Complex<Real> lambda0,
                                    const std::optional<ComplexMatrix<Real>>& m1) {
  const Index n = nep.size();
  if (c.size() != n || v0.size() != n) throw InputError("resinv: c or v0 has wrong dimension");
  const Complex<Real> scale = c.dot(v0);
  if (!(std::abs(scale) > Real(0))) throw NumericalError("normalization vector orthogonal to candidate");

  ResinvState<Real> s;
  s.lu = std::make_shared<const LuFactorization<Real>>(m1 ? *m1 : assemble_or_probe(nep, sigma));
  if (s.lu->size() != n) throw InputError("resinv: M1 must be n x n");
  s.y = s.lu->solve_adjoint(c);
  s.v = std::move(v0) / scale;
  s.lambda = lambda0;
  s.sigma = sigma;
  s.c = c;
  s.mv = nep.apply(s.lambda, s.v);
  return s;
}

template <typename Real>
ResinvState<Real> resinv_step(ResinvState<Real> s, const NepProblem<Real>& nep) {
  const Complex<Real> g = s.y.dot(s.mv);
  if (g != Complex<Real>(0)) {
    const Real delta = default_fd_step(s.lambda);
    const Complex<Real> dg = s.y.dot(apply_deriv_fd(nep, s.lambda, s.v, delta));
    if (!(std::abs(dg) > machine_epsilon<Real>() * std::abs(g)) || !std::isfinite(std::abs(dg))) {
      throw NumericalError("stagnant Rayleigh update");
    }
    s.lambda -= g / dg;
  }
  s.v -= s.lu->solve(nep.apply(s.lambda, s.v));
  const Complex<Real> scale = s.c.dot(s.v);
  if (!(std::abs(scale) > Real(0))) throw NumericalError("normalization vector orthogonal to candidate");
  s.v /= scale;
  s.mv = nep.apply(s.lambda, s.v);
  ++s.k;
  return s;
}

template <typename Real>
ResinvResult<Real> solve_resinv(ResinvState<Real> state, const NepProblem<Real>& nep,
                                const SolverOptions& opts) {
  ResinvResult<Real> out;
  const WallClock clock;
  int steps = 0;
  while (static_cast<double>(state.mv.norm()) > opts.tol && steps < opts.maxit) {
    state = resinv_step(std::move(state), nep);
    ++steps;
    IterationRecord rec;
    rec.k = steps;
    rec.residual_norm = static_cast<double>(state.mv.norm());
    rec.lambda = std::complex<double>(state.lambda);
    rec.wall_time_s = clock.elapsed();
    out.history.records.push_back(rec);
  }
  out.history.converged = static_cast<double>(state.mv.norm()) <= opts.tol;
  out.state = std::move(state);
  return out;
}

#define NEPBROYDEN_INSTANTIATE(Real)                                                                   \
  template ResinvState<Real> make_resinv_state<Real>(const NepProblem<Real>&, const ComplexVector<Real>&, \
                                                     Complex<Real>, ComplexVector<Real>, Complex<Real>,  \
                                                     const std::optional<ComplexMatrix<Real>>&);       \
  template ResinvState<Real> resinv_step<Real>(ResinvState<Real>, const NepProblem<Real>&);            \
  template ResinvResult<Real> solve_resinv<Real>(ResinvState<Real>, const NepProblem<Real>&,           \
                                                 const SolverOptions&);

NEPBROYDEN_INSTANTIATE(float)
NEPBROYDEN_INSTANTIATE(double)

#undef NEPBROYDEN_INSTANTIATE

}  // namespace nepbroyden
