#include "nepbroyden/broyden.hpp"

#include <cmath>

namespace nepbroyden {

template <typename Real>
Real damping_gamma(Real step_norm, double threshold) {
  if (!(step_norm > 0) || std::isinf(threshold)) return Real(1);
  return std::min(Real(1), static_cast<Real>(threshold / static_cast<double>(step_norm)));
}

template <typename Real>
GenericState<Real> make_generic_state(const VectorFunction<Real>& f, ComplexVector<Real> x0,
                                      ComplexMatrix<Real> jh, BroydenVariant variant) {
  if (jh.rows() != x0.size() || jh.cols() != x0.size()) {
    throw InputError("Broyden: initial matrix does not match x0");
  }
  GenericState<Real> s;
  s.fx = f(x0);
  if (s.fx.size() != x0.size()) throw InputError("Broyden: F must map C^m to C^m");
  s.x = std::move(x0);
  s.jh = std::move(jh);
  s.variant = variant;
  return s;
}

namespace {

// Shared tail of both variants: damped move and the new residual.
template <typename Real>
struct Move {
  ComplexVector<Real> f_new;
  ComplexVector<Real> z;  // (F(x_{k+1}) - (1 - gamma) F(x_k)) / gamma
  Real gamma;
};

template <typename Real>
Move<Real> take_step(GenericState<Real>& s, const ComplexVector<Real>& dx, const VectorFunction<Real>& f,
                     DampingRule rule) {
  const Real gamma = damping_gamma<Real>(dx, rule.threshold);
  s.x += gamma * dx;
  ComplexVector<Real> f_new = f(s.x);
  ComplexVector<Real> z = (f_new - (Real(1) - gamma) * s.fx) / gamma;
  return {std::move(f_new), std::move(z), gamma};
}

}  // namespace

template <typename Real>
GenericState<Real> step_J(GenericState<Real> s, const VectorFunction<Real>& f, DampingRule rule) {
  if (s.variant != BroydenVariant::J) throw InputError("step_J on an H-version state");
  if (s.fx.squaredNorm() == 0) {
    s.converged = true;
    return s;
  }
  ComplexVector<Real> dx;
  try {
    dx = -LuFactorization<Real>(s.jh).solve(s.fx);
  } catch (const NumericalError&) {
    throw BreakdownError("Broyden breakdown");
  }
  const Real dx2 = dx.squaredNorm();
  auto mv = take_step(s, dx, f, rule);
  s.jh.noalias() += (mv.z / dx2) * dx.adjoint();
  s.fx = std::move(mv.f_new);
  s.last_dx = std::move(dx);
  s.last_gamma = mv.gamma;
  ++s.k;
  return s;
}

template <typename Real>
GenericState<Real> step_H(GenericState<Real> s, const VectorFunction<Real>& f, DampingRule rule) {
  if (s.variant != BroydenVariant::H) throw InputError("step_H on a J-version state");
  if (s.fx.squaredNorm() == 0) {
    s.converged = true;
    return s;
  }
  ComplexVector<Real> dx = -(s.jh * s.fx);
  const Real dx2 = dx.squaredNorm();
  if (!(dx2 > 0)) throw BreakdownError("Broyden breakdown");
  auto mv = take_step(s, dx, f, rule);
  // H z = (H F(x_{k+1}) + (1 - gamma) dx) / gamma
  ComplexVector<Real> hz = (s.jh * mv.f_new + (Real(1) - mv.gamma) * dx) / mv.gamma;
  const Complex<Real> denom = dx2 + dx.dot(hz);
  if (!(std::abs(denom) > Real(1e-14) * dx2)) throw BreakdownError("Broyden breakdown");
  Eigen::Matrix<Complex<Real>, 1, Eigen::Dynamic> dxh = dx.adjoint() * s.jh;
  s.jh.noalias() -= (hz / denom) * dxh;
  s.fx = std::move(mv.f_new);
  s.last_dx = std::move(dx);
  s.last_gamma = mv.gamma;
  ++s.k;
  return s;
}

template <typename Real>
GenericResult<Real> solve_generic(GenericState<Real> state, const VectorFunction<Real>& f,
                                  const SolverOptions& opts) {
  GenericResult<Real> out;
  const WallClock clock;
  const DampingRule rule{opts.damping};
  int steps = 0;
  while (true) {
    if (static_cast<double>(state.fx.norm()) <= opts.tol) {
      state.converged = true;
      break;
    }
    if (steps >= opts.maxit) break;
    state = step_generic(std::move(state), f, rule);
    ++steps;
    IterationRecord rec;
    rec.k = steps;
    rec.residual_norm = static_cast<double>(state.fx.norm());
    rec.lambda = std::complex<double>(state.x(state.x.size() - 1));
    rec.wall_time_s = clock.elapsed();
    out.history.records.push_back(rec);
    if (state.converged) break;
  }
  out.history.converged = state.converged;
  out.state = std::move(state);
  return out;
}

template <typename Real>
GenericResult<Real> solve_generic(const VectorFunction<Real>& f, ComplexVector<Real> x0,
                                  ComplexMatrix<Real> jh, BroydenVariant variant,
                                  const SolverOptions& opts) {
  return solve_generic(make_generic_state(f, std::move(x0), std::move(jh), variant), f, opts);
}

template <typename Real>
NepSystem<Real> build_nep_system(NepPtr<Real> nep, ComplexVector<Real> c) {
  if (!nep) throw InputError("build_nep_system: null problem");
  if (c.size() != nep->size()) throw InputError("build_nep_system: c has wrong dimension");
  if (c.squaredNorm() == 0) throw InputError("build_nep_system: c must be nonzero");
  const Index n = nep->size();
  NepSystem<Real> sys;
  sys.f = [nep, c, n](const ComplexVector<Real>& x) {
    if (x.size() != n + 1) throw InputError("NEP system: x must have n + 1 entries");
    ComplexVector<Real> out(n + 1);
    out.head(n) = nep->apply(x(n), x.head(n));
    out(n) = c.dot(x.head(n)) - Real(1);
    return out;
  };
  sys.jacobian = [nep, c, n](const ComplexVector<Real>& x) {
    if (x.size() != n + 1) throw InputError("NEP system: x must have n + 1 entries");
    ComplexMatrix<Real> j = ComplexMatrix<Real>::Zero(n + 1, n + 1);
    j.topLeftCorner(n, n) = assemble_or_probe(*nep, x(n));
    j.topRightCorner(n, 1) = derivative_action(*nep, x(n), ComplexVector<Real>(x.head(n)));
    j.bottomLeftCorner(1, n) = c.adjoint();
    return j;
  };
  return sys;
}

template <typename Real>
VectorFunction<Real> build_structured_system(NepPtr<Real> nep, DeflationContext<Real> ctx,
                                             ComplexMatrix<Real> c) {
  const Index n = nep->size();
  const Index p = ctx.p();
  if (c.rows() != n || c.cols() != p + 1) throw InputError("structured system: C must be n x (p+1)");
  return [nep, ctx = std::move(ctx), c = std::move(c), n, p](const ComplexVector<Real>& x) {
    if (x.size() != n + p + 1) throw InputError("structured system: x must have n + p + 1 entries");
    ComplexVector<Real> out(n + p + 1);
    const ComplexVector<Real> v = x.head(n);
    const ComplexVector<Real> u = x.segment(n, p);
    out.head(n) = deflated_residual(*nep, ctx, x(n + p), v, u);
    out.tail(p + 1) = c.adjoint() * v - ctx.b2;
    return out;
  };
}

template <typename Real>
ComplexMatrix<Real> assemble_structured_jacobian(const ComplexMatrix<Real>& m1,
                                                 const ComplexMatrix<Real>& w1,
                                                 const ComplexMatrix<Real>& c) {
  const Index n = m1.rows();
  const Index q = w1.cols();
  if (m1.cols() != n || w1.rows() != n || c.rows() != n || c.cols() != q) {
    throw InputError("assemble_structured_jacobian: dimension mismatch");
  }
  ComplexMatrix<Real> j = ComplexMatrix<Real>::Zero(n + q, n + q);
  j.topLeftCorner(n, n) = m1;
  j.topRightCorner(n, q) = w1;
  j.bottomLeftCorner(q, n) = c.adjoint();
  return j;
}

#define NEPBROYDEN_INSTANTIATE(Real)                                                                   \
  template Real damping_gamma<Real>(Real, double);                                                     \
  template GenericState<Real> make_generic_state<Real>(const VectorFunction<Real>&, ComplexVector<Real>, \
                                                       ComplexMatrix<Real>, BroydenVariant);           \
  template GenericState<Real> step_J<Real>(GenericState<Real>, const VectorFunction<Real>&, DampingRule); \
  template GenericState<Real> step_H<Real>(GenericState<Real>, const VectorFunction<Real>&, DampingRule); \
  template GenericResult<Real> solve_generic<Real>(GenericState<Real>, const VectorFunction<Real>&,    \
                                                   const SolverOptions&);                              \
  template GenericResult<Real> solve_generic<Real>(const VectorFunction<Real>&, ComplexVector<Real>,   \
                                                   ComplexMatrix<Real>, BroydenVariant,                \
                                                   const SolverOptions&);                              \
  template NepSystem<Real> build_nep_system<Real>(NepPtr<Real>, ComplexVector<Real>);                  \
  template VectorFunction<Real> build_structured_system<Real>(NepPtr<Real>, DeflationContext<Real>,    \
                                                              ComplexMatrix<Real>);                    \
  template ComplexMatrix<Real> assemble_structured_jacobian<Real>(                                     \
      const ComplexMatrix<Real>&, const ComplexMatrix<Real>&, const ComplexMatrix<Real>&);

NEPBROYDEN_INSTANTIATE(float)
NEPBROYDEN_INSTANTIATE(double)

#undef NEPBROYDEN_INSTANTIATE

}  // namespace nepbroyden
