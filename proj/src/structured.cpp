#include "nepbroyden/structured.hpp"

#include <algorithm>
#include <cmath>

namespace nepbroyden {

namespace {

template <typename Real>
Real constraint_tolerance() {
  return std::max(Real(1e-10), Real(1e3) * machine_epsilon<Real>());
}

}  // namespace

template <typename Real>
Real StructuredState<Real>::constraint_violation() const {
  const Real vn = v.norm();
  const Real res = (c.adjoint() * v - b2).norm();
  return vn > 0 ? res / vn : res;
}

template <typename Real>
StructuredState<Real> init_structured(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                      ComplexVector<Real> v1, ComplexVector<Real> u1, Complex<Real> lambda1,
                                      ComplexMatrix<Real> t1, ComplexMatrix<Real> w1, ComplexMatrix<Real> c) {
  const Index n = nep.size();
  const Index p = ctx.p();
  if (v1.size() != n || u1.size() != p) throw InputError("init_structured: v or u has wrong dimension");
  if (t1.rows() != n || t1.cols() != n) throw InputError("init_structured: T must be n x n");
  if (w1.rows() != n || w1.cols() != p + 1) throw InputError("init_structured: W must be n x (p+1)");
  if (c.rows() != n || c.cols() != p + 1) throw InputError("init_structured: C must be n x (p+1)");
  if ((c.adjoint() * v1 - ctx.b2).norm() > constraint_tolerance<Real>() * v1.norm()) {
    throw InputError("input constraint violated");
  }
  StructuredState<Real> s;
  s.r = deflated_residual(nep, ctx, lambda1, v1, u1);
  s.z = t1 * w1;
  s.v = std::move(v1);
  s.u = std::move(u1);
  s.lambda = lambda1;
  s.t = std::move(t1);
  s.w = std::move(w1);
  s.c = std::move(c);
  s.b2 = ctx.b2;
  return s;
}

template <typename Real>
StructuredState<Real> step_structured(StructuredState<Real> s, const NepProblem<Real>& nep,
                                      const DeflationContext<Real>& ctx, DampingRule rule,
                                      int z_refresh_interval) {
  using Vector = ComplexVector<Real>;
  using RowVector = Eigen::Matrix<Complex<Real>, 1, Eigen::Dynamic>;
  const Index p = s.u.size();

  if (s.r.squaredNorm() == 0) {
    s.converged = true;
    return s;
  }

  // (du, dlambda) = -(C^H Z)^{-1} C^H T r;  dv = -Z (du, dlambda) - T r
  const Vector tr = s.t * s.r;
  Vector dul;
  try {
    dul = -LuFactorization<Real>(s.c.adjoint() * s.z).solve(Vector(s.c.adjoint() * tr));
  } catch (const NumericalError&) {
    throw BreakdownError("structured breakdown");
  }
  Vector dv = -(s.z * dul) - tr;
  Vector du = dul.head(p);
  const Complex<Real> dlambda = dul(p);

  const Real step2 = dv.squaredNorm() + du.squaredNorm() + std::norm(dlambda);
  const Real gamma = damping_gamma<Real>(std::sqrt(step2), rule.threshold);

  s.v += gamma * dv;
  s.u += gamma * du;
  s.lambda += gamma * dlambda;

  Vector r_new = deflated_residual(nep, ctx, s.lambda, s.v, s.u);
  Vector zt = (r_new - (Real(1) - gamma) * s.r) / gamma;

  // Pre-update snapshots T z~ and W^H a enter the Z update.
  const Vector tz = s.t * zt;
  const RowVector dvt = dv.adjoint() * s.t;
  const Complex<Real> denom = step2 + (dvt * zt)(0, 0);
  if (!(std::abs(denom) > Real(1e-14) * step2)) throw BreakdownError("update breakdown");
  const RowVector a = -dvt / denom;

  RowVector b(p + 1);
  b.head(p) = du.adjoint();
  b(p) = std::conj(dlambda);
  b /= step2;

  const Complex<Real> one_plus_az = Real(1) + (a * zt)(0, 0);
  const RowVector zrow = a * s.w + one_plus_az * b;

  s.z.noalias() += tz * zrow;
  s.t.noalias() += tz * a;
  s.w.noalias() += zt * b;

  s.r = std::move(r_new);
  ++s.k;
  if (z_refresh_interval > 0 && s.k % z_refresh_interval == 0) s.z.noalias() = s.t * s.w;

  s.last.dv = std::move(dv);
  s.last.du = std::move(du);
  s.last.dlambda = dlambda;
  s.last.gamma = gamma;
  s.last.ztilde = std::move(zt);
  s.last.step_norm2 = step2;
  return s;
}

template <typename Real>
StructuredResult<Real> solve_structured(StructuredState<Real> state, const NepProblem<Real>& nep,
                                        const DeflationContext<Real>& ctx, const SolverOptions& opts) {
  StructuredResult<Real> out;
  const WallClock clock;
  const DampingRule rule{opts.damping};
  int steps = 0;
  while (true) {
    if (static_cast<double>(state.r.norm()) <= opts.tol) {
      state.converged = true;
      break;
    }
    if (steps >= opts.maxit) break;
    state = step_structured(std::move(state), nep, ctx, rule, opts.z_refresh_interval);
    ++steps;
    IterationRecord rec;
    rec.k = steps;
    rec.residual_norm = static_cast<double>(state.r.norm());
    rec.lambda = std::complex<double>(state.lambda);
    rec.wall_time_s = clock.elapsed();
    rec.constraint_violation = static_cast<double>(state.constraint_violation());
    out.history.records.push_back(rec);
    if (state.converged) break;
  }
  out.history.converged = state.converged;
  out.state = std::move(state);
  return out;
}

#define NEPBROYDEN_INSTANTIATE(Real)                                                                   \
  template struct StructuredState<Real>;                                                               \
  template StructuredState<Real> init_structured<Real>(                                                \
      const NepProblem<Real>&, const DeflationContext<Real>&, ComplexVector<Real>, ComplexVector<Real>, \
      Complex<Real>, ComplexMatrix<Real>, ComplexMatrix<Real>, ComplexMatrix<Real>);                   \
  template StructuredState<Real> step_structured<Real>(StructuredState<Real>, const NepProblem<Real>&, \
                                                       const DeflationContext<Real>&, DampingRule, int); \
  template StructuredResult<Real> solve_structured<Real>(StructuredState<Real>, const NepProblem<Real>&, \
                                                         const DeflationContext<Real>&,                \
                                                         const SolverOptions&);

NEPBROYDEN_INSTANTIATE(float)
NEPBROYDEN_INSTANTIATE(double)

#undef NEPBROYDEN_INSTANTIATE

}  // namespace nepbroyden
