#pragma once

// Structure-exploiting Broyden iteration for the augmented system
//
//   [M(lambda) U(lambda); C^H 0] [v; u] = [b1; b2].
//
// Instead of the full Jacobian approximation the state holds T ~ M_k^{-1},
// the thin block W = [U_k f_k] and Z = T W. Each step costs one NEP action,
// a (p+1) x (p+1) solve, and a handful of rank-one updates, so no O(n^3)
// work is done after initialization.

#include "nepbroyden/broyden.hpp"

namespace nepbroyden {

template <typename Real>
struct StructuredStepInfo {
  ComplexVector<Real> dv;
  ComplexVector<Real> du;
  Complex<Real> dlambda{};
  Real gamma = 1;
  ComplexVector<Real> ztilde;
  Real step_norm2 = 0;  // ||dv||^2 + ||du||^2 + |dlambda|^2
};

template <typename Real>
struct StructuredState {
  ComplexVector<Real> v;
  ComplexVector<Real> u;
  Complex<Real> lambda{};
  ComplexMatrix<Real> t;  // n x n, approximates M_k^{-1}
  ComplexMatrix<Real> w;  // n x (p+1)
  ComplexMatrix<Real> z;  // T W
  ComplexVector<Real> r;  // M(lambda) v + U(lambda) u - b1
  ComplexMatrix<Real> c;  // n x (p+1) constraint block
  ComplexVector<Real> b2;
  int k = 0;
  bool converged = false;
  StructuredStepInfo<Real> last;

  Real constraint_violation() const;
};

/// Checks C^H v1 = b2, evaluates r_1 (one NEP action) and Z_1 = T_1 W_1.
/// The right-hand side (b1, b2) is taken from ctx.
template <typename Real>
StructuredState<Real> init_structured(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                      ComplexVector<Real> v1, ComplexVector<Real> u1, Complex<Real> lambda1,
                                      ComplexMatrix<Real> t1, ComplexMatrix<Real> w1, ComplexMatrix<Real> c);

/// One structured Broyden step. When z_refresh_interval > 0, Z is recomputed
/// as T W after every z_refresh_interval steps.
template <typename Real>
StructuredState<Real> step_structured(StructuredState<Real> state, const NepProblem<Real>& nep,
                                      const DeflationContext<Real>& ctx, DampingRule rule,
                                      int z_refresh_interval = 50);

template <typename Real>
struct StructuredResult {
  StructuredState<Real> state;
  ConvergenceHistory history;
};

template <typename Real>
StructuredResult<Real> solve_structured(StructuredState<Real> state, const NepProblem<Real>& nep,
                                        const DeflationContext<Real>& ctx, const SolverOptions& opts);

}  // namespace nepbroyden
