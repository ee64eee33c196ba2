#pragma once

// Damped Broyden's good method on a generic nonlinear system F(x) = 0,
// storing either the Jacobian approximation J (J-version) or its inverse
// H (H-version).

#include <functional>

#include "nepbroyden/history.hpp"
#include "nepbroyden/nep.hpp"

namespace nepbroyden {

template <typename Real>
using VectorFunction = std::function<ComplexVector<Real>(const ComplexVector<Real>&)>;

enum class BroydenVariant { J, H };

/// Step-length cap: gamma = min(1, t / ||dx||). An infinite threshold means undamped.
struct DampingRule {
  double threshold = std::numeric_limits<double>::infinity();
};

template <typename Real>
Real damping_gamma(Real step_norm, double threshold);

template <typename Real>
Real damping_gamma(const ComplexVector<Real>& dx, double threshold) {
  return damping_gamma<Real>(dx.norm(), threshold);
}

template <typename Real>
struct GenericState {
  ComplexVector<Real> x;
  ComplexMatrix<Real> jh;  // J_k or H_k = J_k^{-1}, depending on variant
  BroydenVariant variant = BroydenVariant::J;
  ComplexVector<Real> fx;  // F(x_k)
  int k = 0;
  bool converged = false;

  // Last accepted step: undamped direction and damping factor.
  ComplexVector<Real> last_dx;
  Real last_gamma = 1;
};

/// Evaluates F(x0) once and packages the initial state.
template <typename Real>
GenericState<Real> make_generic_state(const VectorFunction<Real>& f, ComplexVector<Real> x0,
                                      ComplexMatrix<Real> jh, BroydenVariant variant);

/// J-version step: solve J dx = -F(x) by LU, damp, then rank-one secant update of J.
/// Throws BreakdownError when J is singular. Exactly one evaluation of F.
template <typename Real>
GenericState<Real> step_J(GenericState<Real> state, const VectorFunction<Real>& f, DampingRule rule);

/// H-version step: dx = -H F(x), Sherman-Morrison update of H, no linear solve.
template <typename Real>
GenericState<Real> step_H(GenericState<Real> state, const VectorFunction<Real>& f, DampingRule rule);

template <typename Real>
GenericState<Real> step_generic(GenericState<Real> state, const VectorFunction<Real>& f, DampingRule rule) {
  return state.variant == BroydenVariant::J ? step_J(std::move(state), f, rule)
                                            : step_H(std::move(state), f, rule);
}

template <typename Real>
struct GenericResult {
  GenericState<Real> state;
  ConvergenceHistory history;
};

/// Iterates until ||F(x_k)|| <= tol or maxit steps. The eigenvalue column of
/// the history is the last component of x.
template <typename Real>
GenericResult<Real> solve_generic(const VectorFunction<Real>& f, ComplexVector<Real> x0,
                                  ComplexMatrix<Real> jh, BroydenVariant variant,
                                  const SolverOptions& opts);

template <typename Real>
GenericResult<Real> solve_generic(GenericState<Real> state, const VectorFunction<Real>& f,
                                  const SolverOptions& opts);

/// F((v, lambda)) = (M(lambda) v, c^H v - 1) together with its exact Jacobian
///   [M(lambda)  M'(lambda) v; c^H  0].
template <typename Real>
struct NepSystem {
  VectorFunction<Real> f;
  std::function<ComplexMatrix<Real>(const ComplexVector<Real>&)> jacobian;
};

template <typename Real>
NepSystem<Real> build_nep_system(NepPtr<Real> nep, ComplexVector<Real> c);

/// Generic form of the augmented system
///   F(v, u, lambda) = (M(lambda) v + U(lambda) u - b1, C^H v - b2)
/// with x = (v, u, lambda).
template <typename Real>
VectorFunction<Real> build_structured_system(NepPtr<Real> nep, DeflationContext<Real> ctx,
                                             ComplexMatrix<Real> c);

/// J_1 = [M_1 W_1; C^H 0], the generic counterpart of a structured start.
template <typename Real>
ComplexMatrix<Real> assemble_structured_jacobian(const ComplexMatrix<Real>& m1,
                                                 const ComplexMatrix<Real>& w1,
                                                 const ComplexMatrix<Real>& c);

}  // namespace nepbroyden
