#pragma once

// Residual inverse iteration with a fixed shift: one LU of M(sigma), then
//
//   lambda <- lambda - g(lambda) / g'(lambda),   g(mu) = c^H M(sigma)^{-1} M(mu) v,
//   v      <- v - M(sigma)^{-1} M(lambda) v,     c^H v = 1.
//
// Converges linearly with a rate proportional to |lambda - sigma|.

#include <memory>
#include <optional>

#include "nepbroyden/history.hpp"
#include "nepbroyden/nep.hpp"

namespace nepbroyden {

template <typename Real>
struct ResinvState {
  ComplexVector<Real> v;  // c^H v = 1
  Complex<Real> lambda{};
  Complex<Real> sigma{};
  ComplexVector<Real> c;
  std::shared_ptr<const LuFactorization<Real>> lu;  // of M(sigma)
  ComplexVector<Real> y;                           // M(sigma)^{-H} c
  ComplexVector<Real> mv;                          // M(lambda) v
  int k = 0;
};

/// Factorizes M(sigma) (m1 when given, otherwise assembled or probed) and
/// scales v0 so that c^H v0 = 1. Costs one NEP action beyond the assembly.
template <typename Real>
ResinvState<Real> make_resinv_state(const NepProblem<Real>& nep, const ComplexVector<Real>& c,
                                    Complex<Real> sigma, ComplexVector<Real> v0, Complex<Real> lambda0,
                                    const std::optional<ComplexMatrix<Real>>& m1 = std::nullopt);

/// One iteration; four NEP actions (two for the difference quotient, one for
/// the correction, one for the new residual).
template <typename Real>
ResinvState<Real> resinv_step(ResinvState<Real> state, const NepProblem<Real>& nep);

template <typename Real>
struct ResinvResult {
  ResinvState<Real> state;
  ConvergenceHistory history;
};

/// Iterates until ||M(lambda) v|| <= tol or maxit steps. opts.damping is ignored.
template <typename Real>
ResinvResult<Real> solve_resinv(ResinvState<Real> state, const NepProblem<Real>& nep,
                                const SolverOptions& opts);

}  // namespace nepbroyden
