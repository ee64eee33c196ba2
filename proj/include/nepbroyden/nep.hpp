#pragma once

// Matrix-free nonlinear eigenvalue problems M(lambda) v = 0 and the
// deflated residual machinery built on top of them.

#include <atomic>
#include <functional>
#include <memory>

#include "nepbroyden/numerics.hpp"

namespace nepbroyden {

/// A nonlinear eigenvalue problem given by its action w -> M(lambda) w.
///
/// Derivative actions and assembled matrices are optional capabilities.
/// Every call to apply() or apply_block() is counted (one per column) so
/// that tests can assert the number of NEP actions an algorithm performs.
/// Implementations must be safe for concurrent const calls.
template <typename Real>
class NepProblem {
 public:
  using Scalar = Complex<Real>;
  using Vector = ComplexVector<Real>;
  using Matrix = ComplexMatrix<Real>;

  virtual ~NepProblem() = default;
  NepProblem(const NepProblem&) = delete;
  NepProblem& operator=(const NepProblem&) = delete;

  Index size() const { return n_; }

  /// True when conj(M(lambda)) == M(conj(lambda)) entrywise.
  bool conjugate_symmetric() const { return conjugate_symmetric_; }

  Vector apply(Scalar lambda, const Vector& w) const;
  /// Column-wise action on a block of vectors; counts one action per column.
  Matrix apply_block(Scalar lambda, const Matrix& w) const;

  virtual bool has_derivative() const { return false; }
  /// Analytic M'(lambda) w. Throws InputError when unavailable.
  Vector apply_derivative(Scalar lambda, const Vector& w) const;

  virtual bool can_assemble() const { return false; }
  /// Assembled M(sigma) (or an approximation of it). Throws when unavailable.
  Matrix assemble(Scalar sigma) const;

  long action_count() const { return actions_.load(); }
  void reset_action_count() const { actions_.store(0); }

 protected:
  NepProblem(Index n, bool conjugate_symmetric) : n_(n), conjugate_symmetric_(conjugate_symmetric) {}

  virtual Vector do_apply(Scalar lambda, const Vector& w) const = 0;
  virtual Matrix do_apply_block(Scalar lambda, const Matrix& w) const;
  virtual Vector do_apply_derivative(Scalar lambda, const Vector& w) const;
  virtual Matrix do_assemble(Scalar sigma) const;

 private:
  Index n_;
  bool conjugate_symmetric_;
  mutable std::atomic<long> actions_{0};
};

template <typename Real>
using NepPtr = std::shared_ptr<const NepProblem<Real>>;

/// NEP assembled from callables; convenient for small hand-written problems.
template <typename Real>
struct FunctionNepSpec {
  using Scalar = Complex<Real>;
  using Vector = ComplexVector<Real>;
  using Matrix = ComplexMatrix<Real>;

  Index n = 0;
  std::function<Vector(Scalar, const Vector&)> apply;
  std::function<Vector(Scalar, const Vector&)> derivative;  // optional
  std::function<Matrix(Scalar)> assemble;                   // optional
  bool conjugate_symmetric = false;
};

template <typename Real>
NepPtr<Real> make_function_nep(FunctionNepSpec<Real> spec);

/// Scale-relative central-difference step: 1e-6 (1 + |lambda|) in double,
/// 5e-3 (1 + |lambda|) in single precision.
template <typename Real>
Real default_fd_step(Complex<Real> lambda);

/// (M(lambda + delta) w - M(lambda - delta) w) / (2 delta).
template <typename Real>
ComplexVector<Real> apply_deriv_fd(const NepProblem<Real>& nep, Complex<Real> lambda,
                                   const ComplexVector<Real>& w, Real delta);

/// M'(lambda) w, analytic when the problem provides it, otherwise a central
/// difference with default_fd_step.
template <typename Real>
ComplexVector<Real> derivative_action(const NepProblem<Real>& nep, Complex<Real> lambda,
                                      const ComplexVector<Real>& w);

/// M(lambda) assembled, either directly or column by column (n actions).
template <typename Real>
ComplexMatrix<Real> assemble_or_probe(const NepProblem<Real>& nep, Complex<Real> lambda);

/// Locked part of an invariant pair plus the right-hand side b = (b1, b2)
/// of the augmented system
///   [M(lambda) U(lambda); C^H 0] [v; u] = [b1; b2].
template <typename Real>
struct DeflationContext {
  ComplexMatrix<Real> x;   // n x p, orthonormal columns
  ComplexMatrix<Real> s;   // p x p, upper triangular
  ComplexVector<Real> b1;  // n
  ComplexVector<Real> b2;  // p + 1

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }

  /// p = 0 context: b1 = 0, b2 = e_1.
  static DeflationContext empty(Index n);
  /// b1 = 0, b2 = e_{p+1}.
  static DeflationContext from_pair(ComplexMatrix<Real> x, ComplexMatrix<Real> s);
};

/// Throws InputError("shift collides with deflated eigenvalue") when lambda
/// lies within 1e-14 (1 + |lambda|) of a diagonal entry of S.
template <typename Real>
void check_shift(const ComplexMatrix<Real>& s, Complex<Real> lambda);

/// U(lambda) u = M(lambda) X (lambda I - S)^{-1} u with a single NEP action.
template <typename Real>
ComplexVector<Real> u_apply(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                            Complex<Real> lambda, const ComplexVector<Real>& u);

/// Trapezoidal quadrature of the Cauchy integral
///   (1/2 pi i) oint M(xi) X (xi I - S)^{-1} (xi - lambda)^{-1} u dxi
/// over a circle around lambda of radius 0.5 dist(lambda, diag S).
/// Reference for u_apply; costs quad_points NEP actions.
template <typename Real>
ComplexVector<Real> u_contour_oracle(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                     Complex<Real> lambda, const ComplexVector<Real>& u,
                                     int quad_points);

/// r = M(lambda) (v + X (lambda I - S)^{-1} u) - b1, using exactly one NEP action.
template <typename Real>
ComplexVector<Real> deflated_residual(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                      Complex<Real> lambda, const ComplexVector<Real>& v,
                                      const ComplexVector<Real>& u);

}  // namespace nepbroyden
